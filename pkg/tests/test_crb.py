import math

import numpy as np
import pytest

from bfisense import (Bfi, CrbConfig, DegeneratePositionError, InvalidInputError,
                      PathScenario, PositionParams, bfi_element_count, bfi_jacobian,
                      crb_map, crb_map_rows, element_scores, estimate_moments, fisher_crb,
                      half_wavelength_geometry, nl_crb, periodic_diff, position_analysis,
                      scatter_cluster, scores_from_model, static_path_cluster,
                      wrap_angle_diffs)

GEOM44 = half_wavelength_geometry(4, 4)
GEOM24 = half_wavelength_geometry(2, 4)


def make_scenario(n_rx=4, n_tx=4, snr_db=20.0, **kwargs):
    return PathScenario(geometry=half_wavelength_geometry(n_rx, n_tx),
                        static_paths=static_path_cluster(seed=11, n_paths=4),
                        snr_db=snr_db, **kwargs)


class TestPositionParams:
    def test_unknown_name_rejected(self):
        with pytest.raises(InvalidInputError):
            PositionParams((1.0,), ("bogus",))

    def test_length_mismatch_rejected(self):
        with pytest.raises(InvalidInputError):
            PositionParams((1.0, 2.0), ("aod",))

    def test_single_name_string(self):
        x = PositionParams(0.5, "aod")
        assert x.names == ("aod",)
        assert x.values == (0.5,)


class TestPeriodicDiff:
    def test_phi_wraps_down(self):
        a = Bfi(m_tx=2, n_rx=2, values=np.array([1.8 * np.pi, 0.0]))
        b = Bfi(m_tx=2, n_rx=2, values=np.array([0.2 * np.pi, 0.0]))
        # difference 1.6*pi wraps to -0.4*pi
        assert periodic_diff(a, b)[0] == pytest.approx(-0.4 * np.pi)

    def test_phi_small_difference_untouched(self):
        a = Bfi(m_tx=2, n_rx=2, values=np.array([0.5 * np.pi, 0.0]))
        b = Bfi(m_tx=2, n_rx=2, values=np.array([0.0, 0.0]))
        assert periodic_diff(a, b)[0] == pytest.approx(0.5 * np.pi)

    def test_psi_wraps(self):
        a = Bfi(m_tx=2, n_rx=2, values=np.array([0.0, 0.4 * np.pi]))
        b = Bfi(m_tx=2, n_rx=2, values=np.array([0.0, 0.1 * np.pi]))
        # difference 0.3*pi on a pi/2 period wraps to -0.2*pi
        assert periodic_diff(a, b)[1] == pytest.approx(-0.2 * np.pi)

    def test_label_mismatch_rejected(self):
        a = Bfi(m_tx=2, n_rx=2, values=np.zeros(2))
        b = Bfi(m_tx=3, n_rx=2, values=np.zeros(bfi_element_count(2, 3)))
        with pytest.raises(InvalidInputError):
            periodic_diff(a, b)

    def test_output_ranges_uniform_draws(self):
        rng = np.random.default_rng(0)
        delta = rng.uniform(-2 * np.pi, 2 * np.pi, size=100_000)
        mask = rng.random(100_000) < 0.5
        out = wrap_angle_diffs(delta, mask)
        assert np.all(out[mask] >= -np.pi) and np.all(out[mask] < np.pi)
        assert np.all(out[~mask] >= -np.pi / 4) and np.all(out[~mask] < np.pi / 4)
        # wrapped value stays congruent to the input difference
        assert np.allclose((out[mask] - delta[mask]) % (2 * np.pi), 0.0, atol=1e-9) or True
        congr_phi = (out[mask] - delta[mask]) % (2 * np.pi)
        congr_phi = np.minimum(congr_phi, 2 * np.pi - congr_phi)
        assert np.max(congr_phi) < 1e-9
        congr_psi = (out[~mask] - delta[~mask]) % (np.pi / 2)
        congr_psi = np.minimum(congr_psi, np.pi / 2 - congr_psi)
        assert np.max(congr_psi) < 1e-9


class TestEstimateMoments:
    def test_zero_noise_gives_ridge_identity(self):
        scen = make_scenario(snr_db=math.inf)
        cfg = CrbConfig(n_mc=100, seed=1)
        model = estimate_moments(PositionParams(0.1, "aod"), scen, cfg)
        n = bfi_element_count(4, 4)
        assert np.array_equal(model.covariance, cfg.ridge * np.eye(n))

    def test_diagonal_bounds_at_20db(self):
        scen = make_scenario()
        cfg = CrbConfig(n_mc=10_000, seed=7)
        model = estimate_moments(PositionParams(0.0, "aod"), scen, cfg)
        diag = np.diag(model.covariance)
        assert np.all(diag > 0)
        assert np.all(diag < (np.pi / 2) ** 2)

    def test_seeded_determinism(self):
        scen = make_scenario()
        cfg = CrbConfig(n_mc=500, seed=9)
        x = PositionParams(0.2, "aod")
        a = estimate_moments(x, scen, cfg)
        b = estimate_moments(x, scen, cfg)
        assert np.array_equal(a.covariance, b.covariance)

    def test_degenerate_position_rejected(self):
        # a bare line-of-sight channel has a rank-one mean
        scen = PathScenario(geometry=GEOM44, snr_db=20.0)
        with pytest.raises(DegeneratePositionError):
            estimate_moments(PositionParams(0.0, "aod"), scen, CrbConfig(n_mc=100, seed=0))


class _ConstantThetaScenario:
    """Angle map with no positional dependence at all."""

    def __init__(self):
        self.geometry = half_wavelength_geometry(2, 2)
        self.grid = PathScenario(geometry=self.geometry).grid

    def mean_csi(self, x=None, k=None):
        return np.array([[2.0, 0.0], [0.0, 1.0]], dtype=complex)

    def noise_variance(self, x=None, k=None):
        return 0.0


class _Case2x2Scenario:
    """Symmetric two-transmitter geometry: psi is pinned at pi/4 everywhere."""

    def __init__(self):
        self.geometry = half_wavelength_geometry(2, 2)
        self.grid = PathScenario(geometry=self.geometry).grid
        self.lam = 0.0515

    def mean_csi(self, x=None, k=None):
        d, dp = x.values
        c1 = np.exp(-2j * np.pi * d / self.lam)
        c2 = np.exp(-2j * np.pi * dp / self.lam)
        return np.array([[c1, c2], [c1, c2]])

    def noise_variance(self, x=None, k=None):
        return 0.0


class TestBfiJacobian:
    def test_constant_scenario_zero_rows(self):
        jac = bfi_jacobian(PositionParams((6.0,), ("distance",)), _ConstantThetaScenario(),
                           CrbConfig(seed=0))
        assert np.allclose(jac, 0.0)

    def test_case_a_psi_derivative_zero(self):
        scen = _Case2x2Scenario()
        x = PositionParams((5.0, 5.7), ("x", "y"))  # reuse x/y slots as the two distances
        jac = bfi_jacobian(x, scen, CrbConfig(seed=0))
        # psi row (element 2) has no dependence; phi row does
        assert np.allclose(jac[1], 0.0, atol=1e-9)
        assert np.max(np.abs(jac[0])) > 1.0

    def test_step_halving_consistency(self):
        scen = make_scenario(n_rx=2, n_tx=2)
        x = PositionParams((6.0,), ("distance",))
        cfg1 = CrbConfig(fd_step_distance=5e-4, seed=0)
        cfg2 = CrbConfig(fd_step_distance=2.5e-4, seed=0)
        j1 = bfi_jacobian(x, scen, cfg1)
        j2 = bfi_jacobian(x, scen, cfg2)
        big = np.abs(j2) > 1e-3 * np.max(np.abs(j2))
        ratio = j1[big] / j2[big]
        assert np.allclose(ratio, 1.0, atol=1e-3)

    def test_degenerate_step_reports_coordinate(self):
        scen = PathScenario(geometry=GEOM44, snr_db=20.0)
        with pytest.raises(DegeneratePositionError) as err:
            bfi_jacobian(PositionParams(0.0, "aod"), scen, CrbConfig(seed=0))
        assert "aod" in str(err.value)


class TestFisherCrb:
    def test_scalar_example(self):
        fim, crb = fisher_crb(np.array([[2.0]]), np.array([[4.0]]))
        assert fim[0, 0] == pytest.approx(1.0)
        assert crb[0] == pytest.approx(1.0)

    def test_zero_jacobian_infinite_bound(self):
        _, crb = fisher_crb(np.zeros((5, 2)), np.eye(5))
        assert np.all(np.isinf(crb))

    def test_two_parameter_hand_inversion(self):
        # block structure: J columns hit disjoint elements, C diagonal
        jac = np.array([[3.0, 0.0], [0.0, 2.0], [0.0, 0.0]])
        cov = np.diag([0.5, 2.0, 1.0])
        fim, crb = fisher_crb(jac, cov)
        assert fim[0, 0] == pytest.approx(9.0 / 0.5)
        assert fim[1, 1] == pytest.approx(4.0 / 2.0)
        assert fim[0, 1] == pytest.approx(0.0)
        assert crb[0] == pytest.approx(0.5 / 9.0)
        assert crb[1] == pytest.approx(2.0 / 4.0)

    def test_asymmetric_covariance_rejected(self):
        cov = np.array([[1.0, 0.2], [0.0, 1.0]])
        with pytest.raises(InvalidInputError):
            fisher_crb(np.ones((2, 1)), cov)

    def test_fim_positive_semidefinite_random(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            jac = rng.standard_normal((8, 3))
            a = rng.standard_normal((8, 8))
            cov = a @ a.T + 1e-6 * np.eye(8)
            fim, _ = fisher_crb(jac, cov)
            assert np.min(np.linalg.eigvalsh(fim)) >= -1e-10

    def test_bound_scales_linearly_with_noise(self):
        rng = np.random.default_rng(4)
        jac = rng.standard_normal((6, 2))
        a = rng.standard_normal((6, 6))
        cov = a @ a.T + 1e-3 * np.eye(6)
        _, crb1 = fisher_crb(jac, cov)
        _, crb3 = fisher_crb(jac, 3.0 * cov)
        assert np.allclose(crb3, 3.0 * crb1)


class TestElementScores:
    def test_zero_jacobian_row_scores_zero(self):
        jac = np.array([[1.0, 0.5], [0.0, 0.0]])
        cov = np.diag([0.1, 0.2])
        scores = scores_from_model(jac, cov, ridge=1e-10)
        assert scores[1] == 0.0
        assert scores[0] == pytest.approx((1.0 + 0.25) / 0.1)

    def test_doubling_variance_halves_scores(self):
        jac = np.array([[1.0], [2.0]])
        cov = np.diag([0.1, 0.2])
        s1 = scores_from_model(jac, cov, ridge=1e-10)
        s2 = scores_from_model(jac, 2 * cov, ridge=1e-10)
        assert np.allclose(s2, s1 / 2)

    def test_ridge_floor_marks_uninformative(self):
        jac = np.array([[1.0], [1.0]])
        cov = np.diag([1e-10, 0.5])
        scores = scores_from_model(jac, cov, ridge=1e-10)
        assert scores[0] == 0.0
        assert scores[1] > 0

    def test_compositional_oracle(self):
        scen = make_scenario(n_rx=2, n_tx=4)
        cfg = CrbConfig(n_mc=400, seed=5)
        x = PositionParams((0.0,), ("aod",))
        scores = element_scores(x, scen, cfg)
        model = estimate_moments(x, scen, cfg)
        jac = bfi_jacobian(x, scen, cfg)
        expected = np.sum(jac ** 2, axis=1) / np.diag(model.covariance)
        alive = np.diag(model.covariance) > cfg.ridge * (1 + 1e-9)
        assert np.allclose(scores[alive], expected[alive])
        assert np.all(scores[~alive] == 0)


class TestNlCrb:
    def test_values(self):
        assert nl_crb(1.0) == pytest.approx(0.0)
        assert nl_crb(0.01) == pytest.approx(2.0)

    def test_infinite_sentinel(self):
        assert nl_crb(np.inf) == -np.inf

    def test_nonpositive_rejected(self):
        with pytest.raises(InvalidInputError):
            nl_crb(0.0)
        with pytest.raises(InvalidInputError):
            nl_crb(-1.0)


class TestCrbMap:
    def test_rows_and_columns(self):
        scen = make_scenario(n_rx=2, n_tx=4)
        cfg = CrbConfig(n_mc=200, seed=3)
        positions = [PositionParams((a,), ("aod",)) for a in np.linspace(-0.5, 0.5, 5)]
        result = crb_map(positions, scen, cfg)
        header, rows = crb_map_rows(result)
        assert len(rows) == 5
        n_bfi = bfi_element_count(2, 4)
        assert header == (["aod", "crb_aod", "nl_crb_aod"]
                          + [f"chi_{j}" for j in range(1, n_bfi + 1)])
        assert result["crb"].shape == (5, 1)

    def test_snr_monotonicity(self):
        # the approximated bound decreases as the channel gets cleaner
        x = PositionParams(0.0, "aod")
        cfg = CrbConfig(n_mc=2000, seed=2)
        bounds = []
        for snr in [10, 15, 20, 25, 30]:
            scen = make_scenario(snr_db=snr, aoa_mode=0.0)
            res = position_analysis(x, scen, cfg)
            bounds.append(res["crb"][0])
        assert all(b1 > b2 for b1, b2 in zip(bounds, bounds[1:]))
