import math

import numpy as np
import pytest

from bfisense import (ArrayGeometry, InvalidInputError, NoiseSpec, PathScenario,
                      SubcarrierGrid, SPEED_OF_LIGHT, csi_mean, csi_record, csi_sample,
                      csi_sample_batch, fold_visible, half_wavelength_geometry, los_path,
                      noise_var_for_snr, parse_csi_record, scatter_cluster,
                      static_path_cluster)
from bfisense.crb import PositionParams


GEOM = half_wavelength_geometry(2, 2)
GRID = SubcarrierGrid()


class TestTypes:
    def test_geometry_validation(self):
        with pytest.raises(InvalidInputError):
            ArrayGeometry(n_rx=0, n_tx=2, rx_spacing=0.01, tx_spacing=0.01)
        with pytest.raises(InvalidInputError):
            ArrayGeometry(n_rx=1, n_tx=1, rx_spacing=0.01, tx_spacing=0.01)
        with pytest.raises(InvalidInputError):
            ArrayGeometry(n_rx=1, n_tx=2, rx_spacing=0.0, tx_spacing=0.01)

    def test_half_wavelength_default(self):
        g = half_wavelength_geometry(2, 4)
        assert g.rx_spacing == pytest.approx(SPEED_OF_LIGHT / 5.825e9 / 2)

    def test_grid_single_subcarrier_is_center(self):
        assert GRID.frequency(1) == pytest.approx(5.825e9)
        assert GRID.center_index == 1

    def test_grid_symmetric(self):
        g = SubcarrierGrid(n_subcarriers=5)
        freqs = [g.frequency(k) for k in range(1, 6)]
        assert freqs[2] == pytest.approx(g.center_frequency)
        offsets = np.array(freqs) - g.center_frequency
        assert np.allclose(offsets, -offsets[::-1])

    def test_grid_index_error(self):
        with pytest.raises(IndexError):
            GRID.frequency(2)
        with pytest.raises(IndexError):
            GRID.frequency(0)

    def test_noise_spec_rejects_negative(self):
        with pytest.raises(InvalidInputError):
            NoiseSpec(variance=-1.0)


class TestLosPath:
    def test_basic_constructor(self):
        p = los_path(0.0, 0.0, 5.0, 1.0)
        assert (p.gain, p.distance, p.aoa, p.aod) == (1.0 + 0.0j, 5.0, 0.0, 0.0)

    def test_fields_copied_verbatim(self):
        p = los_path(math.pi / 6, -math.pi / 6, 7.5, 0.5)
        assert p.aod == pytest.approx(math.pi / 6)
        assert p.aoa == pytest.approx(-math.pi / 6)
        assert p.distance == 7.5
        assert p.gain == 0.5 + 0j

    def test_zero_distance_rejected(self):
        with pytest.raises(InvalidInputError):
            los_path(0.0, 0.0, 0.0)


class TestCsiMean:
    def test_single_entry_is_delay_phase(self):
        geom = ArrayGeometry(n_rx=1, n_tx=2, rx_spacing=0.01, tx_spacing=0.01)
        d = 6.0
        h = csi_mean([los_path(0.0, 0.0, d, 0.7)], geom, GRID, 1)
        f1 = GRID.frequency(1)
        assert h[0, 0] == pytest.approx(0.7 * np.exp(-2j * np.pi * d * f1 / SPEED_OF_LIGHT))

    def test_integer_delay_gives_all_ones(self):
        f1 = GRID.frequency(1)
        d = 1000 * SPEED_OF_LIGHT / f1
        h = csi_mean([los_path(0.0, 0.0, d, 1.0)], GEOM, GRID, 1)
        assert np.allclose(h, np.ones((2, 2)), atol=1e-6)

    def test_empty_paths_zero_matrix(self):
        assert np.array_equal(csi_mean([], GEOM, GRID, 1), np.zeros((2, 2)))

    def test_linear_in_gain(self):
        p = los_path(0.2, -0.1, 6.0, 1.0)
        p3 = los_path(0.2, -0.1, 6.0, 3.0)
        assert np.allclose(csi_mean([p3], GEOM, GRID, 1), 3 * csi_mean([p], GEOM, GRID, 1))

    def test_adjacent_rx_phase_difference(self):
        geom = half_wavelength_geometry(3, 2)
        lam = GRID.wavelength(1)
        for aoa in np.linspace(-1.2, 1.2, 7):
            h = csi_mean([los_path(0.0, aoa, 5.0, 1.0)], geom, GRID, 1)
            expected = -2 * np.pi * np.sin(aoa) * geom.rx_spacing / lam
            measured = np.angle(h[1, 0] / h[0, 0])
            assert (measured - expected) % (2 * np.pi) == pytest.approx(0.0, abs=1e-9) \
                or (measured - expected) % (2 * np.pi) == pytest.approx(2 * np.pi, abs=1e-9)


class TestCsiSample:
    def test_zero_variance_exact(self):
        mean = csi_mean([los_path(0.1, 0.1, 5.0, 1.0)], GEOM, GRID, 1)
        assert np.array_equal(csi_sample(mean, NoiseSpec(0.0, seed=1)), mean)

    def test_empirical_variance(self):
        mean = np.zeros((1, 1), dtype=complex)
        draws = csi_sample_batch(mean, 0.01, 100_000, seed=3)
        var = np.var(draws.real) + np.var(draws.imag)
        assert 0.009 <= var <= 0.011

    def test_same_seed_identical(self):
        mean = np.ones((2, 2), dtype=complex)
        a = csi_sample(mean, NoiseSpec(0.5, seed=9))
        b = csi_sample(mean, NoiseSpec(0.5, seed=9))
        assert np.array_equal(a, b)

    def test_negative_variance_rejected(self):
        with pytest.raises(InvalidInputError):
            csi_sample_batch(np.ones((1, 1)), -0.1, 10, seed=0)

    def test_sample_mean_converges(self):
        mean = csi_mean([los_path(0.3, -0.2, 6.0, 1.0)], GEOM, GRID, 1)
        draws = csi_sample_batch(mean, 0.04, 20_000, seed=11)
        se = np.sqrt(0.04 / 2 / 20_000)
        avg = draws.mean(axis=0)
        assert np.max(np.abs(avg.real - mean.real)) < 5 * se
        assert np.max(np.abs(avg.imag - mean.imag)) < 5 * se


class TestNoiseVarForSnr:
    def test_zero_db_unit_power(self):
        assert noise_var_for_snr(np.ones((2, 2)), 0.0) == pytest.approx(1.0)

    def test_twenty_db(self):
        assert noise_var_for_snr(np.ones((2, 2)), 20.0) == pytest.approx(0.01)

    def test_zero_matrix_rejected(self):
        with pytest.raises(InvalidInputError):
            noise_var_for_snr(np.zeros((2, 2)), 20.0)


class TestFoldVisible:
    @pytest.mark.parametrize("angle", [0.0, 0.4, -1.5, 1.7, -2.5, 3.3, 6.8])
    def test_sine_preserved_and_in_range(self, angle):
        folded = fold_visible(angle)
        assert -math.pi / 2 <= folded <= math.pi / 2
        assert math.sin(folded) == pytest.approx(math.sin(angle), abs=1e-12)


class TestPathScenario:
    def test_resolve_defaults(self):
        scen = PathScenario(geometry=GEOM)
        assert scen.resolve() == (0.0, 0.0, 5.0)

    def test_resolve_tied_aoa(self):
        scen = PathScenario(geometry=GEOM)
        aod, aoa, dist = scen.resolve(PositionParams((0.4,), ("aod",)))
        assert aoa == pytest.approx(0.4)

    def test_resolve_fixed_aoa(self):
        scen = PathScenario(geometry=GEOM, aoa_mode=0.1)
        _, aoa, _ = scen.resolve(PositionParams((0.4,), ("aod",)))
        assert aoa == pytest.approx(0.1)

    def test_resolve_xy(self):
        scen = PathScenario(geometry=GEOM)
        aod, aoa, dist = scen.resolve(PositionParams((3.0, 4.0), ("x", "y")))
        assert dist == pytest.approx(5.0)
        assert aod == pytest.approx(math.atan2(4.0, 3.0))
        assert aoa == pytest.approx(aod)

    def test_scatter_paths_vary_with_position(self):
        scen = PathScenario(geometry=GEOM, cluster=scatter_cluster(seed=1, n_paths=2))
        p1 = scen.paths_at(PositionParams((6.0, 0.0), ("x", "y")))
        p2 = scen.paths_at(PositionParams((8.0, 1.0), ("x", "y")))
        assert p1[1].distance != p2[1].distance
        assert p1[1].aod == p2[1].aod  # departure bearing is fixed by the scatterer

    def test_static_paths_do_not_move(self):
        scen = PathScenario(geometry=GEOM, static_paths=static_path_cluster(seed=1, n_paths=2))
        p1 = scen.paths_at(PositionParams((0.2,), ("aod",)))
        p2 = scen.paths_at(PositionParams((-0.3,), ("aod",)))
        assert p1[1] == p2[1]
        assert p1[0].aod != p2[0].aod

    def test_noise_variance_tracks_snr(self):
        scen = PathScenario(geometry=GEOM, snr_db=20.0)
        mean = scen.mean_csi()
        assert scen.noise_variance() == pytest.approx(noise_var_for_snr(mean, 20.0))
        assert PathScenario(geometry=GEOM).noise_variance() == 0.0

    def test_sample_batch_seeded(self):
        scen = PathScenario(geometry=GEOM, snr_db=10.0)
        a = scen.sample_csi(n=4, seed=5)
        b = scen.sample_csi(n=4, seed=5)
        assert np.array_equal(a, b)


class TestCsiRecordJson:
    def test_round_trip(self):
        scen = PathScenario(geometry=GEOM, cluster=scatter_cluster(seed=2, n_paths=2))
        h = scen.mean_csi()
        record = csi_record(h, GEOM, GRID, 1)
        h2, geom2, grid2, k2 = parse_csi_record(record)
        assert np.allclose(h2, h)
        assert geom2 == GEOM
        assert grid2 == GRID
        assert k2 == 1

    def test_malformed_rejected(self):
        with pytest.raises(InvalidInputError):
            parse_csi_record({"geometry": {}})
