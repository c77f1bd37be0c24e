"""Gaussian-surrogate Cramer-Rao machinery for feedback-based sensing.

The conditional density of the angle vector given a position is approximated
by a multivariate Gaussian around the noiseless-channel angles.  Deviations
are always taken through the shortest periodic difference (phi lives on a
2pi circle, psi on a pi/2 circle), which keeps covariance and derivatives
free of wrap jumps.  Fisher information for position parameters follows from
the finite-difference Jacobian of the noiseless angle map and the Monte
Carlo covariance.
"""

import math
from dataclasses import dataclass, replace

import numpy as np

from .bfi import Bfi, bfi_element_count, csi_to_bfi, csi_to_bfi_batch, phi_mask
from .channel import csi_sample_batch, derive_seed
from .errors import DegeneratePositionError, InvalidInputError

PARAM_NAMES = ("aod", "aoa", "distance", "x", "y")
ANGLE_PARAMS = frozenset({"aod", "aoa"})


@dataclass(frozen=True)
class PositionParams:
    """Named position parameter vector: any subset of aod, aoa, distance, x, y.

    Angles are radians, distances and coordinates meters.
    """

    values: tuple
    names: tuple

    def __init__(self, values, names):
        values = tuple(float(v) for v in np.atleast_1d(np.asarray(values, dtype=float)))
        names = (names,) if isinstance(names, str) else tuple(names)
        if len(values) != len(names) or not names:
            raise InvalidInputError("values and names must be equal-length and nonempty")
        for name in names:
            if name not in PARAM_NAMES:
                raise InvalidInputError(f"unknown parameter name {name!r}; use one of {PARAM_NAMES}")
        if len(set(names)) != len(names):
            raise InvalidInputError("parameter names must be unique")
        if not all(math.isfinite(v) for v in values):
            raise InvalidInputError("parameter values must be finite")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "names", names)

    @property
    def dim(self) -> int:
        return len(self.names)

    def shifted(self, index: int, delta: float) -> "PositionParams":
        vals = list(self.values)
        vals[index] += delta
        return PositionParams(vals, self.names)


@dataclass(frozen=True)
class CrbConfig:
    """Numerical knobs: Monte Carlo size, finite-difference steps, ridge, seed.

    The default steps keep the phase rotation per step well below a radian at
    centimeter wavelengths (step-halving ratios stay within 1e-2), which is
    what the angle map needs for accurate central differences.
    """

    n_mc: int = 1000
    fd_step_angle: float = 1e-4
    fd_step_distance: float = 1e-3
    ridge: float = 1e-10
    seed: int = 0

    def __post_init__(self):
        if self.n_mc < 2:
            raise InvalidInputError("n_mc must be >= 2")
        if not (self.fd_step_angle > 0 and self.fd_step_distance > 0 and self.ridge > 0):
            raise InvalidInputError("steps and ridge must be positive")

    def step_for(self, name: str) -> float:
        return self.fd_step_angle if name in ANGLE_PARAMS else self.fd_step_distance


@dataclass(eq=False)
class GaussianModel:
    """Angle mean (from the noiseless channel) and Monte Carlo covariance."""

    mean: Bfi
    covariance: np.ndarray
    n_samples: int

    def __post_init__(self):
        c = np.asarray(self.covariance, dtype=np.float64)
        k = self.mean.values.shape[0]
        if c.shape != (k, k):
            raise InvalidInputError(f"covariance must be {k}x{k}, got {c.shape}")
        scale = max(float(np.max(np.abs(c))), 1.0)
        if np.max(np.abs(c - c.T)) > 1e-12 * scale:
            raise InvalidInputError("covariance must be symmetric")
        eigvals = np.linalg.eigvalsh(c)
        if eigvals[0] < -1e-12 * scale:
            raise InvalidInputError("covariance must be positive semidefinite after the ridge")
        self.covariance = c


def wrap_angle_diffs(delta: np.ndarray, is_phi: np.ndarray) -> np.ndarray:
    """Shortest signed representative of angle differences.

    phi entries wrap on a 2pi period into [-pi, pi); psi entries wrap on a
    pi/2 period into [-pi/4, pi/4).
    """
    delta = np.asarray(delta, dtype=np.float64)
    out = np.empty_like(delta)
    period_phi, period_psi = 2.0 * np.pi, np.pi / 2.0
    out[..., is_phi] = np.mod(delta[..., is_phi] + period_phi / 2, period_phi) - period_phi / 2
    out[..., ~is_phi] = np.mod(delta[..., ~is_phi] + period_psi / 2, period_psi) - period_psi / 2
    return out


def periodic_diff(theta: Bfi, theta_bar: Bfi) -> np.ndarray:
    """Element-wise shortest difference between two angle vectors."""
    if (theta.m_tx, theta.n_rx) != (theta_bar.m_tx, theta_bar.n_rx):
        raise InvalidInputError(
            f"label mismatch: ({theta.n_rx}x{theta.m_tx}) vs ({theta_bar.n_rx}x{theta_bar.m_tx})")
    return wrap_angle_diffs(theta.values - theta_bar.values, theta.phi_mask)


def _mean_bfi(x, scenario, k, context: str) -> Bfi:
    h_bar = scenario.mean_csi(x, k)
    if not np.any(h_bar):
        raise DegeneratePositionError(f"zero channel mean {context}")
    theta_bar = csi_to_bfi(h_bar)
    if theta_bar.degenerate:
        raise DegeneratePositionError(f"steering matrix not uniquely determined {context}")
    return theta_bar


def estimate_moments(x, scenario, cfg: CrbConfig, k: int | None = None) -> GaussianModel:
    """Gaussian surrogate at position ``x``: noiseless-channel mean, sampled covariance.

    The mean comes from the noiseless channel rather than a sample average,
    so no circular averaging of wrapped angles is needed.  Covariance uses
    the periodic deviations around that mean, divided by n_mc - 1, plus a
    ridge on the diagonal.
    """
    theta_bar = _mean_bfi(x, scenario, k, f"at position {_fmt_pos(x)}")
    n_bfi = theta_bar.values.shape[0]
    variance = scenario.noise_variance(x, k)
    if variance == 0.0:
        cov = cfg.ridge * np.eye(n_bfi)
        return GaussianModel(mean=theta_bar, covariance=cov, n_samples=cfg.n_mc)
    h_bar = scenario.mean_csi(x, k)
    draws = csi_sample_batch(h_bar, variance, cfg.n_mc, cfg.seed)
    values, _ = csi_to_bfi_batch(draws)
    devs = wrap_angle_diffs(values - theta_bar.values[np.newaxis, :], theta_bar.phi_mask)
    cov = devs.T @ devs / (cfg.n_mc - 1)
    cov += cfg.ridge * np.eye(n_bfi)
    cov = (cov + cov.T) / 2.0
    return GaussianModel(mean=theta_bar, covariance=cov, n_samples=cfg.n_mc)


def bfi_jacobian(x: PositionParams, scenario, cfg: CrbConfig, k: int | None = None) -> np.ndarray:
    """Central-difference Jacobian of the noiseless angle map, shape (N_BFI, D).

    Per-entry differences go through the periodic wrap so derivatives stay
    finite across the 0/2pi seam.  Step sizes follow the parameter unit.
    """
    if not isinstance(x, PositionParams):
        raise InvalidInputError("bfi_jacobian expects PositionParams")
    n_bfi = bfi_element_count(scenario.geometry.n_rx, scenario.geometry.n_tx)
    jac = np.empty((n_bfi, x.dim))
    mask = phi_mask(scenario.geometry.n_rx, scenario.geometry.n_tx)
    for i, name in enumerate(x.names):
        h = cfg.step_for(name)
        try:
            theta_plus = _mean_bfi(x.shifted(i, +h), scenario, k, f"while stepping {name!r}")
            theta_minus = _mean_bfi(x.shifted(i, -h), scenario, k, f"while stepping {name!r}")
        except DegeneratePositionError as exc:
            raise DegeneratePositionError(f"{exc} (coordinate {name!r} at {_fmt_pos(x)})") from exc
        jac[:, i] = wrap_angle_diffs(theta_plus.values - theta_minus.values, mask) / (2.0 * h)
    return jac


def fisher_crb(jac: np.ndarray, cov: np.ndarray) -> tuple:
    """(fim, crb_diag) from a Jacobian and an angle covariance.

    fim[i, j] = col_i(J)^T C^-1 col_j(J).  The bound is the diagonal of the
    inverted Fisher matrix; a singular Fisher matrix yields +inf entries.
    """
    jac = np.asarray(jac, dtype=np.float64)
    cov = np.asarray(cov, dtype=np.float64)
    if jac.ndim != 2 or cov.shape != (jac.shape[0], jac.shape[0]):
        raise InvalidInputError(f"shape mismatch: J {jac.shape} vs C {cov.shape}")
    scale = max(float(np.max(np.abs(cov))), 1e-300)
    if np.max(np.abs(cov - cov.T)) > 1e-10 * scale:
        raise InvalidInputError("covariance must be symmetric")
    try:
        solved = np.linalg.solve(cov, jac)
    except np.linalg.LinAlgError as exc:
        raise InvalidInputError("covariance is singular; add a ridge before inverting") from exc
    fim = jac.T @ solved
    fim = (fim + fim.T) / 2.0
    d = fim.shape[0]
    sv = np.linalg.svd(fim, compute_uv=False) if d else np.array([0.0])
    if sv.size == 0 or sv[0] <= 0.0 or sv[-1] <= 1e-13 * sv[0]:
        return fim, np.full(d, np.inf)
    crb_diag = np.diag(np.linalg.inv(fim)).copy()
    return fim, crb_diag


def scores_from_model(jac: np.ndarray, cov: np.ndarray, ridge: float) -> np.ndarray:
    """Per-element informativeness: squared Jacobian row norm over element variance.

    Elements whose variance sits at the ridge floor carry no usable noise
    model and score 0.
    """
    row_power = np.sum(np.asarray(jac, dtype=float) ** 2, axis=1)
    variances = np.diag(np.asarray(cov, dtype=float))
    floor = ridge * (1.0 + 1e-9)
    scores = np.zeros_like(row_power)
    alive = variances > floor
    scores[alive] = row_power[alive] / variances[alive]
    return scores


def element_scores(x: PositionParams, scenario, cfg: CrbConfig, k: int | None = None) -> np.ndarray:
    """Informativeness score per feedback element at one position.

    Higher means more informative (Fisher-information reading).  Selection
    code flips the comparison when running in literal minimum mode.
    """
    model = estimate_moments(x, scenario, cfg, k)
    jac = bfi_jacobian(x, scenario, cfg, k)
    return scores_from_model(jac, model.covariance, cfg.ridge)


def nl_crb(crb):
    """Negative decimal log of a bound; +inf maps to -inf."""
    arr = np.asarray(crb, dtype=np.float64)
    if np.any(np.isnan(arr)) or np.any(arr <= 0):
        raise InvalidInputError("nl_crb needs positive bounds (or +inf sentinels)")
    with np.errstate(divide="ignore"):
        out = -np.log10(arr)
    return float(out) if np.isscalar(crb) or arr.ndim == 0 else out


def position_analysis(x: PositionParams, scenario, cfg: CrbConfig, k: int | None = None) -> dict:
    """Moments, Jacobian, Fisher matrix, bounds and scores at one position."""
    model = estimate_moments(x, scenario, cfg, k)
    jac = bfi_jacobian(x, scenario, cfg, k)
    fim, crb_diag = fisher_crb(jac, model.covariance)
    return {
        "model": model,
        "jacobian": jac,
        "fim": fim,
        "crb": crb_diag,
        "nl_crb": nl_crb(np.where(np.isinf(crb_diag), np.inf, crb_diag)),
        "scores": scores_from_model(jac, model.covariance, cfg.ridge),
    }


def crb_map(positions, scenario, cfg: CrbConfig, k: int | None = None) -> dict:
    """Per-position bounds and element scores over a list of positions.

    Every position gets its own derived seed (base seed XOR position index),
    so results do not depend on evaluation order or worker count.
    """
    positions = list(positions)
    if not positions:
        raise InvalidInputError("crb_map needs at least one position")
    names = positions[0].names
    n_bfi = bfi_element_count(scenario.geometry.n_rx, scenario.geometry.n_tx)
    rows_x = np.empty((len(positions), len(names)))
    rows_crb = np.empty((len(positions), len(names)))
    rows_nl = np.empty((len(positions), len(names)))
    rows_chi = np.empty((len(positions), n_bfi))
    for r, x in enumerate(positions):
        if x.names != names:
            raise InvalidInputError("all positions must share the same parameter names")
        local = replace(cfg, seed=derive_seed(cfg.seed, r))
        res = position_analysis(x, scenario, local, k)
        rows_x[r] = x.values
        rows_crb[r] = res["crb"]
        rows_nl[r] = res["nl_crb"]
        rows_chi[r] = res["scores"]
    return {"names": names, "x": rows_x, "crb": rows_crb, "nl_crb": rows_nl, "chi": rows_chi}


def crb_map_rows(result: dict):
    """Header and rows for the CSV dump of a capability map."""
    names = result["names"]
    n_bfi = result["chi"].shape[1]
    header = list(names)
    header += [f"crb_{n}" for n in names]
    header += [f"nl_crb_{n}" for n in names]
    header += [f"chi_{j}" for j in range(1, n_bfi + 1)]
    rows = []
    for r in range(result["x"].shape[0]):
        rows.append(list(result["x"][r]) + list(result["crb"][r])
                    + list(result["nl_crb"][r]) + list(result["chi"][r]))
    return header, rows


def _fmt_pos(x) -> str:
    if isinstance(x, PositionParams):
        return "(" + ", ".join(f"{n}={v:.6g}" for n, v in zip(x.names, x.values)) + ")"
    return repr(x)
