"""Validation harness: Gaussianity testing, subspace direction finding against
the bound, dataset generation and neural-network positioning.
"""

import csv
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import ndtr

from . import mlp
from .bfi import Bfi, bfi_element_count, csi_to_bfi_batch, givens_reconstruct, \
    givens_reconstruct_batch
from .channel import SPEED_OF_LIGHT, derive_seed
from .crb import CrbConfig, PositionParams, fisher_crb, bfi_jacobian, estimate_moments
from .errors import InvalidInputError
from .mlp import MlpSpec


# ---------------------------------------------------------------------------
# Kolmogorov-Smirnov Gaussianity test

def ks_gaussian_pvalue(samples, mean: float | None = None, std: float | None = None) -> tuple:
    """One-sample KS statistic and asymptotic p-value against a normal law.

    By default the normal parameters are fitted from the sample (mean and
    ddof-1 standard deviation), which makes the asymptotic p-value
    conservative; pass ``mean``/``std`` to test against a fully specified
    normal instead.

    Returns:
        (statistic, p) with p from the alternating Kolmogorov series
        2 * sum_k (-1)^(k-1) exp(-2 k^2 n D^2), truncated below 1e-10.
    """
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim != 1 or x.size < 30:
        raise InvalidInputError(f"need a flat sample of at least 30 values, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise InvalidInputError("samples must be finite")
    mu = float(np.mean(x)) if mean is None else float(mean)
    sigma = float(np.std(x, ddof=1)) if std is None else float(std)
    if sigma <= 0:
        raise InvalidInputError("sample variance must be positive")
    n = x.size
    cdf = ndtr((np.sort(x) - mu) / sigma)
    i = np.arange(1, n + 1)
    stat = float(max(np.max(i / n - cdf), np.max(cdf - (i - 1) / n)))
    t = n * stat * stat
    total = 0.0
    for k in range(1, 1000):
        term = math.exp(-2.0 * k * k * t)
        total += -term if k % 2 == 0 else term
        if term < 1e-10:
            break
    return stat, float(min(max(2.0 * total, 0.0), 1.0))


# ---------------------------------------------------------------------------
# Direction estimation from reconstructed steering columns

def _tx_search_matrix(grid_values: np.ndarray, m_tx: int, tx_spacing: float,
                      wavelength: float) -> np.ndarray:
    # The steering column equals the conjugate transmit array response, so the
    # search vector carries the opposite phase sign from the channel model.
    m_idx = np.arange(m_tx)
    phase = 2.0 * np.pi / wavelength * np.sin(grid_values)[:, None] * m_idx[None, :] * tx_spacing
    return np.exp(1j * phase)


def music_spectrum(theta: Bfi, grid, geom, wavelength: float | None = None,
                   n_sources: int = 1) -> np.ndarray:
    """Noise-subspace pseudo-spectrum over a departure-angle grid.

    The signal subspace is spanned by the leading ``n_sources`` reconstructed
    steering columns.  ``wavelength`` defaults to twice the transmit spacing
    (half-wavelength arrays).
    """
    grid = np.asarray(grid, dtype=np.float64)
    if grid.size == 0:
        raise InvalidInputError("angle grid must be nonempty")
    lam = 2.0 * geom.tx_spacing if wavelength is None else wavelength
    vt = givens_reconstruct(theta)
    vs = vt[:, :n_sources]
    search = _tx_search_matrix(grid, geom.n_tx, geom.tx_spacing, lam)
    proj = search.conj() @ vs
    residual = geom.n_tx - np.sum(np.abs(proj) ** 2, axis=1)
    return 1.0 / np.maximum(residual, 1e-300)


def music_estimate_aod(theta: Bfi, grid, geom, wavelength: float | None = None,
                       n_sources: int = 1) -> float:
    """Departure angle at the pseudo-spectrum peak (first index on ties)."""
    spectrum = music_spectrum(theta, grid, geom, wavelength, n_sources)
    return float(np.asarray(grid, dtype=np.float64)[int(np.argmax(spectrum))])


def _music_estimate_batch(values: np.ndarray, m_tx: int, n_rx: int, grid: np.ndarray,
                          geom, wavelength: float, n_sources: int) -> np.ndarray:
    vt = givens_reconstruct_batch(values, m_tx, n_rx)
    vs = vt[:, :, :n_sources]
    search = _tx_search_matrix(grid, m_tx, geom.tx_spacing, wavelength)
    proj = np.einsum("gm,bms->bgs", search.conj(), vs)
    residual = m_tx - np.sum(np.abs(proj) ** 2, axis=2)
    return grid[np.argmin(residual, axis=1)]


def mc_estimator_variance(scenario, x, snr_db_list, trials: int, seed: int,
                          grid=None, n_sources: int = 1, cfg: CrbConfig | None = None) -> dict:
    """Monte Carlo variance of the subspace direction estimator per SNR,
    paired with the Gaussian-surrogate bound for plotting.

    Returns a dict with keys ``snr_db``, ``music_variance``, ``crb``.
    """
    if trials < 100:
        raise InvalidInputError(f"need at least 100 trials, got {trials}")
    geom = scenario.geometry
    if grid is None:
        grid = np.deg2rad(np.arange(-90.0, 90.0 + 1e-9, 0.5))
    grid = np.asarray(grid, dtype=np.float64)
    lam = scenario.grid.wavelength(scenario.grid.center_index)
    cfg = cfg or CrbConfig()
    out = {"snr_db": list(snr_db_list), "music_variance": [], "crb": []}
    for idx, snr in enumerate(out["snr_db"]):
        snapshot = scenario.with_snr(snr)
        draws = snapshot.sample_csi(x, n=trials, seed=derive_seed(seed, idx))
        values, _ = csi_to_bfi_batch(draws)
        estimates = _music_estimate_batch(values, geom.n_tx, geom.n_rx, grid, geom,
                                          lam, n_sources)
        out["music_variance"].append(float(np.var(estimates, ddof=1)) if trials > 1 else 0.0)
        model = estimate_moments(x, snapshot, replace(cfg, seed=derive_seed(seed, 10_000 + idx)))
        jac = bfi_jacobian(x, snapshot, cfg)
        _, crb_diag = fisher_crb(jac, model.covariance)
        out["crb"].append(float(crb_diag[0]))
    return out


# ---------------------------------------------------------------------------
# Datasets and the positioning regressor

@dataclass(eq=False)
class Dataset:
    """Feature matrix, 2-D positions and the (subcarrier, element) feature map."""

    features: np.ndarray
    positions: np.ndarray
    feature_map: tuple
    encoding: str = "raw"
    seed: int = 0

    def __post_init__(self):
        if self.features.shape[0] != self.positions.shape[0]:
            raise InvalidInputError("features and positions must have matching sample counts")
        if self.positions.ndim != 2 or self.positions.shape[1] != 2:
            raise InvalidInputError("positions must be (S, 2)")
        width = len(self.feature_map) * (2 if self.encoding == "sincos" else 1)
        if self.features.shape[1] != width:
            raise InvalidInputError(
                f"feature width {self.features.shape[1]} does not match map length {width}")

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    def feature_names(self) -> list:
        base = [f"k{k}_e{j + 1}" for k, j in self.feature_map]
        if self.encoding == "sincos":
            out = []
            for name in base:
                out.extend([f"{name}_sin", f"{name}_cos"])
            return out
        return base


def _all_feature_map(n_bfi: int, n_sc: int) -> list:
    return [(k, j) for k in range(1, n_sc + 1) for j in range(n_bfi)]


def gen_dataset(roi, scenario, selection=None, samples_per_pos: int = 1, seed: int = 0,
                encoding: str = "raw") -> Dataset:
    """Noisy feedback features at every region position, deterministic in ``seed``.

    ``selection`` is a SelectionResult (or None for all elements across all
    subcarriers).  Each (position, subcarrier) pair draws from its own
    derived seed, so datasets regenerate identically regardless of order.
    """
    if encoding not in ("raw", "sincos"):
        raise InvalidInputError(f"encoding must be 'raw' or 'sincos', got {encoding!r}")
    geom = scenario.geometry
    n_bfi = bfi_element_count(geom.n_rx, geom.n_tx)
    n_sc = scenario.grid.n_subcarriers
    if selection is None:
        fmap = _all_feature_map(n_bfi, n_sc)
        columns = {k: list(range(n_bfi)) for k in range(1, n_sc + 1)}
    else:
        if len(selection.per_subcarrier) != n_sc:
            raise InvalidInputError(
                f"selection covers {len(selection.per_subcarrier)} subcarriers, scenario has {n_sc}")
        for b in selection.per_subcarrier:
            if len(b) and (min(b) < 0 or max(b) >= n_bfi):
                raise InvalidInputError("selection indices outside the element range")
        fmap = selection.feature_map()
        columns = {k: sorted(int(j) for j in b)
                   for k, b in enumerate(selection.per_subcarrier, start=1)}
    r_total = len(roi.positions)
    rows_feat = []
    rows_pos = []
    for r, x in enumerate(roi.positions):
        aod, _, dist = scenario.resolve(x)
        pos_xy = (dist * math.cos(aod), dist * math.sin(aod))
        per_k = []
        for k in range(1, n_sc + 1):
            draws = scenario.sample_csi(x, k=k, n=samples_per_pos,
                                        seed=derive_seed(seed, (k - 1) * r_total + r))
            values, _ = csi_to_bfi_batch(draws)
            per_k.append(values[:, columns[k]])
        feats = np.concatenate(per_k, axis=1)
        rows_feat.append(feats)
        rows_pos.append(np.tile(pos_xy, (samples_per_pos, 1)))
    features = np.concatenate(rows_feat, axis=0)
    positions = np.concatenate(rows_pos, axis=0)
    if encoding == "sincos":
        features = np.stack([np.sin(features), np.cos(features)], axis=2).reshape(
            features.shape[0], -1)
    return Dataset(features=features, positions=positions, feature_map=tuple(fmap),
                   encoding=encoding, seed=seed)


def split_dataset(ds: Dataset, train_frac: float = 0.8, seed: int = 0) -> tuple:
    """Split by position (not by sample) so train and test locations are disjoint."""
    if not 0.0 < train_frac < 1.0:
        raise InvalidInputError("train_frac must be in (0, 1)")
    keys = np.unique(ds.positions, axis=0)
    rng = np.random.default_rng(seed)
    order = rng.permutation(keys.shape[0])
    n_train = int(round(train_frac * keys.shape[0]))
    if n_train == 0 or n_train == keys.shape[0]:
        raise InvalidInputError("split leaves one side empty; adjust train_frac")
    train_keys = {tuple(keys[i]) for i in order[:n_train]}
    in_train = np.array([tuple(p) in train_keys for p in ds.positions])
    def subset(mask):
        return Dataset(features=ds.features[mask], positions=ds.positions[mask],
                       feature_map=ds.feature_map, encoding=ds.encoding, seed=ds.seed)
    return subset(in_train), subset(~in_train)


@dataclass(eq=False)
class PositioningResult:
    """Per-sample Euclidean test errors in meters plus summary quantiles."""

    errors: np.ndarray
    quantiles: dict


_QUANTILES = (5, 25, 50, 75, 95)


def train_eval_positioner(train: Dataset, test: Dataset, spec: MlpSpec) -> PositioningResult:
    """Train the three-layer regressor on train features and report test error quantiles.

    Features and targets are standardized with train statistics inside the
    trainer (predictions are mapped back to meters), which keeps the fixed
    learning rate usable across feature encodings.
    """
    if train.feature_map != test.feature_map or train.encoding != test.encoding:
        raise InvalidInputError("train and test datasets use different feature maps")
    train_pos = {tuple(p) for p in train.positions}
    if any(tuple(p) in train_pos for p in test.positions):
        raise InvalidInputError("train and test positions overlap")
    if spec.layer_sizes[0] != train.features.shape[1]:
        raise InvalidInputError(
            f"spec expects {spec.layer_sizes[0]} inputs, dataset has {train.features.shape[1]}")
    x_mu = train.features.mean(axis=0)
    x_sd = np.maximum(train.features.std(axis=0), 1e-9)
    y_mu = train.positions.mean(axis=0)
    y_sd = np.maximum(train.positions.std(axis=0), 1e-9)
    params = mlp.train(spec, (train.features - x_mu) / x_sd, (train.positions - y_mu) / y_sd)
    pred = mlp.forward(params, (test.features - x_mu) / x_sd, spec.activation) * y_sd + y_mu
    errors = np.linalg.norm(pred - test.positions, axis=1)
    quantiles = {f"p{q:02d}": float(np.percentile(errors, q)) for q in _QUANTILES}
    quantiles["mean"] = float(np.mean(errors))
    return PositioningResult(errors=errors, quantiles=quantiles)


def write_errors_csv(path, errors: np.ndarray):
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["error_m"])
        for e in errors:
            writer.writerow([repr(float(e))])


def write_dataset_csv(path, ds: Dataset):
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(ds.feature_names() + ["x", "y"])
        for feats, pos in zip(ds.features, ds.positions):
            writer.writerow([repr(float(v)) for v in feats] + [repr(float(pos[0])), repr(float(pos[1]))])
