"""Multipath MIMO channel simulator for uniform linear arrays.

The per-subcarrier channel matrix is a sum of planar-wavefront path
contributions.  Entry (n, m) for subcarrier frequency f_k is

    sum_l  gain_l * exp(-i 2 pi / lambda_k * (sin(aoa_l) (n-1) d_rx
                                              + sin(aod_l) (m-1) d_tx))
                  * exp(-i 2 pi dist_l f_k / c)

plus, for noisy samples, i.i.d. circularly-symmetric complex Gaussian noise
per entry.  Scenarios bundle array geometry, a subcarrier grid, a
line-of-sight path and an optional multipath cluster, and map position
parameters to the noiseless channel mean.
"""

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InvalidInputError
from .linalg import as_complex_matrix

SPEED_OF_LIGHT = 299_792_458.0
DEFAULT_CENTER_FREQUENCY = 5.825e9
DEFAULT_SUBCARRIER_SPACING = 312.5e3

_HALF_PI = math.pi / 2.0


def derive_seed(base: int, task_index: int) -> int:
    """Per-task seed for data-parallel work: base seed XOR task index."""
    return (int(base) ^ int(task_index)) & 0x7FFF_FFFF_FFFF_FFFF


def fold_visible(angle: float) -> float:
    """Fold an angle into the ULA visible region [-pi/2, pi/2], preserving its sine."""
    a = math.remainder(float(angle), 2.0 * math.pi)
    if a > _HALF_PI:
        a = math.pi - a
    elif a < -_HALF_PI:
        a = -math.pi - a
    return a


@dataclass(frozen=True)
class ArrayGeometry:
    """Uniform linear arrays at both ends of the link.

    Attributes:
        n_rx: receive antennas at the user device (>= 1).
        n_tx: transmit antennas at the access point (>= 2, beamforming needs two).
        rx_spacing: receive element spacing in meters.
        tx_spacing: transmit element spacing in meters.
    """

    n_rx: int
    n_tx: int
    rx_spacing: float
    tx_spacing: float

    def __post_init__(self):
        if self.n_rx < 1:
            raise InvalidInputError(f"n_rx must be >= 1, got {self.n_rx}")
        if self.n_tx < 2:
            raise InvalidInputError(f"n_tx must be >= 2, got {self.n_tx}")
        if not (self.rx_spacing > 0 and self.tx_spacing > 0):
            raise InvalidInputError("antenna spacings must be positive")


def half_wavelength_geometry(n_rx: int, n_tx: int,
                             center_frequency: float = DEFAULT_CENTER_FREQUENCY) -> ArrayGeometry:
    """Half-wavelength ULA spacing at the given center frequency (the default setup)."""
    spacing = SPEED_OF_LIGHT / center_frequency / 2.0
    return ArrayGeometry(n_rx=n_rx, n_tx=n_tx, rx_spacing=spacing, tx_spacing=spacing)


@dataclass(frozen=True)
class Path:
    """One propagation path: complex gain, length in meters, arrival/departure angles."""

    gain: complex
    distance: float
    aoa: float
    aod: float

    def __post_init__(self):
        if not self.distance > 0:
            raise InvalidInputError(f"path distance must be positive, got {self.distance}")
        if not (-_HALF_PI <= self.aoa <= _HALF_PI):
            raise InvalidInputError(f"aoa {self.aoa} outside the linear-array region [-pi/2, pi/2]")
        if not (-_HALF_PI <= self.aod <= _HALF_PI):
            raise InvalidInputError(f"aod {self.aod} outside the linear-array region [-pi/2, pi/2]")
        if not (np.isfinite(self.distance) and np.isfinite(complex(self.gain))):
            raise InvalidInputError("path parameters must be finite")


def los_path(aod: float, aoa: float, distance: float, gain: complex = 1.0 + 0.0j) -> Path:
    """Single line-of-sight path builder."""
    return Path(gain=complex(gain), distance=float(distance), aoa=float(aoa), aod=float(aod))


@dataclass(frozen=True)
class SubcarrierGrid:
    """OFDM subcarrier frequencies, symmetric around the center frequency.

    For a single subcarrier the grid collapses to the center frequency, which
    is the default operating point of the toolkit.
    """

    center_frequency: float = DEFAULT_CENTER_FREQUENCY
    spacing: float = DEFAULT_SUBCARRIER_SPACING
    n_subcarriers: int = 1

    def __post_init__(self):
        if self.n_subcarriers < 1:
            raise InvalidInputError(f"n_subcarriers must be >= 1, got {self.n_subcarriers}")
        if self.frequency(1) <= 0 or self.frequency(self.n_subcarriers) <= 0:
            raise InvalidInputError("all subcarrier frequencies must be positive")

    @property
    def center_index(self) -> int:
        return (self.n_subcarriers + 1) // 2

    def frequency(self, k: int) -> float:
        """Frequency of subcarrier k (1-based)."""
        if not 1 <= k <= self.n_subcarriers:
            raise IndexError(f"subcarrier index {k} outside 1..{self.n_subcarriers}")
        offset = (k - (self.n_subcarriers + 1) / 2.0) * self.spacing
        return self.center_frequency + offset

    def wavelength(self, k: int) -> float:
        return SPEED_OF_LIGHT / self.frequency(k)


@dataclass(frozen=True)
class NoiseSpec:
    """Additive complex Gaussian noise: per-entry variance and a seed."""

    variance: float
    seed: int = 0

    def __post_init__(self):
        if self.variance < 0:
            raise InvalidInputError(f"noise variance must be >= 0, got {self.variance}")


def csi_mean(paths, geom: ArrayGeometry, grid: SubcarrierGrid, k: int) -> np.ndarray:
    """Noiseless channel matrix at subcarrier k from a list of paths.

    An empty path list gives the zero matrix.
    """
    f_k = grid.frequency(k)
    lam = SPEED_OF_LIGHT / f_k
    n_idx = np.arange(geom.n_rx)
    m_idx = np.arange(geom.n_tx)
    h = np.zeros((geom.n_rx, geom.n_tx), dtype=np.complex128)
    for p in paths:
        rx_phase = -2.0 * np.pi / lam * np.sin(p.aoa) * n_idx * geom.rx_spacing
        tx_phase = -2.0 * np.pi / lam * np.sin(p.aod) * m_idx * geom.tx_spacing
        delay_phase = -2.0 * np.pi * p.distance * f_k / SPEED_OF_LIGHT
        h += p.gain * np.exp(1j * (rx_phase[:, None] + tx_phase[None, :] + delay_phase))
    return h


def csi_sample(mean: np.ndarray, noise: NoiseSpec) -> np.ndarray:
    """One noisy channel draw: mean plus per-entry CN(0, variance), seeded."""
    mean = as_complex_matrix(mean, "csi mean")
    if noise.variance == 0.0:
        return mean.copy()
    rng = np.random.default_rng(noise.seed)
    return mean + _complex_noise(rng, mean.shape, noise.variance)


def csi_sample_batch(mean: np.ndarray, variance: float, n: int, seed: int) -> np.ndarray:
    """Stack of ``n`` independent noisy draws around ``mean``, shape (n, N, M)."""
    mean = as_complex_matrix(mean, "csi mean")
    if variance < 0:
        raise InvalidInputError(f"noise variance must be >= 0, got {variance}")
    out = np.broadcast_to(mean, (n,) + mean.shape).copy()
    if variance > 0.0:
        rng = np.random.default_rng(seed)
        out += _complex_noise(rng, (n,) + mean.shape, variance)
    return out


def _complex_noise(rng, shape, variance):
    scale = np.sqrt(variance / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def noise_var_for_snr(mean: np.ndarray, snr_db: float) -> float:
    """Noise variance that puts the mean-entry-power SNR at ``snr_db`` decibels."""
    mean = as_complex_matrix(mean, "csi mean")
    power = float(np.sum(np.abs(mean) ** 2)) / mean.size
    if power == 0.0:
        raise InvalidInputError("SNR is undefined for an all-zero mean matrix")
    if math.isinf(snr_db) and snr_db > 0:
        return 0.0
    return power / (10.0 ** (snr_db / 10.0))


@dataclass(frozen=True)
class Scatterer:
    """A static single-bounce reflector at a fixed 2-D location with a fixed gain.

    The access point sits at the origin; the scatter path to a user at ``u``
    has length |s| + |u - s|, departs toward the scatterer and arrives from
    it, so its geometry genuinely varies with the user position.
    """

    position: tuple
    gain: complex

    def __post_init__(self):
        sx, sy = self.position
        if math.hypot(sx, sy) <= 0:
            raise InvalidInputError("scatterer cannot sit on the access point")


def scatter_cluster(seed: int, n_paths: int = 4, radius_range=(1.5, 4.0),
                    angle_range: float = math.pi / 3, gain_range=(0.15, 0.35)) -> tuple:
    """Uniform-random static scatterers, deterministic in ``seed``.

    Scatterer bearings are uniform in [-angle_range, angle_range], radii and
    gain magnitudes uniform in their ranges, gain phases uniform on the
    circle.  The default radii sit inside the hole of the 5-10 m region of
    interest so scatter paths never collapse onto a user position.
    """
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n_paths):
        bearing = rng.uniform(-angle_range, angle_range)
        radius = rng.uniform(*radius_range)
        mag = rng.uniform(*gain_range)
        phase = rng.uniform(0.0, 2.0 * math.pi)
        out.append(Scatterer(position=(radius * math.cos(bearing), radius * math.sin(bearing)),
                             gain=mag * np.exp(1j * phase)))
    return tuple(out)


def static_path_cluster(seed: int, n_paths: int = 4, distance_range=(5.5, 8.0),
                        angle_range: float = math.pi / 3, gain_range=(0.15, 0.35)) -> tuple:
    """Uniform-random background paths that do not move with the user.

    Unlike :func:`scatter_cluster` these are frozen Path objects: their
    angles and lengths stay put while only the line-of-sight path follows
    the sensed parameters, which isolates array-geometry information.
    """
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n_paths):
        aoa = rng.uniform(-angle_range, angle_range)
        aod = rng.uniform(-angle_range, angle_range)
        dist = rng.uniform(*distance_range)
        mag = rng.uniform(*gain_range)
        phase = rng.uniform(0.0, 2.0 * math.pi)
        out.append(Path(gain=mag * np.exp(1j * phase), distance=dist, aoa=aoa, aod=aod))
    return tuple(out)


@dataclass(frozen=True)
class PathScenario:
    """A line-of-sight link plus an optional static cluster, with SNR control.

    Maps position parameters to a noiseless channel mean.  Position parameters
    are duck-typed: anything with ``names`` and ``values`` works.  Recognized
    names are ``aod``, ``aoa``, ``distance`` (polar parameters) and ``x``,
    ``y`` (2-D coordinates with the access point at the origin and the array
    broadside along +x).  Unspecified parameters fall back to the scenario
    defaults.

    ``aoa_mode`` decides the arrival angle when none is given explicitly:
    "tied" mirrors the departure angle (parallel facing arrays), "zero" holds
    broadside, a float pins a fixed angle.
    """

    geometry: ArrayGeometry
    grid: SubcarrierGrid = field(default_factory=SubcarrierGrid)
    los_gain: complex = 1.0 + 0.0j
    cluster: tuple = ()
    static_paths: tuple = ()
    snr_db: float = math.inf
    aoa_mode: object = "tied"
    default_aod: float = 0.0
    default_distance: float = 5.0

    def __post_init__(self):
        if isinstance(self.aoa_mode, str) and self.aoa_mode not in ("tied", "zero"):
            raise InvalidInputError(f"aoa_mode must be 'tied', 'zero' or a float, got {self.aoa_mode!r}")

    def resolve(self, x=None):
        """(aod, aoa, distance) for position parameters ``x`` (or the defaults).

        Angles are folded into the linear-array visible region [-pi/2, pi/2]
        by the sine-preserving reflection a -> pi - a, which is exactly the
        front/back ambiguity of a ULA; this keeps the channel mean smooth in
        the underlying position even at the region boundary.
        """
        named = {}
        if x is not None:
            named = dict(zip(x.names, np.asarray(x.values, dtype=float)))
        if "x" in named or "y" in named:
            if not ("x" in named and "y" in named):
                raise InvalidInputError("2-D positions need both 'x' and 'y'")
            px, py = named["x"], named["y"]
            dist = math.hypot(px, py)
            if dist <= 0:
                raise InvalidInputError("2-D position coincides with the access point")
            aod = math.atan2(py, px)
        else:
            aod = named.get("aod", self.default_aod)
            dist = named.get("distance", self.default_distance)
        if "aoa" in named:
            aoa = named["aoa"]
        elif isinstance(self.aoa_mode, str):
            aoa = aod if self.aoa_mode == "tied" else 0.0
        else:
            aoa = float(self.aoa_mode)
        return fold_visible(aod), fold_visible(aoa), float(dist)

    def paths_at(self, x=None):
        """Line-of-sight plus single-bounce scatter paths for the resolved position.

        The user array is rotated by (aod - aoa), which realizes the requested
        line-of-sight arrival angle; scatter-path arrival angles follow the
        same rotated frame so the whole geometry stays consistent.
        """
        aod, aoa, dist = self.resolve(x)
        paths = [Path(gain=complex(self.los_gain), distance=dist, aoa=aoa, aod=aod)]
        ux, uy = dist * math.cos(aod), dist * math.sin(aod)
        rot = aod - aoa
        for sc in self.cluster:
            sx, sy = sc.position
            vx, vy = ux - sx, uy - sy
            leg = math.hypot(vx, vy)
            if leg <= 1e-9:
                raise InvalidInputError(
                    f"user position ({ux:.3f}, {uy:.3f}) coincides with a scatterer")
            paths.append(Path(gain=complex(sc.gain),
                              distance=math.hypot(sx, sy) + leg,
                              aoa=fold_visible(math.atan2(vy, vx) - rot),
                              aod=fold_visible(math.atan2(sy, sx))))
        paths.extend(self.static_paths)
        return paths

    def mean_csi(self, x=None, k: int | None = None) -> np.ndarray:
        k = self.grid.center_index if k is None else k
        return csi_mean(self.paths_at(x), self.geometry, self.grid, k)

    def noise_variance(self, x=None, k: int | None = None) -> float:
        """Per-entry noise variance at this position for the scenario SNR.

        The transmit power is normalized per position, so the SNR stays at
        ``snr_db`` everywhere in the region of interest.
        """
        if math.isinf(self.snr_db) and self.snr_db > 0:
            return 0.0
        return noise_var_for_snr(self.mean_csi(x, k), self.snr_db)

    def sample_csi(self, x=None, k: int | None = None, n: int = 1, seed: int = 0) -> np.ndarray:
        """(n, N, M) stack of noisy channel draws at position ``x``."""
        mean = self.mean_csi(x, k)
        return csi_sample_batch(mean, self.noise_variance(x, k), n, seed)

    def with_snr(self, snr_db: float) -> "PathScenario":
        return replace(self, snr_db=snr_db)


# ---------------------------------------------------------------------------
# JSON wire format for CSI records: matrix entries as [re, im] pairs, row-major.

def matrix_to_pairs(h: np.ndarray) -> list:
    h = as_complex_matrix(h)
    return [[float(z.real), float(z.imag)] for z in h.reshape(-1)]


def matrix_from_pairs(pairs, rows: int, cols: int) -> np.ndarray:
    flat = np.array([complex(re, im) for re, im in pairs], dtype=np.complex128)
    if flat.size != rows * cols:
        raise InvalidInputError(f"expected {rows * cols} entries, got {flat.size}")
    return flat.reshape(rows, cols)


def csi_record(h: np.ndarray, geom: ArrayGeometry, grid: SubcarrierGrid, k: int) -> dict:
    """CSI dump record; the same schema is read back by the feedback codec and the CLI."""
    return {
        "geometry": {"n_rx": geom.n_rx, "n_tx": geom.n_tx,
                     "rx_spacing": geom.rx_spacing, "tx_spacing": geom.tx_spacing},
        "grid": {"center_frequency": grid.center_frequency, "spacing": grid.spacing,
                 "n_subcarriers": grid.n_subcarriers},
        "k": int(k),
        "matrix": matrix_to_pairs(h),
    }


def parse_csi_record(record: dict):
    """Inverse of :func:`csi_record`: returns (matrix, geometry, grid, k)."""
    try:
        g = record["geometry"]
        geom = ArrayGeometry(n_rx=int(g["n_rx"]), n_tx=int(g["n_tx"]),
                             rx_spacing=float(g["rx_spacing"]), tx_spacing=float(g["tx_spacing"]))
        gr = record["grid"]
        grid = SubcarrierGrid(center_frequency=float(gr["center_frequency"]),
                              spacing=float(gr["spacing"]),
                              n_subcarriers=int(gr["n_subcarriers"]))
        k = int(record["k"])
        h = matrix_from_pairs(record["matrix"], geom.n_rx, geom.n_tx)
    except (KeyError, TypeError) as exc:
        raise InvalidInputError(f"malformed CSI record: {exc}") from exc
    return h, geom, grid, k


def dump_csi_records(records, path):
    with open(path, "w") as f:
        json.dump(records, f, indent=2, sort_keys=True)
        f.write("\n")


def load_csi_records(path):
    with open(path) as f:
        return json.load(f)
