"""Beamforming feedback codec: steering matrix to angle vector and back.

The forward transform mirrors explicit-feedback Wi-Fi beamforming.  For a
channel matrix H (N receive rows, M transmit columns) it runs four stages:

  1. right-singular (steering) matrix V of H, columns by descending singular
     value;
  2. resize V to M x N: truncate columns when N <= M, pad zero columns when
     N > M;
  3. rotate every column so the last row becomes real nonnegative;
  4. Givens-angle extraction: column-by-column elimination producing phases
     phi (rows i..M-1 of column i) and rotation angles psi (rows i+1..M),
     for i = 1..S with S = min(N, M-1).

The angle vector has 2*M*S - S^2 - S entries, stores phi in [0, 2pi) and psi
in [0, pi/2], and reconstructs the rotated steering matrix exactly:

    V~ = prod_{i=1..S} ( D_i prod_{l=i+1..M} G_{l,i}^T ) I_{MxN}

where D_i carries exp(i*phi_{l,i}) at diagonal positions i..M-1 and G_{l,i}
is the planar rotation with cos(psi) at (i,i) and (l,l), sin(psi) at (i,l)
and -sin(psi) at (l,i).  Quantization maps angles onto the odd-multiple bin
centers used by the standard compressed-feedback codebooks, with the phi
width two bits above the psi width.
"""

import json
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import product
from typing import NamedTuple

import numpy as np

from .errors import DegenerateInputError, InvalidInputError
from .linalg import as_complex_matrix, svd

TWO_PI = 2.0 * np.pi
HALF_PI = np.pi / 2.0

_ORTHO_TOL = 1e-6
_ROUNDTRIP_TOL = 1e-9
_SV_GAP_TOL = 1e-8
_ZERO_ENTRY_TOL = 1e-12


class BfiLabel(NamedTuple):
    """Identity of one angle: kind 'phi' or 'psi', 1-based row l and column i."""

    kind: str
    row: int
    col: int


def bfi_element_count(n_rx: int, m_tx: int) -> int:
    """Number of feedback angles: 2*M*S - S^2 - S with S = min(N, M-1)."""
    if m_tx < 2:
        raise InvalidInputError(f"m_tx must be >= 2, got {m_tx}")
    if n_rx < 1:
        raise InvalidInputError(f"n_rx must be >= 1, got {n_rx}")
    s = min(n_rx, m_tx - 1)
    return 2 * m_tx * s - s * s - s


@lru_cache(maxsize=None)
def bfi_element_labels(n_rx: int, m_tx: int) -> tuple:
    """Canonical label order: per column i, phi_{i..M-1,i} then psi_{i+1..M,i}."""
    count = bfi_element_count(n_rx, m_tx)
    s = min(n_rx, m_tx - 1)
    labels = []
    for i in range(1, s + 1):
        labels.extend(BfiLabel("phi", ell, i) for ell in range(i, m_tx))
        labels.extend(BfiLabel("psi", ell, i) for ell in range(i + 1, m_tx + 1))
    assert len(labels) == count
    return tuple(labels)


@dataclass(eq=False)
class Bfi:
    """Ordered feedback angle vector with its antenna configuration.

    ``values`` follows the canonical label order of
    :func:`bfi_element_labels`.  ``degenerate`` flags vectors that came from a
    channel whose steering matrix is not uniquely determined (repeated
    singular values); their values follow the deterministic SVD convention
    but are convention-dependent.
    """

    m_tx: int
    n_rx: int
    values: np.ndarray
    degenerate: bool = False

    def __post_init__(self):
        expected = bfi_element_count(self.n_rx, self.m_tx)
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.shape != (expected,):
            raise InvalidInputError(
                f"expected {expected} angle values for N={self.n_rx}, M={self.m_tx}, "
                f"got shape {vals.shape}")
        if not np.all(np.isfinite(vals)):
            raise InvalidInputError("angle values must be finite")
        phi = vals[self.phi_mask]
        psi = vals[~self.phi_mask]
        if np.any(phi < -1e-9) or np.any(phi >= TWO_PI + 1e-9):
            raise InvalidInputError("phi values must lie in [0, 2pi)")
        if np.any(psi < -1e-9) or np.any(psi > HALF_PI + 1e-9):
            raise InvalidInputError("psi values must lie in [0, pi/2]")
        self.values = vals

    @property
    def labels(self) -> tuple:
        return bfi_element_labels(self.n_rx, self.m_tx)

    @property
    def phi_mask(self) -> np.ndarray:
        return phi_mask(self.n_rx, self.m_tx)

    @property
    def elements(self) -> list:
        return list(zip(self.labels, self.values.tolist()))


@lru_cache(maxsize=None)
def phi_mask(n_rx: int, m_tx: int) -> np.ndarray:
    mask = np.array([lab.kind == "phi" for lab in bfi_element_labels(n_rx, m_tx)])
    mask.setflags(write=False)
    return mask


def bfi_to_json(bfi: Bfi) -> dict:
    out = {
        "m_tx": bfi.m_tx,
        "n_rx": bfi.n_rx,
        "elements": [
            {"kind": lab.kind, "row": lab.row, "col": lab.col, "value": float(v)}
            for lab, v in bfi.elements
        ],
    }
    if bfi.degenerate:
        out["degenerate"] = True
    return out


def bfi_from_json(record: dict) -> Bfi:
    try:
        m_tx = int(record["m_tx"])
        n_rx = int(record["n_rx"])
        elements = record["elements"]
    except (KeyError, TypeError) as exc:
        raise InvalidInputError(f"malformed BFI record: {exc}") from exc
    labels = bfi_element_labels(n_rx, m_tx)
    if len(elements) != len(labels):
        raise InvalidInputError(
            f"expected {len(labels)} elements for N={n_rx}, M={m_tx}, got {len(elements)}")
    values = np.empty(len(labels))
    for idx, (lab, el) in enumerate(zip(labels, elements)):
        if (el.get("kind"), el.get("row"), el.get("col")) != lab:
            raise InvalidInputError(
                f"element {idx} is {el}, expected label {lab} in canonical order")
        values[idx] = float(el["value"])
    return Bfi(m_tx=m_tx, n_rx=n_rx, values=values,
               degenerate=bool(record.get("degenerate", False)))


# ---------------------------------------------------------------------------
# Forward chain stages

def rsvd_steering(h: np.ndarray) -> np.ndarray:
    """Right-singular (steering) matrix of the channel, M x M, descending order."""
    h = as_complex_matrix(h, "channel matrix")
    if not np.any(h):
        raise DegenerateInputError("steering matrix of the zero channel is undefined")
    _, _, v = svd(h)
    return v


def resize(v: np.ndarray, n_rx: int) -> np.ndarray:
    """Truncate to the first N columns (N <= M) or append zero columns (N > M)."""
    v = as_complex_matrix(v, "steering matrix")
    m = v.shape[0]
    if v.shape[1] != m:
        raise InvalidInputError(f"steering matrix must be square, got {v.shape}")
    if n_rx < 1:
        raise InvalidInputError(f"n_rx must be >= 1, got {n_rx}")
    if n_rx <= m:
        return v[:, :n_rx].copy()
    return np.hstack([v, np.zeros((m, n_rx - m), dtype=np.complex128)])


def rotate_real_last_row(vhat: np.ndarray) -> np.ndarray:
    """Scale each column by a unit phase so the last row is real nonnegative.

    Columns whose last entry is zero are left untouched (angle of zero is
    taken as zero), so zero-padded columns pass through.
    """
    vhat = as_complex_matrix(vhat, "resized steering matrix")
    last = vhat[-1, :]
    mags = np.abs(last)
    phases = np.where(mags > 0.0, last / np.where(mags > 0.0, mags, 1.0), 1.0)
    out = vhat * np.conj(phases)[np.newaxis, :]
    out[-1, :] = mags
    return out


def _validate_decompose_input(w: np.ndarray):
    m, n = w.shape
    norms = np.linalg.norm(w, axis=0)
    nonzero = norms > _ORTHO_TOL
    if np.any(np.abs(norms[nonzero] - 1.0) > _ORTHO_TOL):
        raise InvalidInputError("columns must be orthonormal (or zero padding)")
    wz = w[:, nonzero]
    gram = wz.conj().T @ wz
    if np.max(np.abs(gram - np.eye(wz.shape[1]))) > _ORTHO_TOL:
        raise InvalidInputError("columns must be orthonormal (or zero padding)")
    last = w[-1, :]
    if np.max(np.abs(last.imag)) > _ORTHO_TOL or np.min(last.real) < -_ORTHO_TOL:
        raise InvalidInputError("last row must be real nonnegative; apply the rotation stage first")


def _eliminate(vt: np.ndarray, forced: dict) -> tuple:
    """One pass of the column elimination.

    Returns (phis, psis, residual, ambiguous) where ``ambiguous`` maps the
    (row, col) of phase extractions that hit a zero entry to a fallback angle
    guessed from the dominant entry of the row at that moment.
    """
    m, n = vt.shape
    s = min(n, m - 1)
    w = vt.astype(np.complex128).copy()
    scale = max(float(np.max(np.abs(w))), 1.0)
    phis = {}
    psis = {}
    ambiguous = {}
    for i in range(s):
        for ell in range(i, m - 1):
            entry = w[ell, i]
            if (ell, i) in forced:
                phi = forced[(ell, i)]
            elif np.abs(entry) <= _ZERO_ENTRY_TOL * scale:
                row = w[ell, :]
                j = int(np.argmax(np.abs(row)))
                base = float(np.angle(row[j])) if np.abs(row[j]) > 0 else 0.0
                ambiguous[(ell, i)] = base
                phi = 0.0
            else:
                phi = float(np.angle(entry)) % TWO_PI
            phis[(ell, i)] = phi
            w[ell, :] *= np.exp(-1j * phi)
        for ell in range(i + 1, m):
            pivot = max(w[i, i].real, 0.0)
            psi = float(np.arctan2(np.abs(w[ell, i]), pivot))
            psis[(ell, i)] = psi
            c, sn = np.cos(psi), np.sin(psi)
            row_i = c * w[i, :] + sn * w[ell, :]
            row_l = -sn * w[i, :] + c * w[ell, :]
            w[i, :] = row_i
            w[ell, :] = row_l
    residual = float(np.linalg.norm(w - np.eye(m, n)))
    return phis, psis, residual, ambiguous


def givens_decompose(vt: np.ndarray) -> Bfi:
    """Angle vector of a rotated steering matrix (the inverse of reconstruction).

    Inputs on the degenerate set where a column-i pivot vanishes have phase
    information that the plain column scan cannot see; those phases are
    recovered by a small search over the sign-ambiguous candidates so the
    round trip stays exact.

    Raises:
        InvalidInputError: columns not orthonormal beyond 1e-6, or the last
            row is not real nonnegative.
    """
    vt = as_complex_matrix(vt, "rotated steering matrix")
    m, n = vt.shape
    if m < 2:
        raise InvalidInputError(f"need at least 2 transmit rows, got {m}")
    _validate_decompose_input(vt)

    phis, psis, residual, ambiguous = _eliminate(vt, forced={})
    tol = _ROUNDTRIP_TOL * max(1.0, float(np.linalg.norm(vt)))
    if residual > tol and ambiguous and len(ambiguous) <= 8:
        best = (residual, phis, psis)
        keys = sorted(ambiguous)
        candidate_sets = [
            sorted({0.0, ambiguous[k] % TWO_PI, (ambiguous[k] + np.pi) % TWO_PI})
            for k in keys
        ]
        for combo in product(*candidate_sets):
            forced = dict(zip(keys, combo))
            p2, s2, r2, _ = _eliminate(vt, forced=forced)
            if r2 < best[0]:
                best = (r2, p2, s2)
            if r2 <= tol:
                break
        residual, phis, psis = best

    labels = bfi_element_labels(n, m)
    values = np.empty(len(labels))
    for idx, lab in enumerate(labels):
        table = phis if lab.kind == "phi" else psis
        values[idx] = table[(lab.row - 1, lab.col - 1)]
    values[phi_mask(n, m)] %= TWO_PI
    return Bfi(m_tx=m, n_rx=n, values=values)


def givens_reconstruct(theta: Bfi) -> np.ndarray:
    """Rotated steering matrix from an angle vector (exact inverse of decompose)."""
    if not isinstance(theta, Bfi):
        raise InvalidInputError("givens_reconstruct expects a Bfi")
    vals = theta.values
    mask = theta.phi_mask
    if np.any(vals[mask] < 0) or np.any(vals[mask] >= TWO_PI):
        raise InvalidInputError("phi values must lie in [0, 2pi)")
    if np.any(vals[~mask] < 0) or np.any(vals[~mask] > HALF_PI):
        raise InvalidInputError("psi values must lie in [0, pi/2]")
    return _reconstruct(vals[np.newaxis, :], theta.m_tx, theta.n_rx)[0]


def _reconstruct(values: np.ndarray, m_tx: int, n_rx: int) -> np.ndarray:
    """Batched reconstruction; ``values`` has shape (B, count)."""
    labels = bfi_element_labels(n_rx, m_tx)
    index = {lab: j for j, lab in enumerate(labels)}
    b = values.shape[0]
    m, n = m_tx, n_rx
    s = min(n, m - 1)
    w = np.broadcast_to(np.eye(m, n, dtype=np.complex128), (b, m, n)).copy()
    for i in reversed(range(1, s + 1)):
        for ell in range(m, i, -1):
            psi = values[:, index[BfiLabel("psi", ell, i)]]
            c = np.cos(psi)[:, None]
            sn = np.sin(psi)[:, None]
            row_i = c * w[:, i - 1, :] - sn * w[:, ell - 1, :]
            row_l = sn * w[:, i - 1, :] + c * w[:, ell - 1, :]
            w[:, i - 1, :] = row_i
            w[:, ell - 1, :] = row_l
        for ell in range(i, m):
            phi = values[:, index[BfiLabel("phi", ell, i)]]
            w[:, ell - 1, :] *= np.exp(1j * phi)[:, None]
    return w


def givens_reconstruct_batch(values: np.ndarray, m_tx: int, n_rx: int) -> np.ndarray:
    """Vectorized reconstruction for a (B, count) stack of angle vectors."""
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 2 or values.shape[1] != bfi_element_count(n_rx, m_tx):
        raise InvalidInputError(f"expected shape (B, {bfi_element_count(n_rx, m_tx)})")
    return _reconstruct(values, m_tx, n_rx)


def _decompose_batch(vt: np.ndarray) -> np.ndarray:
    """Vectorized column elimination for a (B, M, N) stack; no degeneracy repair."""
    b, m, n = vt.shape
    s = min(n, m - 1)
    w = vt.astype(np.complex128).copy()
    out = np.empty((b, bfi_element_count(n, m)))
    labels = bfi_element_labels(n, m)
    index = {lab: j for j, lab in enumerate(labels)}
    for i in range(s):
        for ell in range(i, m - 1):
            phi = np.angle(w[:, ell, i]) % TWO_PI
            out[:, index[BfiLabel("phi", ell + 1, i + 1)]] = phi
            w[:, ell, :] *= np.exp(-1j * phi)[:, None]
        for ell in range(i + 1, m):
            pivot = np.maximum(w[:, i, i].real, 0.0)
            psi = np.arctan2(np.abs(w[:, ell, i]), pivot)
            out[:, index[BfiLabel("psi", ell + 1, i + 1)]] = psi
            c = np.cos(psi)[:, None]
            sn = np.sin(psi)[:, None]
            row_i = c * w[:, i, :] + sn * w[:, ell, :]
            row_l = -sn * w[:, i, :] + c * w[:, ell, :]
            w[:, i, :] = row_i
            w[:, ell, :] = row_l
    return out


def _degenerate_flag(s: np.ndarray, n_rx: int, m_tx: int, tol: float = _SV_GAP_TOL):
    """True when the steering columns the codec uses are not uniquely determined.

    Works on stacked singular-value arrays: s has shape (..., min(N, M)).
    """
    s = np.asarray(s, dtype=np.float64)
    top = s[..., 0]
    if n_rx < m_tx:
        padded = np.concatenate([s, np.zeros(s.shape[:-1] + (1,))], axis=-1)
    else:
        padded = s
    gaps = padded[..., :-1] - padded[..., 1:]
    return (top <= 0) | np.any(gaps < tol * np.maximum(top[..., None], 1e-300), axis=-1)


def csi_to_bfi(h: np.ndarray) -> Bfi:
    """Full channel-to-feedback transform (stages 1-3; quantization is separate)."""
    h = as_complex_matrix(h, "channel matrix")
    n_rx, m_tx = h.shape
    if m_tx < 2:
        raise InvalidInputError(f"beamforming feedback needs at least 2 transmit antennas, got {m_tx}")
    if not np.any(h):
        raise DegenerateInputError("feedback of the zero channel is undefined")
    _, sv, v = svd(h)
    degenerate = bool(_degenerate_flag(sv[np.newaxis, :], n_rx, m_tx)[0])
    vt = rotate_real_last_row(resize(v, n_rx))
    theta = givens_decompose(vt)
    theta.degenerate = degenerate
    return theta


def csi_to_bfi_batch(h: np.ndarray) -> tuple:
    """Vectorized transform for a (B, N, M) stack.

    Returns (values, degenerate) with values of shape (B, count).  Skips the
    degenerate-phase repair of the scalar path, so exact results on the
    measure-zero degenerate set are only guaranteed by :func:`csi_to_bfi`.
    """
    h = np.asarray(h, dtype=np.complex128)
    if h.ndim != 3:
        raise InvalidInputError(f"expected a (B, N, M) stack, got shape {h.shape}")
    _, n_rx, m_tx = h.shape
    if m_tx < 2:
        raise InvalidInputError("beamforming feedback needs at least 2 transmit antennas")
    if not (np.all(np.isfinite(h.real)) and np.all(np.isfinite(h.imag))):
        raise InvalidInputError("channel stack contains non-finite entries")
    _, sv, vh = np.linalg.svd(h)
    degenerate = _degenerate_flag(sv, n_rx, m_tx)
    v = np.conj(np.swapaxes(vh, -1, -2))
    if n_rx <= m_tx:
        vhat = v[:, :, :n_rx]
    else:
        pad = np.zeros((h.shape[0], m_tx, n_rx - m_tx), dtype=np.complex128)
        vhat = np.concatenate([v, pad], axis=2)
    last = vhat[:, -1, :]
    mags = np.abs(last)
    phases = np.where(mags > 0.0, last / np.where(mags > 0.0, mags, 1.0), 1.0)
    vt = vhat * np.conj(phases)[:, np.newaxis, :]
    vt[:, -1, :] = mags
    return _decompose_batch(vt), degenerate


# ---------------------------------------------------------------------------
# Closed-form 2x2 expressions

def closed_form_2x2(h: np.ndarray) -> tuple:
    """(phi, psi) for a 2x2 channel straight from its Gram matrix.

    With G = H*H = [[a, b], [b*, d]], the rotated principal steering column
    is [b, lam1 - a] / norm, so phi is the four-quadrant angle of b (wrapped
    to [0, 2pi)) and psi = atan2(2|b|, a - d) / 2 in [0, pi/2].  The angle of
    b expands to the amplitude-weighted sums of sines and cosines of the
    per-receiver transmit phase differences, which is how the closed form is
    usually written.

    Raises:
        DegenerateInputError: when both arctangent arguments vanish, i.e.
            the cross products alpha11*alpha12 and alpha21*alpha22 cancel.
    """
    h = as_complex_matrix(h, "channel matrix")
    if h.shape != (2, 2):
        raise InvalidInputError(f"closed form needs a 2x2 matrix, got {h.shape}")
    a = abs(h[0, 0]) ** 2 + abs(h[1, 0]) ** 2
    d = abs(h[0, 1]) ** 2 + abs(h[1, 1]) ** 2
    b = np.conj(h[0, 0]) * h[0, 1] + np.conj(h[1, 0]) * h[1, 1]
    scale = max(a, d, 1e-300)
    if abs(b) <= 1e-12 * scale:
        raise DegenerateInputError(
            "both arctangent arguments vanish: the cross products "
            f"|h11 h12| = {abs(h[0, 0] * h[0, 1]):.3e} and "
            f"|h21 h22| = {abs(h[1, 0] * h[1, 1]):.3e} cancel")
    phi = float(np.arctan2(b.imag, b.real)) % TWO_PI
    psi = 0.5 * float(np.arctan2(2.0 * abs(b), a - d))
    return phi, psi


# ---------------------------------------------------------------------------
# Quantization and bit packing

@dataclass(eq=False)
class QuantizedBfi:
    """Integer codes for an angle vector at a given resolution.

    phi codes use b_phi = b_psi + 2 bits with bin centers (2k+1)*pi/2^b_phi;
    psi codes use b_psi bits with centers (2k+1)*pi/2^(b_psi+2).
    """

    m_tx: int
    n_rx: int
    b_psi: int
    codes: np.ndarray

    def __post_init__(self):
        if not 1 <= self.b_psi <= 9:
            raise InvalidInputError(f"b_psi must be in 1..9, got {self.b_psi}")
        codes = np.asarray(self.codes, dtype=np.int64)
        labels = bfi_element_labels(self.n_rx, self.m_tx)
        if codes.shape != (len(labels),):
            raise InvalidInputError(f"expected {len(labels)} codes, got shape {codes.shape}")
        mask = phi_mask(self.n_rx, self.m_tx)
        if np.any(codes < 0):
            raise InvalidInputError("codes must be nonnegative")
        if np.any(codes[mask] >= 2 ** self.b_phi):
            raise InvalidInputError(f"phi codes must be < 2^{self.b_phi}")
        if np.any(codes[~mask] >= 2 ** self.b_psi):
            raise InvalidInputError(f"psi codes must be < 2^{self.b_psi}")
        self.codes = codes

    @property
    def b_phi(self) -> int:
        return self.b_psi + 2

    @property
    def packed(self) -> bytes:
        return pack_quantized(self)


def quantize(theta: Bfi, b_psi: int) -> QuantizedBfi:
    """Nearest-bin-center codes for every angle (half-to-even at midpoints)."""
    if not 1 <= b_psi <= 9:
        raise InvalidInputError(f"b_psi must be in 1..9, got {b_psi}")
    b_phi = b_psi + 2
    mask = theta.phi_mask
    codes = np.empty(theta.values.shape[0], dtype=np.int64)
    phi = theta.values[mask]
    codes_phi = np.round(phi * (2 ** (b_phi - 1)) / np.pi - 0.5).astype(np.int64)
    codes[mask] = np.clip(codes_phi, 0, 2 ** b_phi - 1)
    psi = theta.values[~mask]
    codes_psi = np.round(psi * (2 ** (b_psi + 1)) / np.pi - 0.5).astype(np.int64)
    codes[~mask] = np.clip(codes_psi, 0, 2 ** b_psi - 1)
    return QuantizedBfi(m_tx=theta.m_tx, n_rx=theta.n_rx, b_psi=b_psi, codes=codes)


def dequantize(q: QuantizedBfi) -> Bfi:
    """Bin-center angles for the stored codes."""
    mask = phi_mask(q.n_rx, q.m_tx)
    values = np.empty(q.codes.shape[0])
    values[mask] = (2 * q.codes[mask] + 1) * np.pi / 2 ** q.b_phi
    values[~mask] = (2 * q.codes[~mask] + 1) * np.pi / 2 ** (q.b_psi + 2)
    return Bfi(m_tx=q.m_tx, n_rx=q.n_rx, values=values)


def pack_quantized(q: QuantizedBfi) -> bytes:
    """Binary wire format for quantized feedback.

    Layout: header bytes (b_psi, reserved=0), then the codes in canonical
    element order, each written least-significant-bit first with width b_phi
    or b_psi, packed into bytes starting at bit 0; the tail is zero padded to
    a byte boundary.
    """
    mask = phi_mask(q.n_rx, q.m_tx)
    bits = []
    for j, code in enumerate(q.codes):
        width = q.b_phi if mask[j] else q.b_psi
        bits.extend((int(code) >> t) & 1 for t in range(width))
    out = bytearray([q.b_psi, 0])
    out.extend(0 for _ in range((len(bits) + 7) // 8))
    for pos, bit in enumerate(bits):
        if bit:
            out[2 + pos // 8] |= 1 << (pos % 8)
    return bytes(out)


def unpack_quantized(data: bytes, n_rx: int, m_tx: int) -> QuantizedBfi:
    """Inverse of :func:`pack_quantized`; the antenna counts come out of band."""
    if len(data) < 2:
        raise InvalidInputError("packed feedback needs at least the two header bytes")
    b_psi = data[0]
    if not 1 <= b_psi <= 9:
        raise InvalidInputError(f"packed header carries invalid b_psi={b_psi}")
    if data[1] != 0:
        raise InvalidInputError("reserved header byte must be 0")
    mask = phi_mask(n_rx, m_tx)
    widths = np.where(mask, b_psi + 2, b_psi)
    total_bits = int(np.sum(widths))
    if (len(data) - 2) * 8 < total_bits:
        raise InvalidInputError(
            f"packed payload too short: need {total_bits} bits, have {(len(data) - 2) * 8}")
    payload = data[2:]
    codes = np.zeros(mask.shape[0], dtype=np.int64)
    pos = 0
    for j in range(mask.shape[0]):
        code = 0
        for t in range(int(widths[j])):
            if payload[pos // 8] >> (pos % 8) & 1:
                code |= 1 << t
            pos += 1
        codes[j] = code
    return QuantizedBfi(m_tx=m_tx, n_rx=n_rx, b_psi=int(b_psi), codes=codes)


def dump_bfi(bfi: Bfi, path):
    with open(path, "w") as f:
        json.dump(bfi_to_json(bfi), f, indent=2, sort_keys=True)
        f.write("\n")


def load_bfi(path) -> Bfi:
    with open(path) as f:
        return bfi_from_json(json.load(f))
