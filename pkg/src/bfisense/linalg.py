"""Small complex linear-algebra kernel for the matrices this toolkit works with (up to 8x8).

Matrices are plain complex128 ndarrays.  The singular value decomposition here
wraps LAPACK but adds a fixed phase convention so that repeated calls, and
calls on equal inputs, return identical factors.
"""

import numpy as np

from .errors import InvalidInputError

MAX_DIM = 8


def as_complex_matrix(a, name: str = "matrix") -> np.ndarray:
    """Coerce ``a`` to a 2-D complex128 array, rejecting non-finite entries."""
    m = np.asarray(a, dtype=np.complex128)
    if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
        raise InvalidInputError(f"{name} must be a 2-D matrix, got shape {m.shape}")
    if not (np.all(np.isfinite(m.real)) and np.all(np.isfinite(m.imag))):
        raise InvalidInputError(f"{name} contains non-finite entries")
    return m


def unitarity_defect(a: np.ndarray) -> float:
    """Max-abs deviation of ``a* a`` from the identity (columns orthonormality)."""
    a = np.asarray(a, dtype=np.complex128)
    g = a.conj().T @ a
    return float(np.max(np.abs(g - np.eye(a.shape[1]))))


def svd(a):
    """Singular value decomposition ``A = U diag(s) V*`` with a deterministic phase fix.

    Phase convention: the largest-magnitude entry of every column of V is made
    real positive, and the paired U column absorbs the opposite phase so the
    reconstruction is untouched.  Singular values come back sorted descending.

    Args:
        a: complex matrix, any rectangular shape with min dim >= 1.

    Returns:
        (u, s, v) with u of shape (n, n), s of length min(n, m) descending,
        v of shape (m, m), and ``a == u @ diag(s) @ v.conj().T`` up to
        floating-point roundoff.

    Raises:
        InvalidInputError: if ``a`` has NaN or Inf entries or is not 2-D.
    """
    m = as_complex_matrix(a, "svd input")
    u, s, vh = np.linalg.svd(m, full_matrices=True)
    v = vh.conj().T.copy()
    u = u.copy()
    k = s.shape[0]
    for j in range(v.shape[1]):
        p = int(np.argmax(np.abs(v[:, j])))
        pivot = v[p, j]
        mag = np.abs(pivot)
        if mag > 0.0:
            phase = pivot / mag
            v[:, j] *= np.conj(phase)
            v[p, j] = mag
            if j < k:
                u[:, j] *= np.conj(phase)
    return u, s, v


def random_unitary(dim: int, seed: int) -> np.ndarray:
    """Haar-distributed random unitary via QR of a complex Gaussian matrix.

    The R diagonal phases are folded back into Q, which makes the distribution
    exactly Haar and the output a deterministic function of ``seed``.
    """
    if dim < 1:
        raise InvalidInputError(f"dim must be >= 1, got {dim}")
    rng = np.random.default_rng(seed)
    a = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2.0)
    q, r = np.linalg.qr(a)
    d = np.diagonal(r)
    phases = d / np.abs(d)
    return q * phases[np.newaxis, :]
