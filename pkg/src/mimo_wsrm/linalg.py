"""Small batched linear-algebra helpers shared by the optimisation modules.

Every function accepts stacks of matrices (leading batch axes) and works on
the last two axes, the same convention numpy.linalg uses.
"""

import numpy as np

LN2 = np.log(2.0)


def herm(a):
    """Conjugate transpose over the last two axes."""
    return np.conj(np.swapaxes(a, -1, -2))


def hermitize(a):
    """Return the Hermitian part ``(A + A^H) / 2``."""
    return 0.5 * (a + herm(a))


def eye_like(a):
    """Identity matrices broadcastable against the stack ``a``."""
    return np.broadcast_to(np.eye(a.shape[-1], dtype=a.dtype), a.shape)


def log2det(a):
    """log2 det of a stack of Hermitian positive definite matrices.

    Raises
    ------
    np.linalg.LinAlgError
        If any determinant is zero or negative, i.e. the log is not finite.
    """
    sign, logdet = np.linalg.slogdet(a)
    if np.any(np.real(sign) <= 0) or not np.all(np.isfinite(logdet)):
        raise np.linalg.LinAlgError("matrix is singular or not positive definite")
    return logdet / LN2


def real_inner(a, b):
    """Real Frobenius inner product ``Re tr(A^H B)`` summed over the whole stack."""
    return float(np.real(np.vdot(a, b)))


def normalize_phase(vecs):
    """Rotate each column so its first non-negligible entry is real positive."""
    mags = np.abs(vecs)
    tol = 1e-12 * np.max(mags, axis=-2, keepdims=True)
    first = np.expand_dims(np.argmax(mags > tol, axis=-2), -2)
    pivot = np.take_along_axis(vecs, first, axis=-2)
    mag = np.abs(pivot)
    phase = np.where(mag > 0, pivot / np.where(mag > 0, mag, 1.0), 1.0)
    return vecs / phase
