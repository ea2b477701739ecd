"""Small dense symmetric-matrix utilities.

Definiteness classification, factorization-based SPD inversion, and the
matrix inversion lemma.  Everything here targets the small (n <= ~10)
covariance-sized matrices used by the filters; there are no sparse or
blocked code paths.
"""

from __future__ import annotations

import enum

import numpy as np
from scipy import linalg

from .exceptions import DefinitenessError, SingularMatrixError

# Relative pivot tolerance for definiteness classification.
DEFAULT_TOL = 1e-10


class Definiteness(enum.Enum):
    POSITIVE_DEFINITE = "positive_definite"
    POSITIVE_SEMIDEFINITE = "positive_semidefinite"
    INDEFINITE = "indefinite"


def as_square(m, name: str = "matrix") -> np.ndarray:
    """Coerce to a float square 2-D array, raising on any other shape."""
    a = np.asarray(m, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"{name} must be square, got shape {a.shape}")
    return a


def symmetrize(m) -> np.ndarray:
    """Return (M + M^T) / 2.

    Applied after every covariance-producing arithmetic step: the exact
    symmetry the algebra assumes is lost in floating point.
    """
    a = as_square(m)
    return 0.5 * (a + a.T)


def _require_symmetric(a: np.ndarray, tol: float, name: str) -> np.ndarray:
    scale = max(1.0, float(np.abs(a).max(initial=0.0)))
    if float(np.abs(a - a.T).max(initial=0.0)) > tol * scale:
        raise ValueError(f"{name} is not symmetric within tolerance {tol:g}")
    return 0.5 * (a + a.T)


def check_definiteness(m, tol: float = DEFAULT_TOL) -> Definiteness:
    """Classify a symmetric matrix as PD, PSD, or indefinite.

    Uses an LDL^T factorization; by Sylvester's law of inertia the signs
    of the block pivots match the signs of the eigenvalues.  Pivots are
    thresholded at ``tol * max |diagonal|``.  Eigendecomposition is kept
    out of this path on purpose (it is the independent check used by the
    test suite).
    """
    a = as_square(m)
    a = _require_symmetric(a, tol, "matrix")
    n = a.shape[0]
    if n == 0:
        return Definiteness.POSITIVE_DEFINITE
    _, d, _ = linalg.ldl(a)
    # d is block diagonal with 1x1 and 2x2 blocks; its eigenvalues are the
    # inertia-revealing pivots.
    pivots = np.linalg.eigvalsh(0.5 * (d + d.T))
    thresh = tol * float(np.abs(np.diag(a)).max(initial=0.0))
    if np.all(pivots > thresh):
        return Definiteness.POSITIVE_DEFINITE
    if np.all(pivots >= -thresh):
        return Definiteness.POSITIVE_SEMIDEFINITE
    return Definiteness.INDEFINITE


def spd_inverse(m) -> np.ndarray:
    """Invert a strictly positive-definite matrix via Cholesky.

    Returns a symmetrized inverse; raises :class:`DefinitenessError` when
    the factorization fails (semidefinite or indefinite input).
    """
    a = symmetrize(m)
    try:
        factor = linalg.cho_factor(a, lower=True)
    except linalg.LinAlgError as exc:
        raise DefinitenessError(
            f"matrix is not positive definite, cannot invert: {exc}"
        ) from exc
    inv = linalg.cho_solve(factor, np.eye(a.shape[0]))
    return 0.5 * (inv + inv.T)


def inversion_lemma(a_inv, u, c, v) -> np.ndarray:
    """Invert A + U C V given A^{-1}.

    Computes A^{-1} - A^{-1} U (C^{-1} + V A^{-1} U)^{-1} V A^{-1}.  A, C
    and A + U C V must be nonsingular; a singular inner term raises
    :class:`SingularMatrixError`.
    """
    a_inv = as_square(a_inv, "a_inv")
    c = as_square(c, "c")
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.ndim != 2 or v.ndim != 2:
        raise ValueError("u and v must be 2-D matrices")
    n = a_inv.shape[0]
    q = c.shape[0]
    if u.shape != (n, q) or v.shape != (q, n):
        raise ValueError(
            f"nonconformable shapes: a_inv {a_inv.shape}, u {u.shape}, "
            f"c {c.shape}, v {v.shape}"
        )
    try:
        c_inv = np.linalg.inv(c)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError("c is singular") from exc
    inner = c_inv + v @ a_inv @ u
    try:
        solved = np.linalg.solve(inner, v @ a_inv)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError(
            "inner term C^{-1} + V A^{-1} U is singular"
        ) from exc
    return a_inv - a_inv @ u @ solved


class SpdMatrix:
    """Symmetric positive-(semi)definite matrix with validated definiteness.

    The constructor symmetrizes its input and verifies it is not
    indefinite; with ``definite=True`` it additionally requires a
    successful Cholesky factorization.  Entries are exposed as a
    read-only array.
    """

    __slots__ = ("_entries",)

    def __init__(self, entries, *, definite: bool = False, tol: float = DEFAULT_TOL):
        a = symmetrize(entries)
        if definite:
            try:
                linalg.cho_factor(a, lower=True)
            except linalg.LinAlgError as exc:
                raise DefinitenessError(
                    "matrix is not strictly positive definite"
                ) from exc
        elif check_definiteness(a, tol) is Definiteness.INDEFINITE:
            raise DefinitenessError("matrix is indefinite")
        a.flags.writeable = False
        self._entries = a

    @property
    def entries(self) -> np.ndarray:
        return self._entries

    @property
    def dim(self) -> int:
        return self._entries.shape[0]

    def inverse(self) -> "SpdMatrix":
        return SpdMatrix(spd_inverse(self._entries), definite=True)

    def __array__(self, dtype=None, copy=None):
        if dtype is not None:
            return self._entries.astype(dtype)
        return self._entries

    def __repr__(self) -> str:
        return f"SpdMatrix({self._entries.tolist()!r})"


def as_matrix(m) -> np.ndarray:
    """Unwrap an :class:`SpdMatrix` or coerce array-like input to float."""
    if isinstance(m, SpdMatrix):
        return m.entries
    return np.asarray(m, dtype=float)
