"""Complex vector and small dense Hermitian matrix primitives.

Vectors are 1-D ``complex128`` numpy arrays and matrices are square 2-D
``complex128`` arrays.  Dense matrices are only meant for diagnostics and
small-dimension oracles; every hot path in the package works through inner
products.
"""
from __future__ import annotations

import numpy as np

from .errors import DiagnosticCapExceeded, DimensionMismatchError, InvariantViolation

UNIT_TOL = 1e-12
HERMITIAN_TOL = 1e-12

# Largest dimension for which dense D x D diagnostics are allowed.
DIAGNOSTIC_CAP = 512


def as_vector(v, unit: bool = False) -> np.ndarray:
    """Coerce ``v`` to a 1-D complex vector, optionally checking unit norm."""
    arr = np.asarray(v, dtype=np.complex128)
    if arr.ndim != 1 or arr.size == 0:
        raise DimensionMismatchError(f"expected a nonempty 1-D vector, got shape {arr.shape}")
    if unit:
        n2 = norm_squared(arr)
        if abs(n2 - 1.0) > UNIT_TOL:
            raise InvariantViolation(f"vector is not unit norm: |v|^2 - 1 = {n2 - 1.0:.3e}")
    return arr


def as_hermitian(m, tol: float = HERMITIAN_TOL) -> np.ndarray:
    arr = np.asarray(m, dtype=np.complex128)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise DimensionMismatchError(f"expected a square matrix, got shape {arr.shape}")
    dev = np.max(np.abs(arr - arr.conj().T)) if arr.size else 0.0
    if dev > tol:
        raise InvariantViolation(f"matrix is not Hermitian: max |M - M^dagger| = {dev:.3e}")
    return arr


def check_cap(dim: int, cap: int | None = None) -> None:
    cap = DIAGNOSTIC_CAP if cap is None else cap
    if dim > cap:
        raise DiagnosticCapExceeded(
            f"dense {dim}x{dim} matrix exceeds the diagnostic cap of {cap}; "
            "use the matrix-free routines instead"
        )


def norm_squared(v: np.ndarray) -> float:
    return float(np.vdot(v, v).real)


def inner_product(a, b) -> complex:
    """Return <a|b> = sum_j conj(a_j) b_j."""
    a = as_vector(a)
    b = as_vector(b)
    if a.shape != b.shape:
        raise DimensionMismatchError(f"dimension mismatch: {a.size} vs {b.size}")
    return complex(np.vdot(a, b))


def normalize(w) -> np.ndarray:
    """Return ``w / |w|``.

    Raises
    ------
    InvariantViolation
        If ``w`` is the zero vector.
    """
    w = as_vector(w)
    scale = np.max(np.abs(w))
    if scale == 0.0:
        raise InvariantViolation("cannot normalize the zero vector")
    # exact power-of-two rescale so tiny or huge entries do not under/overflow |w|^2
    e = -int(np.frexp(scale)[1])
    w = np.ldexp(w.real, e) + 1j * np.ldexp(w.imag, e)
    return w / np.sqrt(norm_squared(w))


def projector(v) -> np.ndarray:
    """Dense rank-1 projector |v><v| (diagnostic use only)."""
    v = as_vector(v)
    check_cap(v.size)
    return np.outer(v, v.conj())


def hermitian_eigh(m, cap: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition with eigenvalues sorted in descending order."""
    m = as_hermitian(m)
    check_cap(m.shape[0], cap)
    vals, vecs = np.linalg.eigh(m)
    return vals[::-1].copy(), vecs[:, ::-1].copy()


def hermitian_eigenvalues(m, cap: int | None = None) -> np.ndarray:
    """Real eigenvalues of a Hermitian matrix in descending order."""
    m = as_hermitian(m)
    check_cap(m.shape[0], cap)
    return np.linalg.eigvalsh(m)[::-1].copy()
