"""Classical-shadow estimator for random-unitary measurements.

With Haar (or Clifford) unitaries the inverted snapshot of an outcome is
(D+1)|psi><psi| - I, so the shadow over the first M outcomes is

    rho_s = (D+1)/M * sum_m |psi_m><psi_m| - I.

Everything except :func:`shadow_matrix` and :func:`closest_physical_state`
works from inner products with the outcomes and never forms rho_s.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import DimensionMismatchError, InvariantViolation, ShadowBenchError
from .hilbert import as_hermitian, as_vector, check_cap, hermitian_eigh
from .simulate import Dataset


@dataclass(frozen=True, eq=False)
class Observable:
    """A rank-1 projector |phi><phi| or a dense Hermitian matrix.

    Build with :meth:`projector` or :meth:`dense` rather than directly.
    """

    vector: np.ndarray | None = None
    matrix: np.ndarray | None = None
    tag: str = ""

    @classmethod
    def projector(cls, phi, tag: str = "") -> "Observable":
        phi = as_vector(phi, unit=True)
        phi.setflags(write=False)
        return cls(vector=phi, tag=tag)

    @classmethod
    def dense(cls, m, tag: str = "") -> "Observable":
        m = as_hermitian(m)
        check_cap(m.shape[0])
        m.setflags(write=False)
        return cls(matrix=m, tag=tag)

    @property
    def is_projector(self) -> bool:
        return self.vector is not None

    @property
    def dim(self) -> int:
        return self.vector.size if self.is_projector else self.matrix.shape[0]

    def as_matrix(self) -> np.ndarray:
        if self.is_projector:
            check_cap(self.dim)
            return np.outer(self.vector, self.vector.conj())
        return np.array(self.matrix)

    def check_dim(self, dim: int) -> None:
        if self.dim != dim:
            raise DimensionMismatchError(f"observable has dim {self.dim}, expected {dim}")

    def expectation(self, x: np.ndarray) -> np.ndarray | float:
        """Tr rho(x) Lambda for unnormalized pure states ``x`` (shape (D,) or (R, D))."""
        x = np.asarray(x, dtype=np.complex128)
        n2 = np.einsum("...j,...j->...", x.conj(), x).real
        if self.is_projector:
            ov = x @ self.vector.conj()
            val = (ov.real**2 + ov.imag**2) / n2
        else:
            val = np.einsum("...j,jk,...k->...", x.conj(), self.matrix, x).real / n2
        return float(val) if np.ndim(val) == 0 else val

    def expectation_density(self, rho) -> float:
        """Tr rho Lambda for a dense (possibly mixed) state."""
        rho = np.asarray(rho, dtype=np.complex128)
        if self.is_projector:
            return float(np.vdot(self.vector, rho @ self.vector).real)
        return float(np.trace(rho @ self.matrix).real)

    def ground_truth(self) -> float:
        """Value on the simulated ground truth |0><0|."""
        if self.is_projector:
            c = self.vector[0]
            return float(c.real**2 + c.imag**2)
        return float(self.matrix[0, 0].real)


def _check_prefix(dataset: Dataset, m_used: int) -> None:
    if not 1 <= m_used <= dataset.shots:
        raise ShadowBenchError(
            f"m_used must satisfy 1 <= M <= {dataset.shots}, got {m_used}"
        )


class Shadow:
    """The shadow built from the first ``m_used`` outcomes of a dataset."""

    def __init__(self, dataset: Dataset, m_used: int):
        _check_prefix(dataset, m_used)
        self.dataset = dataset
        self.m_used = m_used
        self.dim = dataset.dim
        self.outcomes = dataset.prefix(m_used)

    def __repr__(self):
        return f"Shadow(dim={self.dim}, m_used={self.m_used}, dataset={self.dataset.ref})"

    @property
    def scale(self) -> float:
        return (self.dim + 1) / self.m_used

    def expectation(self, obs: Observable) -> float:
        obs.check_dim(self.dim)
        if obs.is_projector:
            ov = self.outcomes @ obs.vector.conj()
            return self.scale * float(np.sum(ov.real**2 + ov.imag**2)) - 1.0
        h = obs.matrix
        quad = np.einsum("mj,jk,mk->", self.outcomes.conj(), h, self.outcomes).real
        return self.scale * float(quad) - float(np.trace(h).real)

    def quadratic_form(self, x: np.ndarray) -> np.ndarray | float:
        """<x|rho_s|x> / |x|^2 for one state (D,) or a stack (R, D)."""
        x = np.asarray(x, dtype=np.complex128)
        if x.shape[-1] != self.dim:
            raise DimensionMismatchError(f"state has dim {x.shape[-1]}, expected {self.dim}")
        ov = x @ self.outcomes.conj().T
        n2 = np.einsum("...j,...j->...", x.conj(), x).real
        val = self.scale * np.sum(ov.real**2 + ov.imag**2, axis=-1) / n2 - 1.0
        return float(val) if np.ndim(val) == 0 else val

    @cached_property
    def self_overlap(self) -> float:
        """Tr rho_s^2 from the M x M Gram matrix of the outcomes."""
        gram = self.outcomes.conj() @ self.outcomes.T
        s = float(np.sum(gram.real**2 + gram.imag**2))
        d = self.dim
        return self.scale**2 * s - 2.0 * (d + 1) + d

    def matrix(self) -> np.ndarray:
        check_cap(self.dim)
        outer = self.outcomes.T @ self.outcomes.conj()
        return self.scale * outer - np.eye(self.dim)


def shadow_expectation(dataset: Dataset, m_used: int, obs: Observable, dense: bool = False) -> float:
    """Shadow estimate Tr rho_s Lambda over the first ``m_used`` outcomes.

    ``dense=True`` goes through the explicit D x D shadow matrix and is
    meant as a cross-check at small D.
    """
    obs.check_dim(dataset.dim)
    if dense:
        rho_s = shadow_matrix(dataset, m_used)
        return float(np.trace(rho_s @ obs.as_matrix()).real)
    return Shadow(dataset, m_used).expectation(obs)


def shadow_expectation_grid(dataset: Dataset, obs: Observable, m_values) -> np.ndarray:
    """Shadow estimates for every prefix length in ``m_values``.

    Snapshot terms are accumulated once, so the whole grid costs
    O(max(m_values)) inner products.
    """
    obs.check_dim(dataset.dim)
    m_values = np.asarray(list(m_values), dtype=int)
    if m_values.size == 0:
        return np.empty(0)
    if m_values.min() < 1 or m_values.max() > dataset.shots:
        raise ShadowBenchError(f"m values must lie in [1, {dataset.shots}]")
    upto = dataset.prefix(int(m_values.max()))
    if obs.is_projector:
        ov = upto @ obs.vector.conj()
        terms = ov.real**2 + ov.imag**2
        offset = 1.0
    else:
        terms = np.einsum("mj,jk,mk->m", upto.conj(), obs.matrix, upto).real
        offset = float(np.trace(obs.matrix).real)
    csum = np.cumsum(terms)
    d = dataset.dim
    return (d + 1) / m_values * csum[m_values - 1] - offset


def shadow_matrix(dataset: Dataset, m_used: int) -> np.ndarray:
    """Dense rho_s (diagnostic, D <= cap)."""
    return Shadow(dataset, m_used).matrix()


def shadow_self_overlap(dataset: Dataset, m_used: int) -> float:
    return Shadow(dataset, m_used).self_overlap


def closest_physical_state(m, trace_tol: float = 1e-9) -> np.ndarray:
    """Frobenius-nearest density matrix to a unit-trace Hermitian matrix.

    Eigenvalue truncation of Smolin, Gambetta and Smith (PRL 108, 070502):
    walking up from the most negative eigenvalue, each one that would stay
    negative after sharing the accumulated deficit is set to zero, and the
    final deficit is spread evenly over the survivors.
    """
    m = as_hermitian(m)
    tr = float(np.trace(m).real)
    if abs(tr - 1.0) > trace_tol:
        raise InvariantViolation(f"input trace is {tr!r}, expected 1")
    mu, vecs = hermitian_eigh(m)
    lam = np.zeros_like(mu)
    i = mu.size
    deficit = 0.0
    while i > 0 and mu[i - 1] + deficit / i < 0.0:
        deficit += mu[i - 1]
        i -= 1
    lam[:i] = mu[:i] + deficit / i
    return (vecs * lam) @ vecs.conj().T
