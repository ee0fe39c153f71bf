"""Independent reference computations used to cross-check the fast paths.

None of these reuse the simulator, shadow or chain code they are meant to
check.  They are slow, dense or low-dimensional by design.
"""
from __future__ import annotations

import numpy as np
from scipy import integrate


def haar_unitary(dim: int, gen: np.random.Generator) -> np.ndarray:
    """Haar-random unitary from the phase-corrected QR of a Ginibre matrix (Mezzadri 2007)."""
    z = (gen.standard_normal((dim, dim)) + 1j * gen.standard_normal((dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def explicit_unitary_shots(dim: int, shots: int, gen: np.random.Generator) -> np.ndarray:
    """Measured states U^dagger|b> from explicit Haar unitaries applied to |0>."""
    out = np.empty((shots, dim), dtype=np.complex128)
    for m in range(shots):
        u = haar_unitary(dim, gen)
        p = np.abs(u[:, 0]) ** 2
        b = gen.choice(dim, p=p / p.sum())
        out[m] = u[b, :].conj()
    return out


def dense_shadow(outcomes: np.ndarray) -> np.ndarray:
    m, d = outcomes.shape
    rho = -np.eye(d, dtype=np.complex128)
    for psi in outcomes:
        rho += (d + 1) / m * np.outer(psi, psi.conj())
    return rho


def pure_density(x: np.ndarray) -> np.ndarray:
    return np.outer(x, x.conj()) / np.vdot(x, x).real


def frobenius_sq(a: np.ndarray, b: np.ndarray) -> float:
    diff = a - b
    return float(np.sum(np.abs(diff) ** 2))


def dykstra_density_projection(m: np.ndarray, iters: int = 20000, tol: float = 1e-13) -> np.ndarray:
    """Frobenius projection onto unit-trace PSD matrices by Dykstra's alternating projections."""
    d = m.shape[0]
    x = np.array(m, dtype=np.complex128)
    p = np.zeros_like(x)
    q = np.zeros_like(x)
    for _ in range(iters):
        y = x + p
        w, v = np.linalg.eigh((y + y.conj().T) / 2)
        y_psd = (v * np.clip(w, 0, None)) @ v.conj().T
        p = y - y_psd
        z = y_psd + q
        x_new = z + (1 - np.trace(z).real) / d * np.eye(d)
        q = z - x_new
        if np.max(np.abs(x_new - x)) < tol:
            x = x_new
            break
        x = x_new
    return x


def bloch_quadrature_mean(log_weight, observable: np.ndarray, n_theta: int = 96, n_phi: int = 96) -> float:
    """Posterior mean of Tr rho Lambda over qubit pure states, uniform prior.

    Gauss-Legendre nodes in cos(theta) and an equispaced periodic grid in
    phi.  Exact for polynomial integrands of moderate degree.
    ``log_weight(psi)`` takes an (n, 2) array of unit vectors.
    """
    u, wu = np.polynomial.legendre.leggauss(n_theta)
    phi = np.arange(n_phi) * 2 * np.pi / n_phi
    uu, pp = np.meshgrid(u, phi, indexing="ij")
    half = np.arccos(uu) / 2
    psi = np.stack([np.cos(half), np.exp(1j * pp) * np.sin(half)], axis=-1).reshape(-1, 2)
    weights = np.repeat(wu, n_phi)
    lw = log_weight(psi)
    lw = lw - np.max(lw)
    w = weights * np.exp(lw)
    vals = np.einsum("nj,jk,nk->n", psi.conj(), observable, psi).real
    return float(np.sum(w * vals) / np.sum(w))


def born_log_weight(outcomes: np.ndarray):
    def f(psi):
        ov = psi.conj() @ outcomes.T
        with np.errstate(divide="ignore"):
            return np.sum(np.log(np.abs(ov) ** 2), axis=1)

    return f


def single_projector_posterior_mean(target: float, K: float, dim: int) -> float:
    """Exact posterior mean of t = Tr rho |phi><phi| for a one-observable pseudo-likelihood.

    Under the uniform pure-state prior t ~ Beta(1, D-1), and the likelihood
    depends on the state only through t, so the posterior is one-dimensional.
    """

    def dens(t, power):
        return t**power * (1 - t) ** (dim - 2) * np.exp(-0.5 * K * (t - target) ** 2)

    pts = [min(max(target, 0.0), 1.0)]
    z = integrate.quad(dens, 0, 1, args=(0,), points=pts, limit=500, epsabs=0, epsrel=1e-12)[0]
    m1 = integrate.quad(dens, 0, 1, args=(1,), points=pts, limit=500, epsabs=0, epsrel=1e-12)[0]
    return m1 / z
