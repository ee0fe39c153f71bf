"""Named suites of statistical and oracle checks, run by ``shadowbench validate``."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import oracles
from .bayes import BornLikelihood, ChainConfig, FrobeniusShadowLikelihood, bme_expectation, run_chain
from .experiments import canonical_observables
from .hilbert import hermitian_eigenvalues
from .shadow import Observable, Shadow, closest_physical_state, shadow_matrix
from .simulate import RngStream, simulate_dataset, simulate_shot

SUITES = ("haar", "shadow", "prior", "oracle")


@dataclass(frozen=True)
class Check:
    suite: str
    name: str
    statistic: float
    target: float
    tolerance: float
    passed: bool

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (f"{status} {self.suite}/{self.name}: statistic={self.statistic:.6g} "
                f"target={self.target:.6g} tolerance={self.tolerance:.3g}")


def _within(suite, name, stat, target, tol) -> Check:
    return Check(suite, name, float(stat), float(target), float(tol), bool(abs(stat - target) <= tol))


def haar_suite(seed: int, shots: int = 100_000, dim: int = 4) -> list[Check]:
    rng = RngStream(seed, 1)
    psi = np.array([simulate_shot(dim, rng) for _ in range(shots)])
    checks = []
    for j, target in ((0, 2 / (dim + 1)), (1, 1 / (dim + 1))):
        p = np.abs(psi[:, j]) ** 2
        se = p.std(ddof=1) / math.sqrt(shots)
        checks.append(_within("haar", f"mean|<{j}|psi>|^2 (D={dim})", p.mean(), target, 3 * se))
    norms = np.abs(np.einsum("ij,ij->i", psi.conj(), psi).real - 1).max()
    checks.append(Check("haar", "unit norm", norms, 0.0, 1e-12, norms <= 1e-12))
    return checks


def shadow_suite(seed: int, dim: int = 32, m: int = 10) -> list[Check]:
    d = simulate_dataset(dim, m, seed, 0)
    ev = hermitian_eigenvalues(shadow_matrix(d, m))
    count = int(np.sum(np.abs(ev + 1) <= 1e-9))
    checks = [
        Check("shadow", f"eigenvalues at -1 (D={dim}, M={m})", count, dim - m, 0, count >= dim - m),
        _within("shadow", "trace", ev.sum(), 1.0, 1e-10),
    ]
    proj = closest_physical_state(shadow_matrix(d, m))
    mn = hermitian_eigenvalues(proj).min()
    checks.append(Check("shadow", "projected min eigenvalue", mn, 0.0, 1e-10, mn >= -1e-10))
    return checks


def prior_suite(seed: int, dims=(2, 32)) -> list[Check]:
    checks = []
    for dim in dims:
        post = run_chain(BornLikelihood([], dim), ChainConfig(samples=2**10, thin=2**5, seed=seed, stream_id=dim))
        e0 = np.zeros(dim)
        e0[0] = 1
        mean, se = bme_expectation(post, Observable.projector(e0))
        checks.append(_within("prior", f"projector BME (D={dim})", mean, 1 / dim, 3 * se))
    return checks


def oracle_suite(seed: int) -> list[Check]:
    checks = []
    d = simulate_dataset(2, 3, seed, 0)
    obs = canonical_observables(2)[0]
    exact = oracles.bloch_quadrature_mean(oracles.born_log_weight(d.outcomes), obs.as_matrix())
    post = run_chain(BornLikelihood.from_dataset(d), ChainConfig(samples=2**10, thin=2**5, seed=seed, stream_id=2))
    mean, se = bme_expectation(post, obs)
    checks.append(_within("oracle", "D=2 Born posterior vs quadrature", mean, exact, 3 * se))

    gen = np.random.default_rng(seed)
    worst = 0.0
    for trial in range(20):
        dim = int(gen.integers(2, 17))
        data = simulate_dataset(dim, 30, seed, 100 + trial)
        m = int(gen.integers(1, 31))
        dense = oracles.dense_shadow(data.outcomes[:m])
        phi = gen.standard_normal(dim) + 1j * gen.standard_normal(dim)
        phi /= np.linalg.norm(phi)
        sh = Shadow(data, m)
        worst = max(worst, abs(sh.expectation(Observable.projector(phi)) - np.vdot(phi, dense @ phi).real))
        x = gen.standard_normal(dim) + 1j * gen.standard_normal(dim)
        ll = FrobeniusShadowLikelihood(sh, K=2.0).log_likelihood(x)
        worst = max(worst, abs(-ll - oracles.frobenius_sq(oracles.pure_density(x), dense)))
    checks.append(Check("oracle", "matrix-free vs dense max deviation", worst, 0.0, 1e-8, worst <= 1e-8))
    return checks


def run_suite(name: str, seed: int) -> list[Check]:
    fn = {"haar": haar_suite, "shadow": shadow_suite, "prior": prior_suite, "oracle": oracle_suite}[name]
    return fn(seed)
