"""Pure-state Bayesian mean estimation with a preconditioned Crank-Nicolson chain.

States are parameterized by an unnormalized complex vector ``x`` with
rho(x) = x x^dagger / |x|^2 and prior density proportional to
exp(-x^dagger x / 2), i.e. independent N(0, 1) real and imaginary parts.
That prior makes rho(x) Haar-uniform over pure states.

The pCN proposal ``sqrt(1 - beta^2) x + beta w`` is reversible with respect
to this prior, so the Metropolis test needs only likelihood ratios and the
normalizing constant of the posterior is never computed.

Each likelihood offers ``log_likelihood(x)`` for the pure-state chain and
``log_likelihood_density(rho)`` for an explicit density matrix; the latter
keeps the models usable with a mixed-state parameterization.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, DimensionMismatchError
from .shadow import Observable, Shadow
from .simulate import Dataset, RngStream

logger = logging.getLogger(__name__)

BATCHES = 16

# Thinning per likelihood at D = 32 and D = 256.
THIN_DEFAULTS = {
    "born": (2**9, 2**12),
    "frobenius": (2**8, 2**10),
    "observable": (2**10, 2**13),
}
DEFAULT_SAMPLES = 2**10


def auto_K(m_used: int, dim: int) -> float:
    """Weight K = M * D, which makes the pseudo-likelihoods dimension independent."""
    return float(m_used * dim)


def _norm2(x: np.ndarray) -> float:
    return float(x.real @ x.real + x.imag @ x.imag)


class LikelihoodModel:
    kind = "abstract"
    dim: int

    def log_likelihood(self, x: np.ndarray) -> float:
        raise NotImplementedError

    def log_likelihood_density(self, rho: np.ndarray) -> float:
        raise NotImplementedError

    def check_dim(self, x: np.ndarray) -> None:
        if x.shape[-1] != self.dim:
            raise DimensionMismatchError(f"state has dim {x.shape[-1]}, model has dim {self.dim}")


class BornLikelihood(LikelihoodModel):
    """Product of Born probabilities <psi_m|rho|psi_m> over the outcomes."""

    kind = "born"

    def __init__(self, outcomes, dim: int | None = None):
        out = np.asarray(outcomes, dtype=np.complex128)
        if out.ndim == 1 and out.size == 0:
            if dim is None:
                raise DimensionMismatchError("dim is required for an empty outcome set")
            out = out.reshape(0, dim)
        if dim is not None and out.shape[1] != dim:
            raise DimensionMismatchError(f"outcomes have dim {out.shape[1]}, expected {dim}")
        self.dim = out.shape[1]
        self.outcomes = out
        self._bra = np.ascontiguousarray(out.conj())

    @classmethod
    def from_dataset(cls, dataset: Dataset, m_used: int | None = None) -> "BornLikelihood":
        m = dataset.shots if m_used is None else m_used
        return cls(dataset.prefix(m), dataset.dim)

    @property
    def m_used(self) -> int:
        return self.outcomes.shape[0]

    def log_likelihood(self, x: np.ndarray) -> float:
        m = self.outcomes.shape[0]
        if m == 0:
            return 0.0
        ov = self._bra @ x
        with np.errstate(divide="ignore"):
            return float(np.sum(np.log(ov.real**2 + ov.imag**2))) - m * math.log(_norm2(x))

    def log_likelihood_density(self, rho: np.ndarray) -> float:
        p = np.einsum("mj,jk,mk->m", self._bra, rho, self.outcomes).real
        with np.errstate(divide="ignore"):
            return float(np.sum(np.log(np.clip(p, 0.0, None))))


class FrobeniusShadowLikelihood(LikelihoodModel):
    """exp(-K/2 * ||rho - rho_s||_F^2) around the shadow of the first M outcomes.

    For a pure state the distance expands to 1 - 2<x|rho_s|x>/|x|^2 + Tr rho_s^2,
    so only inner products with the outcomes are needed.
    """

    kind = "frobenius"

    def __init__(self, shadow: Shadow, K: float | None = None):
        self.shadow = shadow
        self.dim = shadow.dim
        self.K = auto_K(shadow.m_used, shadow.dim) if K is None else float(K)
        if not self.K > 0:
            raise ConfigError(f"K must be positive, got {self.K}")
        self._bra = np.ascontiguousarray(shadow.outcomes.conj())
        self._scale = shadow.scale
        self.const = shadow.self_overlap

    @classmethod
    def from_dataset(cls, dataset: Dataset, m_used: int, K: float | None = None):
        return cls(Shadow(dataset, m_used), K)

    def log_likelihood(self, x: np.ndarray) -> float:
        ov = self._bra @ x
        q = self._scale * float(np.sum(ov.real**2 + ov.imag**2)) / _norm2(x) - 1.0
        return -0.5 * self.K * (1.0 - 2.0 * q + self.const)

    def log_likelihood_density(self, rho: np.ndarray) -> float:
        purity = float(np.einsum("jk,kj->", rho, rho).real)
        cross = self._scale * float(np.einsum("mj,jk,mk->", self._bra, rho, self.shadow.outcomes).real)
        cross -= float(np.trace(rho).real)
        return -0.5 * self.K * (purity - 2.0 * cross + self.const)


class ObservableLikelihood(LikelihoodModel):
    """exp(-K/2 * sum_n (Tr rho Lambda_n - target_n)^2) over a set of observables."""

    kind = "observable"

    def __init__(self, observables, targets, K: float):
        observables = list(observables)
        targets = np.asarray(targets, dtype=float)
        if not observables:
            raise ConfigError("observable-oriented likelihood needs at least one observable")
        if targets.shape != (len(observables),):
            raise ConfigError("need exactly one target value per observable")
        self.K = float(K)
        if not self.K > 0:
            raise ConfigError(f"K must be positive, got {self.K}")
        self.dim = observables[0].dim
        for obs in observables:
            obs.check_dim(self.dim)
        self.observables = observables
        self.targets = targets
        self._proj_idx = [i for i, o in enumerate(observables) if o.is_projector]
        self._dense_idx = [i for i, o in enumerate(observables) if not o.is_projector]
        if self._proj_idx:
            self._phi_bra = np.array([observables[i].vector.conj() for i in self._proj_idx])
            self._proj_targets = targets[self._proj_idx]
        self._dense = [(observables[i].matrix, targets[i]) for i in self._dense_idx]

    @classmethod
    def from_shadow(cls, shadow: Shadow, observables, K: float | None = None):
        """Targets are the shadow estimates of the same observables."""
        observables = list(observables)
        targets = [shadow.expectation(o) for o in observables]
        K = auto_K(shadow.m_used, shadow.dim) if K is None else K
        return cls(observables, targets, K)

    def log_likelihood(self, x: np.ndarray) -> float:
        n2 = _norm2(x)
        sq = 0.0
        if self._proj_idx:
            ov = self._phi_bra @ x
            r = (ov.real**2 + ov.imag**2) / n2 - self._proj_targets
            sq += float(r @ r)
        for h, target in self._dense:
            sq += (float(np.vdot(x, h @ x).real) / n2 - target) ** 2
        return -0.5 * self.K * sq

    def log_likelihood_density(self, rho: np.ndarray) -> float:
        vals = np.array([o.expectation_density(rho) for o in self.observables])
        return -0.5 * self.K * float(np.sum((vals - self.targets) ** 2))


def log_likelihood(model: LikelihoodModel, x) -> float:
    x = np.asarray(x, dtype=np.complex128)
    model.check_dim(x)
    return model.log_likelihood(x)


@dataclass(frozen=True)
class ChainConfig:
    """Settings for one pCN Metropolis chain.

    ``beta`` is the initial step size when ``adapt_beta`` is set, otherwise
    the fixed step size.  Adaptation only happens during burn-in, and ``beta``
    is frozen afterwards so the retained chain is a proper Markov chain.
    ``burn_in=None`` means a quarter of ``samples * thin``.
    """

    samples: int = DEFAULT_SAMPLES
    thin: int = 2**9
    burn_in: int | None = None
    beta: float = 0.5
    adapt_beta: bool = True
    target_acceptance: float = 0.234
    adapt_interval: int = 100
    seed: int = 0
    stream_id: int = 0

    def __post_init__(self):
        if self.samples < 1 or self.thin < 1:
            raise ConfigError("samples and thin must be positive")
        if self.burn_in is not None and self.burn_in < 0:
            raise ConfigError("burn_in must be nonnegative")
        if not 0.0 < self.beta <= 1.0:
            raise ConfigError(f"beta must lie in (0, 1], got {self.beta}")
        if not 0.0 < self.target_acceptance < 1.0:
            raise ConfigError("target_acceptance must lie in (0, 1)")
        if self.adapt_interval < 1:
            raise ConfigError("adapt_interval must be positive")

    @property
    def burn_in_steps(self) -> int:
        if self.burn_in is None:
            return (self.samples * self.thin) // 4
        return self.burn_in

    @classmethod
    def default_for(cls, kind: str, dim: int, **overrides) -> "ChainConfig":
        """Thinning used for the given likelihood kind at the nearest of D = 32, 256."""
        small, large = THIN_DEFAULTS[kind]
        thin = small if dim <= 90 else large
        return replace(cls(thin=thin), **overrides)


@dataclass(frozen=True, eq=False)
class PosteriorSamples:
    samples: np.ndarray
    acceptance_rate: float
    config: ChainConfig
    loglik_trace: np.ndarray
    beta: float
    beta_trace: np.ndarray = field(default_factory=lambda: np.empty(0))
    warnings: tuple[str, ...] = ()

    @property
    def dim(self) -> int:
        return self.samples.shape[1]

    def diagnostics(self) -> dict:
        return {
            "acceptance_rate": self.acceptance_rate,
            "beta": self.beta,
            "beta_trace": [float(b) for b in self.beta_trace],
            "samples": self.config.samples,
            "thin": self.config.thin,
            "burn_in": self.config.burn_in_steps,
            "warnings": list(self.warnings),
        }


def pcn_propose(x: np.ndarray, beta: float, rng: RngStream) -> np.ndarray:
    """Prior-reversible proposal sqrt(1 - beta^2) x + beta w, w ~ CN(0, 2I)."""
    w = rng.complex_normal(x.size)
    return math.sqrt(1.0 - beta * beta) * x + beta * w


_CHUNK = 4096


def run_chain(model: LikelihoodModel, config: ChainConfig) -> PosteriorSamples:
    """Metropolis chain with pCN proposals, started from a prior draw.

    After ``config.burn_in_steps`` steps, every ``thin``-th state is kept
    until ``samples`` states are retained.  Proposal noise and acceptance
    uniforms are drawn in blocks from the chain's own stream, so results
    depend only on the configuration.
    """
    dim = model.dim
    rng = RngStream(config.seed, config.stream_id)
    gen = rng.generator
    loglik = model.log_likelihood

    x = rng.complex_normal(dim).copy()
    cur = loglik(x)
    beta = config.beta
    a = math.sqrt(1.0 - beta * beta)

    burn = config.burn_in_steps
    total = burn + config.samples * config.thin
    thin = config.thin
    samples = np.empty((config.samples, dim), dtype=np.complex128)
    ll_trace = np.empty(config.samples)
    betas = []

    window_acc = 0
    sample_acc = 0
    kept = 0
    idx = _CHUNK
    noise = logu = None
    for step in range(total):
        if idx == _CHUNK:
            noise = gen.standard_normal((_CHUNK, 2 * dim)).view(np.complex128)
            logu = np.log(gen.random(_CHUNK))
            idx = 0
        prop = a * x + beta * noise[idx]
        new = loglik(prop)
        # compare in log space; an improving move is accepted without a draw
        if new >= cur or logu[idx] < new - cur:
            x = prop
            cur = new
            if step < burn:
                window_acc += 1
            else:
                sample_acc += 1
        idx += 1

        if step < burn:
            if config.adapt_beta and (step + 1) % config.adapt_interval == 0:
                rate = window_acc / config.adapt_interval
                beta = min(1.0, max(1e-4, beta * math.exp(rate - config.target_acceptance)))
                a = math.sqrt(1.0 - beta * beta)
                betas.append(beta)
                window_acc = 0
        elif (step + 1 - burn) % thin == 0:
            samples[kept] = x
            ll_trace[kept] = cur
            kept += 1

    rate = sample_acc / (config.samples * thin)
    warnings = []
    if rate < 0.01:
        msg = f"low acceptance rate {rate:.4f} (beta={beta:.3g})"
        logger.warning(msg)
        warnings.append(msg)
    samples.setflags(write=False)
    return PosteriorSamples(
        samples=samples,
        acceptance_rate=rate,
        config=config,
        loglik_trace=ll_trace,
        beta=beta,
        beta_trace=np.asarray(betas),
        warnings=tuple(warnings),
    )


def batch_means(values: np.ndarray, batches: int = BATCHES) -> tuple[float, float]:
    """Mean and batch-means standard error of a correlated sequence."""
    values = np.asarray(values, dtype=float)
    mean = float(values.mean())
    nb = min(batches, values.size)
    if nb < 2:
        return mean, float("nan")
    bm = np.array([b.mean() for b in np.array_split(values, nb)])
    return mean, float(bm.std(ddof=1) / math.sqrt(nb))


def bme_expectation(s: PosteriorSamples, obs: Observable) -> tuple[float, float]:
    """Bayesian mean of Tr rho Lambda with its batch-means standard error."""
    obs.check_dim(s.dim)
    return batch_means(obs.expectation(s.samples))


def overlap_with_shadow(s: PosteriorSamples, dataset: Dataset, m_used: int) -> float:
    """Tr rho_B rho_s, averaged over the retained samples without dense matrices."""
    shadow = Shadow(dataset, m_used)
    return float(np.mean(shadow.quadratic_form(s.samples)))


def bayesian_mean_matrix(s: PosteriorSamples) -> np.ndarray:
    """Dense rho_B (diagnostic use only)."""
    x = np.asarray(s.samples)
    n2 = np.einsum("rj,rj->r", x.conj(), x).real
    return (x.T / n2) @ x.conj() / x.shape[0]
