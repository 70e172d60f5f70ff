"""
Dirichlet posteriors over transition kernels: priors, conjugate updates,
kernel sampling and the posterior L1 accuracy functional.
"""
import logging
from dataclasses import dataclass
from typing import List

import numpy as np

from backend.mdp import TransitionCounts, TransitionKernel, _frozen, validate_kernel
from backend.risk import beta_batch
from backend.schemas import CVaRRisk, OuterRiskSpec
from backend.seeding import stream

logger = logging.getLogger(__name__)

PRIOR_FLOOR = 1e-6


@dataclass(frozen=True)
class DirichletPosterior:
    alpha: np.ndarray

    def __post_init__(self):
        alpha = _frozen(self.alpha)
        if alpha.ndim != 3 or alpha.shape[0] != alpha.shape[2]:
            raise ValueError(f"posterior table must have shape (S, A, S), got {alpha.shape}")
        if not np.all(np.isfinite(alpha)) or np.any(alpha <= 0):
            raise ValueError("Dirichlet parameters must be finite and strictly positive")
        object.__setattr__(self, "alpha", alpha)

    @property
    def n_states(self) -> int:
        return self.alpha.shape[0]

    @property
    def n_actions(self) -> int:
        return self.alpha.shape[1]

    @property
    def row_mass(self) -> np.ndarray:
        return self.alpha.sum(axis=2)

    @property
    def a_bar0(self) -> float:
        """Largest row mass."""
        return float(self.row_mass.max())

    @property
    def o_alpha(self) -> float:
        """Smallest row mass (the confidence of the posterior)."""
        return float(self.row_mass.min())


@dataclass(frozen=True)
class PosteriorAccuracy:
    per_sa: np.ndarray
    max_value: float
    mc_samples: int
    std_error: float


def uniform_prior(n_states: int, n_actions: int) -> DirichletPosterior:
    if n_states < 1 or n_actions < 1:
        raise ValueError("an MDP needs at least one state and one action")
    return DirichletPosterior(np.full((n_states, n_actions, n_states), 1.0 / n_states))


def informative_prior(pmf_per_sa, mass: float) -> DirichletPosterior:
    pmf = np.asarray(pmf_per_sa, dtype=float)
    if mass <= 0:
        raise ValueError("prior mass must be positive")
    validate_kernel(TransitionKernel(pmf)).raise_if_invalid()
    return DirichletPosterior(np.maximum(mass * pmf, PRIOR_FLOOR))


def posterior_update(post: DirichletPosterior, counts: TransitionCounts) -> DirichletPosterior:
    if counts.counts.shape != post.alpha.shape:
        raise ValueError(f"counts shape {counts.counts.shape} does not match posterior {post.alpha.shape}")
    return DirichletPosterior(post.alpha + counts.counts)


def posterior_mean(post: DirichletPosterior) -> TransitionKernel:
    return TransitionKernel(post.alpha / post.row_mass[:, :, None])


def _dirichlet_rows(rng: np.random.Generator, alpha_row: np.ndarray, n: int) -> np.ndarray:
    """
    n draws from Dirichlet(alpha_row) as normalized Gamma variates. Shapes
    below one use G(a + 1) * U^(1/a), combined in log space so that tiny
    shapes underflow to an exact zero instead of a 0/0.
    """
    small = alpha_row < 1.0
    shape = np.where(small, alpha_row + 1.0, alpha_row)
    g = rng.standard_gamma(shape, size=(n, alpha_row.size))
    u = rng.random((n, alpha_row.size))
    with np.errstate(divide="ignore"):
        log_g = np.log(g) + np.where(small, np.log(u) / alpha_row, 0.0)
    log_g -= log_g.max(axis=1, keepdims=True)
    w = np.exp(log_g)
    return w / w.sum(axis=1, keepdims=True)


def sample_kernel_array(post: DirichletPosterior, n: int, seed: int, stage: int = 0,
                        purpose: str = "kernels") -> np.ndarray:
    """n sampled kernels as one (n, S, A, S) array; each (s, a) row has its own stream."""
    if n < 1:
        raise ValueError("need at least one kernel sample")
    out = np.empty((n,) + post.alpha.shape)
    for s in range(post.n_states):
        for a in range(post.n_actions):
            rng = stream(seed, purpose, stage, s, a)
            out[:, s, a, :] = _dirichlet_rows(rng, post.alpha[s, a], n)
    return out


def sample_kernels(post: DirichletPosterior, n: int, seed: int, stage: int = 0) -> List[TransitionKernel]:
    return [TransitionKernel(p) for p in sample_kernel_array(post, n, seed, stage)]


def posterior_l1_accuracy(post: DirichletPosterior, reference: TransitionKernel, outer: OuterRiskSpec,
                          n: int = 2000, seed: int = 0) -> PosteriorAccuracy:
    """
    Monte Carlo estimate, per (s, a), of the outer risk of the L1 distance
    between a posterior draw and the reference row.
    """
    if n < 2:
        raise ValueError("accuracy estimate needs at least two samples")
    if reference.probs.shape != post.alpha.shape:
        raise ValueError("reference kernel does not match the posterior")
    draws = sample_kernel_array(post, n, seed, purpose="accuracy")
    l1 = np.abs(draws - reference.probs[None]).sum(axis=3)
    per_sa = beta_batch(outer, l1)
    # tail estimates use roughly alpha * n effective samples
    effective = n * (outer.alpha if isinstance(outer, CVaRRisk) else 1.0)
    std_error = float(l1.std(axis=0, ddof=1).max() / np.sqrt(max(effective, 1.0)))
    return PosteriorAccuracy(per_sa=_frozen(per_sa), max_value=float(per_sa.max()), mc_samples=n,
                             std_error=std_error)
