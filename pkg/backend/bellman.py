"""
Risk Bellman operators.

exact_q evaluates the inner risk against a known kernel (a point-mass
posterior, where the outer measure is the identity). estimate_q samples N
kernels from a Dirichlet posterior, evaluates the inner risk under each and
aggregates the N values with the outer measure. value_iteration and
policy_evaluation iterate either backup to a sup-norm tolerance.
"""
import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from backend.bayes import DirichletPosterior, sample_kernel_array
from backend.errors import IterationCapExceeded
from backend.mdp import MdpModel, Policy, TransitionKernel, _frozen
from backend.risk import beta_batch, risk_batch, sigma_batch
from backend.schemas import InnerRiskSpec, OuterRiskSpec

logger = logging.getLogger(__name__)

BOUND_SLACK = 1e-9
CAP_MARGIN = 4


@dataclass(frozen=True)
class ValueFunction:
    v: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "v", _frozen(np.ravel(self.v)))

    def within_bound(self, model: MdpModel) -> bool:
        return float(np.max(np.abs(self.v), initial=0.0)) <= model.value_bound + BOUND_SLACK


@dataclass(frozen=True)
class QTable:
    q: np.ndarray

    def __post_init__(self):
        q = _frozen(self.q)
        if q.ndim != 2:
            raise ValueError(f"Q table must have shape (S, A), got {q.shape}")
        object.__setattr__(self, "q", q)

    def within_bound(self, model: MdpModel) -> bool:
        limit = model.c_bar + model.gamma * model.value_bound
        return float(np.max(np.abs(self.q), initial=0.0)) <= limit + BOUND_SLACK


@dataclass(frozen=True)
class IterationResult:
    value: ValueFunction
    iterations: int
    final_residual: float
    q: Optional[QTable] = None


Backup = Callable[[ValueFunction], QTable]


def _targets(model: MdpModel, v: ValueFunction) -> np.ndarray:
    """c(s, a, s') + gamma * v(s') as an (S, A, S) table."""
    if v.v.size != model.n_states:
        raise ValueError(f"value function has {v.v.size} entries, model has {model.n_states} states")
    return model.cost + model.gamma * v.v[None, None, :]


def exact_q(model: MdpModel, kernel: TransitionKernel, v: ValueFunction, inner: InnerRiskSpec) -> QTable:
    if kernel.probs.shape != model.cost.shape:
        raise ValueError("kernel does not match the model")
    return QTable(risk_batch(inner, _targets(model, v), kernel.probs))


def q_from_samples(model: MdpModel, samples: np.ndarray, v: ValueFunction, inner: InnerRiskSpec,
                  outer: OuterRiskSpec) -> QTable:
    """Q from a frozen (N, S, A, S) kernel sample."""
    sigmas = sigma_batch(inner, _targets(model, v), samples)
    return QTable(beta_batch(outer, sigmas))


def estimate_q(model: MdpModel, post: DirichletPosterior, v: ValueFunction, inner: InnerRiskSpec,
               outer: OuterRiskSpec, n: int, seed: int,
               stage: int = 0) -> QTable:
    samples = sample_kernel_array(post, n, seed, stage)
    return q_from_samples(model, samples, v, inner, outer)


def exact_backup(model: MdpModel, kernel: TransitionKernel, inner: InnerRiskSpec) -> Backup:
    return lambda v: exact_q(model, kernel, v, inner)


def estimated_backup(model: MdpModel, post: DirichletPosterior, inner: InnerRiskSpec,
                     outer: OuterRiskSpec, n: int, seed: int,
                     stage: int = 0) -> Backup:
    """The estimated operator with its kernel sample drawn once and reused."""
    samples = sample_kernel_array(post, n, seed, stage)
    return lambda v: q_from_samples(model, samples, v, inner, outer)


def optimality_step(q: QTable) -> ValueFunction:
    return ValueFunction(q.q.min(axis=1))


def iteration_cap(c_bar: float, gamma: float, theta: float) -> int:
    ratio = 2.0 * c_bar / ((1.0 - gamma) ** 2 * theta)
    k = math.ceil(math.log(ratio) / math.log(1.0 / gamma)) if ratio > 1.0 else 1
    return CAP_MARGIN * max(k, 1)


def value_iteration(backup: Backup, v0: ValueFunction, theta: float, cap: int) -> IterationResult:
    if theta <= 0:
        raise ValueError("theta must be positive")
    v = v0
    residual = math.inf
    for k in range(1, cap + 1):
        q = backup(v)
        v_next = optimality_step(q)
        residual = float(np.max(np.abs(v_next.v - v.v), initial=0.0))
        v = v_next
        if residual < theta:
            logger.debug("value iteration converged in %d iterations (residual %.3e)", k, residual)
            return IterationResult(value=v, iterations=k, final_residual=residual, q=q)
    logger.error("value iteration exceeded %d iterations (residual %.3e)", cap, residual)
    raise IterationCapExceeded(cap, residual)


def policy_evaluation(model: MdpModel, kernel: TransitionKernel, policy: Policy, inner: InnerRiskSpec,
                      theta: float, cap: Optional[int] = None) -> IterationResult:
    if theta <= 0:
        raise ValueError("theta must be positive")
    if policy.probs.shape != model.cost.shape[:2]:
        raise ValueError("policy does not match the model")
    cap = cap or iteration_cap(model.c_bar, model.gamma, theta)
    v = ValueFunction(np.zeros(model.n_states))
    residual = math.inf
    for k in range(1, cap + 1):
        q = exact_q(model, kernel, v, inner)
        v_next = ValueFunction(np.sum(policy.probs * q.q, axis=1))
        residual = float(np.max(np.abs(v_next.v - v.v), initial=0.0))
        v = v_next
        if residual < theta:
            return IterationResult(value=v, iterations=k, final_residual=residual, q=q)
    raise IterationCapExceeded(cap, residual)


def epsilon_greedy(q: QTable, epsilon: float) -> Policy:
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError(f"epsilon must lie in [0, 1], got {epsilon}")
    n_states, n_actions = q.q.shape
    other = epsilon / n_actions
    probs = np.full((n_states, n_actions), other)
    # argmin returns the lowest index on ties
    best = np.argmin(q.q, axis=1)
    probs[np.arange(n_states), best] = 1.0 - (n_actions - 1) * other
    return Policy(probs)
