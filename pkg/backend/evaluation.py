"""
Policy evaluation against the true kernel: oracle solutions, the
stationary-weighted value metric, robustness sweeps over perturbed
deployments, and a tabular Q-learning baseline.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, List, Optional, Tuple

import numpy as np

from backend.bellman import (
    QTable,
    ValueFunction,
    epsilon_greedy,
    exact_backup,
    exact_q,
    iteration_cap,
    policy_evaluation,
    value_iteration,
)
from backend.envs import EnvBundle
from backend.mdp import Policy, induced_chain, stationary_distribution
from backend.schemas import EpsilonSchedule, InnerRiskSpec
from backend.seeding import stream

logger = logging.getLogger(__name__)

LR_EXPONENT = 0.7


@dataclass(frozen=True)
class RobustnessReport:
    labels: List[str]
    values: np.ndarray
    worst: float

    def as_row(self) -> dict:
        row = {label: float(v) for label, v in zip(self.labels, self.values)}
        row["worst"] = self.worst
        return row


@dataclass(frozen=True)
class QLearningResult:
    q: QTable
    policy: Policy
    td_errors: np.ndarray
    snapshots: List[Policy]


def oracle_solve(env: EnvBundle, inner: InnerRiskSpec, theta: float = 1e-6) -> Tuple[ValueFunction, Policy]:
    """Exact value iteration against the true kernel, then the greedy policy."""
    model = env.model
    result = value_iteration(
        exact_backup(model, env.kernel, inner),
        ValueFunction(np.zeros(model.n_states)),
        theta,
        iteration_cap(model.c_bar, model.gamma, theta),
    )
    q = exact_q(model, env.kernel, result.value, inner)
    logger.info("oracle for %s converged in %d iterations", env.name, result.iterations)
    return result.value, epsilon_greedy(q, 0.0)


def policy_value(env: EnvBundle, policy: Policy, inner: InnerRiskSpec, theta: float = 1e-6) -> ValueFunction:
    return policy_evaluation(env.model, env.kernel, policy, inner, theta).value


def stationary_weighted_value(env: EnvBundle, policy: Policy, inner: InnerRiskSpec, theta: float = 1e-6) -> float:
    value = policy_value(env, policy, inner, theta)
    mu = stationary_distribution(induced_chain(env.kernel, policy))
    return float(mu @ value.v)


def deployment_label(env: EnvBundle) -> str:
    key = "p_head" if env.name == "coin_toss" else "tilt"
    return f"{key}={env.params[key]:g}"


def robustness_sweep(policy: Policy, deployments: List[EnvBundle], inner: InnerRiskSpec, theta: float = 1e-6,
                     jobs: int = 1) -> RobustnessReport:
    if not deployments:
        raise ValueError("robustness sweep needs at least one deployment")
    shape = deployments[0].model.cost.shape
    if any(env.model.cost.shape != shape for env in deployments):
        raise ValueError("deployments must share state and action spaces")

    def score(env):
        return stationary_weighted_value(env, policy, inner, theta)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            values = list(pool.map(score, deployments))
    else:
        values = [score(env) for env in deployments]
    values = np.asarray(values)
    return RobustnessReport(labels=[deployment_label(env) for env in deployments], values=values,
                            worst=float(values.max()))


def _default_learning_rate(visits: int) -> float:
    return 1.0 / (1.0 + visits) ** LR_EXPONENT


def q_learning_baseline(env: EnvBundle, steps: int, epsilon: EpsilonSchedule = EpsilonSchedule(),
                        learning_rate: Optional[Callable[[int], float]] = None, seed: int = 0,
                        stage_length: int = 100) -> QLearningResult:
    """
    Watkins Q-learning on costs along one continuing trajectory. The
    exploration rate follows the stage schedule, with a stage every
    `stage_length` steps; a greedy snapshot is kept at each stage end.
    """
    if steps < 1:
        raise ValueError("steps must be at least 1")
    learning_rate = learning_rate or _default_learning_rate
    model, probs = env.model, env.kernel.probs
    n_states, n_actions = model.n_states, model.n_actions
    rng = stream(seed, "q_learning")
    cum_kernel = np.cumsum(probs, axis=2)

    q = np.zeros((n_states, n_actions))
    visits = np.zeros((n_states, n_actions), dtype=np.int64)
    td_errors = np.empty(steps)
    snapshots = []
    s = int(rng.integers(n_states))
    for t in range(steps):
        eps = epsilon.at(t // stage_length + 1)
        if rng.random() < eps:
            a = int(rng.integers(n_actions))
        else:
            a = int(np.argmin(q[s]))
        nxt = min(int(np.searchsorted(cum_kernel[s, a], rng.random(), side="right")), n_states - 1)
        target = model.cost[s, a, nxt] + model.gamma * q[nxt].min()
        eta = learning_rate(int(visits[s, a]))
        td_errors[t] = target - q[s, a]
        q[s, a] += eta * td_errors[t]
        visits[s, a] += 1
        s = nxt
        if (t + 1) % stage_length == 0:
            snapshots.append(epsilon_greedy(QTable(q.copy()), 0.0))

    table = QTable(q)
    return QLearningResult(q=table, policy=epsilon_greedy(table, 0.0), td_errors=td_errors, snapshots=snapshots)
