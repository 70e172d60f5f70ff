"""
Finite MDP data model: cost tables, transition kernels, policies, trajectories
and the policy-induced state chain with its stationary distribution.

States and actions are dense indices 0..n-1; environment builders own the
mapping to domain labels.
"""
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Union

import numpy as np

from backend.errors import InvalidStart, KernelValidationError, NegativeEntry, NonConvergence, RowSumMismatch
from backend.seeding import stream

logger = logging.getLogger(__name__)

ROW_TOL = 1e-12
STATIONARY_CAP = 10**6

SeedLike = Union[int, np.random.Generator]


def _frozen(arr, dtype=float) -> np.ndarray:
    out = np.array(arr, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


def as_generator(seed: SeedLike, purpose: str) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return stream(int(seed), purpose)


@dataclass(frozen=True)
class MdpModel:
    cost: np.ndarray
    gamma: float
    c_bar: float = field(init=False)

    def __post_init__(self):
        cost = _frozen(self.cost)
        if cost.ndim != 3 or cost.shape[0] != cost.shape[2]:
            raise ValueError(f"cost table must have shape (S, A, S), got {cost.shape}")
        if not np.all(np.isfinite(cost)):
            raise ValueError("cost table contains non-finite entries")
        if not 0.0 < self.gamma < 1.0:
            raise ValueError(f"discount must lie in (0, 1), got {self.gamma}")
        object.__setattr__(self, "cost", cost)
        object.__setattr__(self, "gamma", float(self.gamma))
        object.__setattr__(self, "c_bar", float(np.max(np.abs(cost))) if cost.size else 0.0)

    @property
    def n_states(self) -> int:
        return self.cost.shape[0]

    @property
    def n_actions(self) -> int:
        return self.cost.shape[1]

    @property
    def value_bound(self) -> float:
        """Sup-norm bound C̄/(1-γ) on any value function."""
        return self.c_bar / (1.0 - self.gamma)


@dataclass(frozen=True)
class TransitionKernel:
    probs: np.ndarray

    def __post_init__(self):
        probs = _frozen(self.probs)
        if probs.ndim != 3 or probs.shape[0] != probs.shape[2]:
            raise ValueError(f"kernel must have shape (S, A, S), got {probs.shape}")
        object.__setattr__(self, "probs", probs)

    @property
    def n_states(self) -> int:
        return self.probs.shape[0]

    @property
    def n_actions(self) -> int:
        return self.probs.shape[1]


@dataclass(frozen=True)
class Policy:
    probs: np.ndarray

    def __post_init__(self):
        probs = _frozen(self.probs)
        if probs.ndim != 2:
            raise ValueError(f"policy must have shape (S, A), got {probs.shape}")
        object.__setattr__(self, "probs", probs)

    @property
    def n_states(self) -> int:
        return self.probs.shape[0]

    @property
    def n_actions(self) -> int:
        return self.probs.shape[1]

    @classmethod
    def uniform(cls, n_states: int, n_actions: int) -> "Policy":
        return cls(np.full((n_states, n_actions), 1.0 / n_actions))

    @classmethod
    def deterministic(cls, actions, n_actions: int) -> "Policy":
        actions = np.asarray(actions, dtype=int)
        probs = np.zeros((actions.size, n_actions))
        probs[np.arange(actions.size), actions] = 1.0
        return cls(probs)

    def greedy_actions(self) -> np.ndarray:
        return np.argmax(self.probs, axis=1)


@dataclass(frozen=True)
class Trajectory:
    start_state: int
    steps: np.ndarray
    n_states: int
    n_actions: int

    def __post_init__(self):
        steps = _frozen(np.reshape(self.steps, (-1, 3)), dtype=np.int64)
        object.__setattr__(self, "steps", steps)

    def __len__(self):
        return self.steps.shape[0]

    @property
    def last_state(self) -> int:
        return int(self.steps[-1, 2]) if len(self) else int(self.start_state)

    def is_chained(self) -> bool:
        if not len(self):
            return True
        if self.steps[0, 0] != self.start_state:
            return False
        return bool(np.all(self.steps[1:, 0] == self.steps[:-1, 2]))


@dataclass(frozen=True)
class TransitionCounts:
    counts: np.ndarray

    def __post_init__(self):
        counts = _frozen(self.counts, dtype=np.int64)
        if np.any(counts < 0):
            raise ValueError("transition counts must be nonnegative")
        object.__setattr__(self, "counts", counts)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @classmethod
    def zeros(cls, n_states: int, n_actions: int) -> "TransitionCounts":
        return cls(np.zeros((n_states, n_actions, n_states), dtype=np.int64))

    def __add__(self, other: "TransitionCounts") -> "TransitionCounts":
        return TransitionCounts(self.counts + other.counts)


@dataclass(frozen=True)
class StateChain:
    probs: np.ndarray

    def __post_init__(self):
        probs = _frozen(self.probs)
        if probs.ndim != 2 or probs.shape[0] != probs.shape[1]:
            raise ValueError(f"chain must be square, got {probs.shape}")
        object.__setattr__(self, "probs", probs)


@dataclass(frozen=True)
class KernelReport:
    violations: List[object]

    @property
    def ok(self) -> bool:
        return not self.violations

    def raise_if_invalid(self):
        if self.violations:
            raise KernelValidationError(self.violations)


def row_violations(rows: np.ndarray, tol: float = ROW_TOL) -> List[object]:
    """Check every trailing-axis row of an (S, A, S) or (S, S) table."""
    table = rows if rows.ndim == 3 else rows[:, None, :]
    found = []
    neg = np.argwhere(table < 0)
    for s, a, t in neg:
        found.append(NegativeEntry(int(s), int(a), int(t), float(table[s, a, t])))
    deviation = np.abs(table.sum(axis=2) - 1.0)
    for s, a in np.argwhere(deviation > tol):
        found.append(RowSumMismatch(int(s), int(a), float(deviation[s, a])))
    return found


def validate_kernel(kernel: TransitionKernel, model: Optional[MdpModel] = None) -> KernelReport:
    if model is not None and kernel.probs.shape != model.cost.shape:
        raise ValueError(f"kernel shape {kernel.probs.shape} does not match model {model.cost.shape}")
    return KernelReport(row_violations(kernel.probs))


def simulate(kernel: TransitionKernel, policy: Policy, start: int, steps: int, seed: SeedLike) -> Trajectory:
    """Roll the Markov chain forward for `steps` transitions."""
    n_states = kernel.n_states
    if not 0 <= start < n_states:
        raise InvalidStart(start, n_states)
    if steps < 1:
        raise ValueError("steps must be at least 1")
    rng = as_generator(seed, "rollout")

    cum_policy = np.cumsum(policy.probs, axis=1)
    cum_kernel = np.cumsum(kernel.probs, axis=2)
    draws = rng.random((steps, 2))
    out = np.empty((steps, 3), dtype=np.int64)
    s = int(start)
    last_a = policy.n_actions - 1
    last_s = n_states - 1
    for t in range(steps):
        a = min(int(np.searchsorted(cum_policy[s], draws[t, 0], side="right")), last_a)
        nxt = min(int(np.searchsorted(cum_kernel[s, a], draws[t, 1], side="right")), last_s)
        out[t] = (s, a, nxt)
        s = nxt
    return Trajectory(start_state=int(start), steps=out, n_states=n_states, n_actions=kernel.n_actions)


def count_transitions(traj: Trajectory) -> TransitionCounts:
    counts = np.zeros((traj.n_states, traj.n_actions, traj.n_states), dtype=np.int64)
    if len(traj):
        np.add.at(counts, (traj.steps[:, 0], traj.steps[:, 1], traj.steps[:, 2]), 1)
    return TransitionCounts(counts)


def induced_chain(kernel: TransitionKernel, policy: Policy) -> StateChain:
    return StateChain(np.einsum("sa,sat->st", policy.probs, kernel.probs))


def stationary_distribution(chain: StateChain, tol: float = 1e-10, cap: int = STATIONARY_CAP) -> np.ndarray:
    """
    Stationary vector of the chain by damped power iteration from the uniform
    vector. The lazy chain (I + P) / 2 shares P's stationary vectors and is
    aperiodic; the Cesàro average of the iterates is tracked as a second
    candidate for chains where the iterate itself stalls.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    P = chain.probs
    n = P.shape[0]
    x = np.full(n, 1.0 / n)
    running = x.copy()
    residual = np.inf
    for k in range(1, cap + 1):
        xp = x @ P
        residual = float(np.abs(xp - x).sum())
        if residual <= tol:
            return _normalized(x)
        avg = running / k
        avg_residual = float(np.abs(avg @ P - avg).sum())
        if avg_residual <= tol:
            return _normalized(avg)
        x = 0.5 * (x + xp)
        running += x
    logger.warning("stationary distribution stalled at residual %.3e", residual)
    raise NonConvergence(residual, cap)


def _normalized(x: np.ndarray) -> np.ndarray:
    x = np.clip(x, 0.0, None)
    return x / x.sum()
