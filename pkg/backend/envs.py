"""
Benchmark environments: coin toss and inventory management, their
deployment perturbations, and the published oracle policy tables used as
reference data.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from backend.mdp import MdpModel, TransitionKernel, _frozen, validate_kernel
from backend.schemas import EnvConfig

logger = logging.getLogger(__name__)

DEFAULT_GAMMA = 0.9
COIN_FLIPS = 10
COIN_ACTIONS = (-1, 0, 1)
COIN_P_HEAD = 0.6
INVENTORY_DEFAULTS = {"n": 10, "k": 3.0, "h": 1.0, "p": 2.0, "tilt": 0.0}


@dataclass(frozen=True)
class EnvBundle:
    name: str
    model: MdpModel
    kernel: TransitionKernel
    state_labels: np.ndarray
    action_labels: np.ndarray
    params: Dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "state_labels", _frozen(self.state_labels, dtype=np.int64))
        object.__setattr__(self, "action_labels", _frozen(self.action_labels, dtype=np.int64))
        if len(set(self.state_labels.tolist())) != self.model.n_states:
            raise ValueError("state labels must be distinct, one per state")
        validate_kernel(self.kernel, self.model).raise_if_invalid()

    def state_index(self, label: int) -> int:
        return int(np.flatnonzero(self.state_labels == label)[0])


def binomial_pmf(n: int, p: float) -> np.ndarray:
    pmf = np.array([math.comb(n, i) * p**i * (1.0 - p) ** (n - i) for i in range(n + 1)])
    return pmf / pmf.sum()


def build_coin_toss(p_head: float = COIN_P_HEAD, gamma: float = DEFAULT_GAMMA) -> EnvBundle:
    """
    Guess whether the next count of heads out of ten is higher (+1), lower (-1)
    or abstain (0). Betting costs the stake on a tie.
    """
    if not 0.0 < p_head < 1.0:
        raise ValueError(f"p_head must lie in (0, 1), got {p_head}")
    n_states = COIN_FLIPS + 1
    x = np.arange(n_states)
    a = np.array(COIN_ACTIONS, dtype=float)
    up = (x[:, None] < x[None, :]).astype(float)
    down = (x[:, None] > x[None, :]).astype(float)
    tie = (x[:, None] == x[None, :]).astype(float)
    cost = -a[None, :, None] * up[:, None, :] + a[None, :, None] * down[:, None, :] \
        + np.abs(a)[None, :, None] * tie[:, None, :]
    kernel = np.broadcast_to(binomial_pmf(COIN_FLIPS, p_head), (n_states, len(COIN_ACTIONS), n_states))
    return EnvBundle(
        name="coin_toss",
        model=MdpModel(cost, gamma),
        kernel=TransitionKernel(kernel),
        state_labels=x,
        action_labels=np.array(COIN_ACTIONS),
        params={"p_head": p_head},
    )


def exponential_tilt(n: int, theta: float) -> np.ndarray:
    """Demand pmf over 0..n proportional to exp(theta * (i - n / 2))."""
    logits = theta * (np.arange(n + 1) - n / 2.0)
    w = np.exp(logits - logits.max())
    return w / w.sum()


def inventory_levels(n: int) -> np.ndarray:
    """Post-order stock max(a, s+) for every (state, action)."""
    s = np.arange(-n, n + 1)
    a = np.arange(n + 1)
    return np.maximum(a[None, :], np.maximum(s, 0)[:, None])


def build_inventory(n: int = 10, k: float = 3.0, h: float = 1.0, p: float = 2.0, tilt: float = 0.0,
                    gamma: float = DEFAULT_GAMMA) -> EnvBundle:
    """
    Stock levels -n..n (negative is backlog), order-up-to actions 0..n and
    demand on 0..n. The next level is max(a, s+) - D.
    """
    if n < 1:
        raise ValueError("inventory size must be at least 1")
    n_states = 2 * n + 1
    levels = inventory_levels(n)
    demand = exponential_tilt(n, tilt)
    nxt = levels[:, :, None] - np.arange(n + 1)[None, None, :]
    assert nxt.min() >= -n and nxt.max() <= n

    kernel = np.zeros((n_states, n + 1, n_states))
    s_idx, a_idx, d_idx = np.indices(nxt.shape)
    np.add.at(kernel, (s_idx, a_idx, nxt + n), demand[d_idx])

    s = np.arange(-n, n + 1)
    a = np.arange(n + 1)
    ordered = (a[None, :] - np.maximum(s, 0)[:, None]) > 0
    s_next = np.arange(-n, n + 1)
    cost = k * ordered[:, :, None] + h * np.maximum(s_next, 0)[None, None, :] \
        + p * np.maximum(-s_next, 0)[None, None, :]
    return EnvBundle(
        name="inventory",
        model=MdpModel(cost.astype(float), gamma),
        kernel=TransitionKernel(kernel),
        state_labels=s,
        action_labels=a,
        params={"n": n, "k": k, "h": h, "p": p, "tilt": tilt},
    )


def build_env(cfg: EnvConfig) -> EnvBundle:
    gamma = cfg.gamma if cfg.gamma is not None else DEFAULT_GAMMA
    if cfg.preset == "coin_toss":
        return build_coin_toss(cfg.p_head if cfg.p_head is not None else COIN_P_HEAD, gamma)
    params = {key: getattr(cfg, key) if getattr(cfg, key) is not None else default
              for key, default in INVENTORY_DEFAULTS.items()}
    return build_inventory(gamma=gamma, **params)


def deployment_envs(cfg: EnvConfig, grid: Optional[Dict[str, List[float]]]) -> List[EnvBundle]:
    """The training environment with one parameter replaced per grid value."""
    if not grid:
        return []
    (key, values), = grid.items()
    if (cfg.preset == "coin_toss") != (key == "p_head"):
        raise ValueError(f"grid key '{key}' does not perturb preset '{cfg.preset}'")
    return [build_env(cfg.model_copy(update={key: value})) for value in values]


def effective_actions(env: EnvBundle, actions: np.ndarray) -> np.ndarray:
    """
    Action labels normalized for comparison: for inventory every order-up-to
    target at or below the current stock is the same decision, reported as the
    post-order level.
    """
    labels = env.action_labels[np.asarray(actions, dtype=int)]
    if env.name != "inventory":
        return labels
    return np.maximum(labels, np.maximum(env.state_labels, 0))


# --- published oracle tables ------------------------------------------------

def _coin_row(cuts):
    """cuts = (last state betting +1, first state betting -1)."""
    up_to, down_from = cuts
    return np.array([1 if s <= up_to else (-1 if s >= down_from else 0) for s in range(COIN_FLIPS + 1)])


def _inventory_row(threshold: int, target: int = 8, n: int = 10):
    return np.array([target if s <= threshold else max(s, 0) for s in range(-n, n + 1)])


COIN_TOSS_TABLE = {
    "mean": _coin_row((5, 7)),
    "cvar_0.5": _coin_row((4, 8)),
    "cvar_0.2": _coin_row((1, 8)),
}

INVENTORY_TABLE = {
    "mean": _inventory_row(2),
    "cvar_0.5": _inventory_row(4),
    "cvar_0.2": _inventory_row(5),
}

# Oracle rows reported for two distributionally robust baselines; they are not trained here.
INVENTORY_BASELINE_ROWS = {
    "kl_drrl": _inventory_row(4, target=7),
    "wass_drrl": np.array([8] * 12 + [7, 8] + list(range(4, 11))),
}
