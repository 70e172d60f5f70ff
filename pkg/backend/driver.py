"""
Stage-wise Bayesian dynamic programming.

Each stage rolls the current policy forward on the true environment, folds
the observed transitions into the Dirichlet posterior, runs value iteration
with the estimated risk backup (warm-started from the previous stage) and
refreshes the epsilon-greedy policy. Stage boundaries come either from a
fixed length or from the sweep rule.
"""
import logging
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Literal, Optional

import numpy as np

from backend.bayes import DirichletPosterior, posterior_update, uniform_prior
from backend.bellman import ValueFunction, epsilon_greedy, estimated_backup, iteration_cap, value_iteration
from backend.errors import IterationCapExceeded
from backend.mdp import (
    MdpModel,
    Policy,
    StateChain,
    TransitionCounts,
    TransitionKernel,
    count_transitions,
    induced_chain,
    simulate,
)
from backend.schemas import EpsilonSchedule, MeanRisk, RiskPair, TrainingSection
from backend.seeding import stream

logger = logging.getLogger(__name__)

Boundary = Literal["continue", "close_stage", "close_sweep"]


@dataclass(frozen=True)
class TrainingConfig:
    stages: int = 20
    delta: int = 100
    scheduler: Literal["fixed", "sweep"] = "fixed"
    theta: float = 0.01
    mc_samples: int = 200
    epsilon: EpsilonSchedule = EpsilonSchedule()
    seed: int = 0
    inner: object = MeanRisk()
    outer: object = MeanRisk()
    mu0: Optional[np.ndarray] = None
    prior: Optional[DirichletPosterior] = None

    def __post_init__(self):
        if self.theta <= 0:
            raise ValueError("theta must be positive")
        if self.delta < 1:
            raise ValueError("stage length must be at least 1")
        if self.stages < 0:
            raise ValueError("stage count cannot be negative")

    @classmethod
    def from_section(cls, section: TrainingSection, risk: RiskPair, prior: Optional[DirichletPosterior] = None,
                     seed: Optional[int] = None) -> "TrainingConfig":
        mu0 = None if section.initial_distribution is None else np.asarray(section.initial_distribution)
        return cls(
            stages=section.stages,
            delta=section.delta,
            scheduler=section.scheduler,
            theta=section.theta,
            mc_samples=section.mc_samples,
            epsilon=section.epsilon,
            seed=section.seed if seed is None else seed,
            inner=risk.inner,
            outer=risk.outer,
            mu0=mu0,
            prior=prior,
        )


@dataclass(frozen=True)
class StageResult:
    stage: int
    counts: TransitionCounts
    steps_seen: int
    value: ValueFunction
    policy: Policy
    greedy_policy: Policy
    iterations: int
    residual: float
    wall_ms: float
    sweep: int = 0
    boundary: str = "close_stage"
    metrics: Dict[str, float] = field(default_factory=dict)


@dataclass
class TrainingLog:
    config: TrainingConfig
    stages: List[StageResult] = field(default_factory=list)
    posterior: Optional[DirichletPosterior] = None
    terminated_early: bool = False

    def append(self, result: StageResult):
        expected = len(self.stages) + 1
        if result.stage != expected:
            raise ValueError(f"stage {result.stage} appended where stage {expected} was expected")
        self.stages.append(result)

    def to_dict(self) -> dict:
        cfg = self.config
        return {
            "config": {
                "stages": cfg.stages,
                "delta": cfg.delta,
                "scheduler": cfg.scheduler,
                "theta": cfg.theta,
                "mc_samples": cfg.mc_samples,
                "epsilon": cfg.epsilon.model_dump(),
                "seed": cfg.seed,
                "inner": cfg.inner.model_dump(),
                "outer": cfg.outer.model_dump(),
            },
            "terminated_early": self.terminated_early,
            "stages": [
                {
                    "stage": r.stage,
                    "sweep": r.sweep,
                    "steps_seen": r.steps_seen,
                    "counts_added": r.counts.total,
                    "iterations": r.iterations,
                    "residual": r.residual,
                    "wall_ms": r.wall_ms,
                    "value": r.value.v.tolist(),
                    "greedy_actions": r.greedy_policy.greedy_actions().tolist(),
                    "metrics": dict(r.metrics),
                }
                for r in self.stages
            ],
        }


@dataclass(frozen=True)
class StageOutcome:
    result: StageResult
    posterior: DirichletPosterior
    policy: Policy
    last_state: int
    value: ValueFunction


@dataclass(frozen=True)
class SweepDecision:
    boundary: Boundary
    known: np.ndarray


def sweep_scheduler(known: np.ndarray, stage_counts: TransitionCounts) -> SweepDecision:
    """
    A stage closes once it contains a (s, a) pair not yet known in the current
    sweep; the sweep closes (and the known set resets) once every pair is known.
    """
    observed = stage_counts.counts.sum(axis=2) > 0
    if not np.any(observed & ~known):
        return SweepDecision("continue", known)
    updated = known | observed
    if updated.all():
        return SweepDecision("close_sweep", np.zeros_like(known))
    return SweepDecision("close_stage", updated)


def _rollout_fixed(kernel, policy, last_state, cfg, u):
    rng = stream(cfg.seed, "rollout", u)
    traj = simulate(kernel, policy, last_state, cfg.delta, rng)
    return count_transitions(traj), traj.last_state, "close_stage"


def _rollout_sweep(kernel, policy, last_state, cfg, u, known):
    """Step until the sweep rule closes the stage, at most `delta` steps."""
    rng = stream(cfg.seed, "rollout", u)
    counts = TransitionCounts.zeros(kernel.n_states, kernel.n_actions)
    state = last_state
    boundary = "continue"
    for _ in range(cfg.delta):
        traj = simulate(kernel, policy, state, 1, rng)
        counts = counts + count_transitions(traj)
        state = traj.last_state
        decision = sweep_scheduler(known, counts)
        boundary = decision.boundary
        if boundary != "continue":
            known[...] = decision.known
            break
    return counts, state, boundary


def run_stage(kernel: TransitionKernel, model: MdpModel, posterior: DirichletPosterior, policy: Policy,
              last_state: int, value: ValueFunction, cfg: TrainingConfig, u: int, steps_before: int = 0,
              known: Optional[np.ndarray] = None, sweep: int = 0) -> StageOutcome:
    start = time.perf_counter()
    if cfg.scheduler == "sweep":
        if known is None:
            raise ValueError("the sweep scheduler needs the known-pair mask")
        counts, last_state, boundary = _rollout_sweep(kernel, policy, last_state, cfg, u, known)
    else:
        counts, last_state, boundary = _rollout_fixed(kernel, policy, last_state, cfg, u)
    posterior = posterior_update(posterior, counts)

    backup = estimated_backup(model, posterior, cfg.inner, cfg.outer, cfg.mc_samples, cfg.seed, stage=u)
    result = value_iteration(backup, value, cfg.theta, iteration_cap(model.c_bar, model.gamma, cfg.theta))
    eps = cfg.epsilon.at(u)
    new_policy = epsilon_greedy(result.q, eps)
    wall_ms = (time.perf_counter() - start) * 1000.0

    logger.info("stage %d: %d steps, %d iterations, epsilon %.3f", u, counts.total, result.iterations, eps)
    stage = StageResult(
        stage=u,
        counts=counts,
        steps_seen=steps_before + counts.total,
        value=result.value,
        policy=new_policy,
        greedy_policy=epsilon_greedy(result.q, 0.0),
        iterations=result.iterations,
        residual=result.final_residual,
        wall_ms=wall_ms,
        sweep=sweep,
        boundary=boundary,
    )
    return StageOutcome(stage, posterior, new_policy, last_state, result.value)


def is_irreducible(chain: StateChain) -> bool:
    reach = (chain.probs > 0) | np.eye(chain.probs.shape[0], dtype=bool)
    while True:
        nxt = (reach.astype(np.int64) @ reach.astype(np.int64)) > 0
        if np.array_equal(nxt, reach):
            return bool(reach.all())
        reach = nxt


def run_training(kernel: TransitionKernel, model: MdpModel, cfg: TrainingConfig,
                 on_stage: Optional[Callable[[StageResult], None]] = None) -> TrainingLog:
    n_states, n_actions = model.n_states, model.n_actions
    posterior = cfg.prior if cfg.prior is not None else uniform_prior(n_states, n_actions)
    log = TrainingLog(config=cfg, posterior=posterior)
    if cfg.stages == 0:
        return log

    policy = Policy.uniform(n_states, n_actions)
    if not is_irreducible(induced_chain(kernel, policy)):
        logger.warning("training kernel is not irreducible under the uniform policy")
    mu0 = cfg.mu0 if cfg.mu0 is not None else np.full(n_states, 1.0 / n_states)
    last_state = int(stream(cfg.seed, "start").choice(n_states, p=mu0))
    value = ValueFunction(np.zeros(n_states))
    known = np.zeros((n_states, n_actions), dtype=bool)
    steps, sweep, sweep_iterations = 0, 1, []

    for u in range(1, cfg.stages + 1):
        try:
            outcome = run_stage(kernel, model, posterior, policy, last_state, value, cfg, u,
                                steps_before=steps, known=known, sweep=sweep)
        except IterationCapExceeded as exc:
            logger.error("stage %d aborted: %s", u, exc)
            exc.partial_log = log
            raise
        posterior, policy = outcome.posterior, outcome.policy
        last_state, value = outcome.last_state, outcome.value
        steps = outcome.result.steps_seen
        if on_stage is not None:
            on_stage(outcome.result)
        log.append(outcome.result)
        log.posterior = posterior

        if cfg.scheduler == "sweep":
            sweep_iterations.append(outcome.result.iterations)
            if outcome.result.boundary == "close_sweep":
                logger.info("sweep %d closed after %d stages", sweep, len(sweep_iterations))
                if all(k == 1 for k in sweep_iterations):
                    log.terminated_early = True
                    break
                sweep += 1
                sweep_iterations = []
    return log
