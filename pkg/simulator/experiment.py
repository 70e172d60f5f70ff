"""
Experiment harness: config parsing, replicated Bayesian DP training runs,
per-stage evaluation and CSV/JSON persistence.

Output layout under cfg.out:
    run_000/stages.csv        per-stage metrics (CSV_COLUMNS)
    run_000/robustness.csv    per-stage deployment values and worst (when a grid is set)
    run_000/q_learning.csv    Q-learning baseline curve (when requested)
    run_000/training_log.json
    run_000/checkpoint.json   final posterior and epsilon-greedy policy
    aggregate.csv             per-stage mean across runs
    robustness_aggregate.csv
    q_learning_aggregate.csv
"""
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional

import pandas as pd
from pydantic import ValidationError

from backend.bayes import DirichletPosterior, informative_prior, uniform_prior
from backend.driver import StageResult, TrainingConfig, run_training
from backend.envs import EnvBundle, build_env, deployment_envs
from backend.errors import IterationCapExceeded, ParseError, SchemaViolation, first_error_location
from backend.evaluation import q_learning_baseline, robustness_sweep, stationary_weighted_value
from backend.schemas import (
    CSV_COLUMNS,
    CVaRRisk,
    EnvConfig,
    EvalSection,
    ExperimentConfig,
    MeanRisk,
    PriorConfig,
    PriorEnvOverrides,
    ResultRow,
    RiskPair,
    TrainingSection,
)
from backend.seeding import child_seed
from simulator.checkpoint import save_checkpoint

logger = logging.getLogger(__name__)

EVAL_THETA = 1e-6
COIN_GRID = [0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]
INVENTORY_GRID = [float(t) for t in range(-5, 6)]
PRESETS = ("coin-mean", "coin-cvar", "inventory-mean", "inventory-cvar")
OUTER_CVAR_LEVEL = 0.6
INNER_CVAR_LEVEL = 0.5


@dataclass
class RunOutput:
    run: int
    seed: int
    stages: pd.DataFrame
    robustness: Optional[pd.DataFrame] = None
    q_learning: Optional[pd.DataFrame] = None


@dataclass
class ExperimentArtifacts:
    out_dir: Path
    aggregate: pd.DataFrame
    files: List[Path] = field(default_factory=list)


# --- configuration ----------------------------------------------------------

def parse_config_text(text: str) -> ExperimentConfig:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(e.lineno, e.msg) from e
    if not isinstance(doc, dict):
        raise ParseError(1, "top-level value must be an object")
    try:
        return ExperimentConfig.model_validate(doc)
    except ValidationError as e:
        raise SchemaViolation(*first_error_location(e.errors())) from e


def parse_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ParseError(0, f"cannot read '{path}': {e}") from e
    return parse_config_text(text)


def preset_config(name: str, outer: str = "mean", prior: str = "uniform", runs: int = 50) -> ExperimentConfig:
    """The four published replication grids, each with a Mean or CVaR(0.6) outer measure."""
    if name not in PRESETS:
        raise ValueError(f"unknown preset '{name}', expected one of {', '.join(PRESETS)}")
    env_name, preference = name.split("-")
    inner = CVaRRisk(alpha=INNER_CVAR_LEVEL) if preference == "cvar" else MeanRisk()
    outer_spec = CVaRRisk(alpha=OUTER_CVAR_LEVEL) if outer == "cvar" else MeanRisk()
    if env_name == "coin":
        env = EnvConfig(preset="coin_toss")
        grid = {"p_head": COIN_GRID}
        prior_cfg = PriorConfig(kind="informative", env=PriorEnvOverrides(p_head=2.0 / 3.0)) \
            if prior == "informative" else PriorConfig()
    else:
        if prior == "informative":
            raise SchemaViolation("training.prior", "the informative prior is defined for the coin-toss presets only")
        env = EnvConfig(preset="inventory")
        grid = {"tilt": INVENTORY_GRID}
        prior_cfg = PriorConfig()
    return ExperimentConfig(
        env=env,
        risk=RiskPair(inner=inner, outer=outer_spec),
        training=TrainingSection(prior=prior_cfg),
        eval=EvalSection(grid=grid),
        runs=runs,
        baselines=["q_learning"] if preference == "mean" else [],
    )


def resolve_prior(cfg: ExperimentConfig, env: EnvBundle) -> DirichletPosterior:
    prior = cfg.training.prior
    if prior.kind == "uniform":
        return uniform_prior(env.model.n_states, env.model.n_actions)
    overrides = prior.env.model_dump(exclude_none=True) if prior.env is not None else {}
    reference = build_env(cfg.env.model_copy(update=overrides))
    return informative_prior(reference.kernel.probs, prior.mass)


# --- single run -------------------------------------------------------------

def stage_result_rows(run: int, result: StageResult) -> List[ResultRow]:
    """One validated (run, stage, metric, value) record per registered metric."""
    values = {
        "steps_seen": result.steps_seen,
        "iterations": result.iterations,
        "oracle_value": result.metrics["oracle_value"],
        "worst_deploy_value": result.metrics.get("worst_deploy_value", math.nan),
        "wall_ms": result.wall_ms,
    }
    return [ResultRow(run=run, stage=result.stage, metric=name, value=value) for name, value in values.items()]


def _stage_row(run: int, result: StageResult) -> dict:
    row = {"run": run, "stage": result.stage}
    for record in stage_result_rows(run, result):
        row[record.metric] = record.value
    for name in ("steps_seen", "iterations"):
        row[name] = int(row[name])
    return row


def _write_run(run_dir: Path, output: RunOutput, log_doc: dict):
    run_dir.mkdir(parents=True, exist_ok=True)
    output.stages.to_csv(run_dir / "stages.csv", index=False)
    if output.robustness is not None:
        output.robustness.to_csv(run_dir / "robustness.csv", index=False)
    if output.q_learning is not None:
        output.q_learning.to_csv(run_dir / "q_learning.csv", index=False)
    (run_dir / "training_log.json").write_text(json.dumps(log_doc, indent=2))


def run_single(cfg: ExperimentConfig, run: int, seed: int) -> RunOutput:
    env = build_env(cfg.env)
    deployments = deployment_envs(cfg.env, cfg.eval.grid)
    inner = cfg.risk.inner
    train_cfg = TrainingConfig.from_section(cfg.training, cfg.risk, prior=resolve_prior(cfg, env), seed=seed)
    run_dir = Path(cfg.out) / f"run_{run:03d}"
    stage_rows, robust_rows = [], []

    def evaluate(result: StageResult):
        greedy = result.greedy_policy
        result.metrics["oracle_value"] = stationary_weighted_value(env, greedy, inner, EVAL_THETA)
        if deployments:
            report = robustness_sweep(greedy, deployments, inner, EVAL_THETA)
            result.metrics["worst_deploy_value"] = report.worst
            robust_rows.append({"run": run, "stage": result.stage, **report.as_row()})
        stage_rows.append(_stage_row(run, result))

    logger.info("run %d (seed %d) started", run, seed)
    try:
        log = run_training(env.kernel, env.model, train_cfg, on_stage=evaluate)
    except IterationCapExceeded as exc:
        partial = RunOutput(run, seed, pd.DataFrame(stage_rows, columns=list(CSV_COLUMNS)))
        doc = exc.partial_log.to_dict() if exc.partial_log is not None else {}
        _write_run(run_dir, partial, {**doc, "aborted": str(exc)})
        raise

    output = RunOutput(
        run=run,
        seed=seed,
        stages=pd.DataFrame(stage_rows, columns=list(CSV_COLUMNS)),
        robustness=pd.DataFrame(robust_rows) if deployments else None,
    )
    if "q_learning" in cfg.baselines:
        output.q_learning = _q_learning_curve(cfg, env, run, seed)
    _write_run(run_dir, output, log.to_dict())
    if log.stages:
        save_checkpoint(log.posterior, log.stages[-1].policy, run_dir / "checkpoint.json")
    logger.info("run %d finished after %d stages", run, len(log.stages))
    return output


def _q_learning_curve(cfg: ExperimentConfig, env: EnvBundle, run: int, seed: int) -> pd.DataFrame:
    t = cfg.training
    result = q_learning_baseline(env, steps=max(t.stages * t.delta, 1), epsilon=t.epsilon, seed=seed,
                                 stage_length=t.delta)
    rows = [
        {"run": run, "stage": u, "oracle_value": stationary_weighted_value(env, snap, cfg.risk.inner, EVAL_THETA)}
        for u, snap in enumerate(result.snapshots, start=1)
    ]
    return pd.DataFrame(rows, columns=["run", "stage", "oracle_value"])


def _run_job(args):
    cfg, run, seed = args
    return run_single(cfg, run, seed)


# --- replications -----------------------------------------------------------

def aggregate_stages(frames: List[pd.DataFrame]) -> pd.DataFrame:
    """Per-stage arithmetic mean over runs."""
    if not frames:
        return pd.DataFrame(columns=[c for c in CSV_COLUMNS if c != "run"])
    combined = pd.concat(frames, ignore_index=True)
    return combined.drop(columns=["run"]).groupby("stage", as_index=False).mean()


def run_experiment(cfg: ExperimentConfig, jobs: int = 1) -> ExperimentArtifacts:
    out_dir = Path(cfg.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    tasks = [(cfg, r, child_seed(cfg.training.seed, "run", r)) for r in range(cfg.runs)]
    logger.info("running %d replications with %d worker(s) into %s", cfg.runs, jobs, out_dir)

    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outputs = list(pool.map(_run_job, tasks))
    else:
        outputs = [_run_job(task) for task in tasks]

    files = []
    aggregate = aggregate_stages([o.stages for o in outputs])
    aggregate.to_csv(out_dir / "aggregate.csv", index=False)
    files.append(out_dir / "aggregate.csv")
    robust = [o.robustness for o in outputs if o.robustness is not None]
    if robust:
        aggregate_stages(robust).to_csv(out_dir / "robustness_aggregate.csv", index=False)
        files.append(out_dir / "robustness_aggregate.csv")
    baseline = [o.q_learning for o in outputs if o.q_learning is not None]
    if baseline:
        aggregate_stages(baseline).to_csv(out_dir / "q_learning_aggregate.csv", index=False)
        files.append(out_dir / "q_learning_aggregate.csv")
    return ExperimentArtifacts(out_dir=out_dir, aggregate=aggregate, files=files)


def final_values(artifacts: ExperimentArtifacts) -> Dict[str, float]:
    if artifacts.aggregate.empty:
        return {}
    last = artifacts.aggregate.iloc[-1]
    return {"stage": int(last["stage"]), "oracle_value": float(last["oracle_value"]),
            "worst_deploy_value": float(last["worst_deploy_value"])}


def robustness_direction(mean_outer: ExperimentArtifacts, cvar_outer: ExperimentArtifacts) -> bool:
    """
    Soft check that the outer-CVaR model's final worst-deployment value is no
    larger than the outer-Mean model's. A failure is logged, not raised.
    """
    mean_worst = final_values(mean_outer).get("worst_deploy_value", math.nan)
    cvar_worst = final_values(cvar_outer).get("worst_deploy_value", math.nan)
    if math.isnan(mean_worst) or math.isnan(cvar_worst):
        logger.warning("robustness direction check skipped: no deployment grid")
        return False
    holds = cvar_worst <= mean_worst
    if not holds:
        logger.warning("outer CVaR worst-deployment value %.4f exceeds outer Mean value %.4f",
                       cvar_worst, mean_worst)
    return holds
