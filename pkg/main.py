"""
Command-line entry point.

    python main.py solve --preset coin_toss --inner cvar --alpha 0.2
    python main.py train --config experiment.json --runs 5 --jobs 4
    python main.py eval --config experiment.json --checkpoint runs/run_000/checkpoint.json
    python main.py bounds --params bounds.json
    python main.py replicate coin-mean --outer both --runs 10
    python main.py serve
"""
import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np
import pandas as pd
from pydantic import ValidationError

from backend import config
from backend.bounds import ALPHA2_FORM_NOTE, all_bounds, backup_operation_count
from backend.envs import INVENTORY_BASELINE_ROWS, build_env, deployment_envs, effective_actions
from backend.errors import ParseError, RiskDPError, SchemaViolation, first_error_location
from backend.evaluation import oracle_solve, robustness_sweep, stationary_weighted_value
from backend.schemas import BoundParams, CVaRRisk, EnvConfig, EvalSection, ExperimentConfig, MeanRisk
from simulator.checkpoint import load_checkpoint
from simulator.experiment import (
    EVAL_THETA,
    PRESETS,
    ExperimentArtifacts,
    final_values,
    parse_config,
    preset_config,
    robustness_direction,
    run_experiment,
)

logger = logging.getLogger("riskdp")


def banner(title: str):
    print("=" * 70)
    print(title)
    print("=" * 70)


def apply_overrides(cfg: ExperimentConfig, args) -> ExperimentConfig:
    update = {}
    if args.runs is not None:
        update["runs"] = args.runs
    if args.out is not None:
        update["out"] = args.out
    if args.seed is not None:
        update["training"] = cfg.training.model_copy(update={"seed": args.seed})
    return cfg.model_copy(update=update) if update else cfg


def _json_argument(text: str, source: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(e.lineno, f"{source}: {e.msg}") from e


def _read_json_file(path: str):
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ParseError(0, f"cannot read '{path}': {e}") from e
    return _json_argument(text, path)


def _validated(model, doc):
    try:
        return model.model_validate(doc)
    except ValidationError as e:
        raise SchemaViolation(*first_error_location(e.errors())) from e


def _inner_from_args(args):
    return CVaRRisk(alpha=args.alpha) if args.inner == "cvar" else MeanRisk()


def cmd_solve(args) -> int:
    if args.config:
        cfg = parse_config(args.config)
        env_cfg, inner = cfg.env, cfg.risk.inner
    else:
        env_cfg, inner = EnvConfig(preset=args.preset), _inner_from_args(args)
    env = build_env(env_cfg)
    value, policy = oracle_solve(env, inner, args.theta)
    actions = effective_actions(env, policy.greedy_actions())

    banner(f"Oracle policy: {env.name}, inner {inner.model_dump()}")
    table = pd.DataFrame({"state": env.state_labels, "action": actions, "value": np.round(value.v, 6)})
    print(table.to_string(index=False))
    print(f"\nStationary-weighted value: {stationary_weighted_value(env, policy, inner, args.theta):.6f}")
    if env.name == "inventory":
        print("\nReported robust baselines (post-order stock):")
        for name, row in INVENTORY_BASELINE_ROWS.items():
            print(f"  {name:>9}: {' '.join(str(int(x)) for x in row)}")
    return 0


def _run(cfg: ExperimentConfig, jobs: int) -> ExperimentArtifacts:
    banner(f"Bayesian DP: {cfg.env.preset}, inner {cfg.risk.inner.kind}, outer {cfg.risk.outer.kind}")
    print(f"Runs: {cfg.runs} | Stages: {cfg.training.stages} x {cfg.training.delta} steps | "
          f"N = {cfg.training.mc_samples} | theta = {cfg.training.theta}")
    artifacts = run_experiment(cfg, jobs=jobs)
    summary = final_values(artifacts)
    print(f"\nOutputs written to {artifacts.out_dir}")
    for path in artifacts.files:
        print(f"  - {path}")
    if summary:
        print(f"\nFinal stage {summary['stage']}: oracle value {summary['oracle_value']:.4f}, "
              f"worst deployment {summary['worst_deploy_value']:.4f}")
    return artifacts


def cmd_train(args) -> int:
    cfg = apply_overrides(parse_config(args.config), args)
    _run(cfg, args.jobs)
    return 0


def cmd_replicate(args) -> int:
    outers = ["mean", "cvar"] if args.outer == "both" else [args.outer]
    results = {}
    for outer in outers:
        cfg = apply_overrides(preset_config(args.preset, outer=outer, prior=args.prior), args)
        subdir = f"{args.preset}-outer-{outer}"
        base = Path(args.out) if args.out is not None else Path(config.OUT_DIR)
        if args.out is None or len(outers) > 1:
            cfg = cfg.model_copy(update={"out": str(base / subdir)})
        results[outer] = _run(cfg, args.jobs)
    if len(results) == 2:
        holds = robustness_direction(results["mean"], results["cvar"])
        print(f"\n{'✅' if holds else '⚠️'} outer CVaR worst-deployment value "
              f"{'is' if holds else 'is not'} at or below the outer Mean value")
    return 0


def cmd_eval(args) -> int:
    cfg = parse_config(args.config) if args.config else ExperimentConfig()
    if args.grid:
        grid = _validated(EvalSection, {"grid": _json_argument(args.grid, "--grid")}).grid
    else:
        grid = cfg.eval.grid
    if not grid:
        print("No deployment grid: pass --grid or set eval.grid in the config")
        return 2
    _, policy = load_checkpoint(args.checkpoint)
    try:
        deployments = deployment_envs(cfg.env, grid)
    except ValueError as e:
        raise SchemaViolation("eval.grid", str(e)) from e
    report = robustness_sweep(policy, deployments, cfg.risk.inner, EVAL_THETA, jobs=args.jobs)

    banner(f"Robustness sweep: {len(deployments)} deployments")
    frame = pd.DataFrame([report.as_row()])
    print(frame.T.rename(columns={0: "value"}).to_string())
    out = Path(args.out or config.OUT_DIR)
    out.mkdir(parents=True, exist_ok=True)
    frame.to_csv(out / "robustness_eval.csv", index=False)
    print(f"\nWritten to {out / 'robustness_eval.csv'}")
    return 0


def cmd_bounds(args) -> int:
    doc = _read_json_file(args.params) if args.params else {}
    params = _validated(BoundParams, doc)
    banner("Complexity bounds")
    values = all_bounds(params)
    values["backup_operation_count"] = backup_operation_count(params.n_states, params.n_actions,
                                                              args.mc_samples)
    for name, value in values.items():
        print(f"{name:>24}: {value:.6g}")
    print(f"\nNote: {ALPHA2_FORM_NOTE}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    uvicorn.run("backend.main:app", host=args.host, port=args.port, log_level=args.log_level.lower())
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="riskdp", description="Bayesian risk-sensitive dynamic programming")
    parser.add_argument("--log-level", default=config.LOG_LEVEL)
    sub = parser.add_subparsers(dest="command", required=True)

    def experiment_flags(p):
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", default=None)
        p.add_argument("--runs", type=int, default=None)
        p.add_argument("--jobs", type=int, default=config.JOBS)

    p = sub.add_parser("solve", help="oracle policy against the true kernel")
    p.add_argument("--config")
    p.add_argument("--preset", choices=["coin_toss", "inventory"], default="coin_toss")
    p.add_argument("--inner", choices=["mean", "cvar"], default="mean")
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--theta", type=float, default=1e-6)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("train", help="run a configured experiment")
    p.add_argument("--config", required=True)
    experiment_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="robustness sweep for a checkpointed policy")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--config")
    p.add_argument("--grid", help='JSON, e.g. \'{"p_head": [0.5, 0.6, 0.7]}\'')
    experiment_flags(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bounds", help="evaluate the complexity bounds")
    p.add_argument("--params")
    p.add_argument("--mc-samples", type=int, default=200)
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("replicate", help="run one of the published experiment grids")
    p.add_argument("preset", choices=PRESETS)
    p.add_argument("--outer", choices=["mean", "cvar", "both"], default="mean")
    p.add_argument("--prior", choices=["uniform", "informative"], default="uniform")
    experiment_flags(p)
    p.set_defaults(func=cmd_replicate)

    p = sub.add_parser("serve", help="start the HTTP API")
    p.add_argument("--host", default=config.API_HOST)
    p.add_argument("--port", type=int, default=config.API_PORT)
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level.upper(), format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    logger.debug("settings: %s", config.get_settings())
    try:
        return args.func(args)
    except RiskDPError as e:
        logger.error("%s: %s", type(e).__name__, e)
        print(f"❌ {type(e).__name__}: {e}")
        return 2


if __name__ == "__main__":
    sys.exit(main())
