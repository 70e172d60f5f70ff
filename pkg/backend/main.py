from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
import logging
import math

import numpy as np

from backend.bounds import ALPHA2_FORM_NOTE, all_bounds
from backend.envs import build_env, deployment_envs, effective_actions
from backend.errors import RiskDPError
from backend.evaluation import oracle_solve, robustness_sweep, stationary_weighted_value
from backend.mdp import Policy
from backend.schemas import BoundParams, EvaluateRequest, SolveRequest

logger = logging.getLogger(__name__)

API_VERSION = "1.0.0"

app = FastAPI(title="RiskDP API", version=API_VERSION)

app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)


@app.get("/")
async def root():
    return {
        "message": "RiskDP API",
        "version": API_VERSION,
        "endpoints": ["/health", "/solve", "/bounds", "/evaluate"],
    }


@app.get("/health")
async def health():
    return {"status": "ok", "version": API_VERSION}


@app.post("/solve")
def solve(req: SolveRequest):
    try:
        env = build_env(req.env)
        value, policy = oracle_solve(env, req.inner, req.theta)
        return {
            "env": env.name,
            "states": env.state_labels.tolist(),
            "actions": effective_actions(env, policy.greedy_actions()).tolist(),
            "value": value.v.tolist(),
            "stationary_value": stationary_weighted_value(env, policy, req.inner, req.theta),
        }
    except (RiskDPError, ValueError) as e:
        raise HTTPException(status_code=400, detail=str(e))
    except Exception as e:
        logger.exception("solve failed")
        raise HTTPException(status_code=500, detail=str(e))


@app.post("/bounds")
def bounds(params: BoundParams):
    try:
        values = {name: v if math.isfinite(v) else str(v) for name, v in all_bounds(params).items()}
        return {**values, "note": ALPHA2_FORM_NOTE}
    except (ArithmeticError, ValueError) as e:
        raise HTTPException(status_code=400, detail=str(e))


@app.post("/evaluate")
def evaluate(req: EvaluateRequest):
    try:
        env = build_env(req.env)
        actions = np.asarray(req.actions, dtype=int)
        if actions.size != env.model.n_states or actions.min() < 0 or actions.max() >= env.model.n_actions:
            raise HTTPException(status_code=400,
                                detail=f"actions must list one index in 0..{env.model.n_actions - 1} per state")
        policy = Policy.deterministic(actions, env.model.n_actions)
        report = robustness_sweep(policy, deployment_envs(req.env, req.grid), req.inner, req.theta)
        return {"labels": report.labels, "values": report.values.tolist(), "worst": report.worst}
    except HTTPException:
        raise
    except (RiskDPError, ValueError) as e:
        raise HTTPException(status_code=400, detail=str(e))
    except Exception as e:
        logger.exception("evaluate failed")
        raise HTTPException(status_code=500, detail=str(e))
