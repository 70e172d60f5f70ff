"""
Posterior and policy checkpoints as JSON.

Floats are written with repr(), which is the shortest decimal string that
parses back to the same double, so load(save(x)) reproduces x exactly.
"""
import json
import logging
from pathlib import Path
from typing import Tuple

import numpy as np

from backend.bayes import DirichletPosterior
from backend.errors import CheckpointIOError, CorruptCheckpoint
from backend.mdp import Policy, row_violations

logger = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1
POLICY_ROW_TOL = 1e-9


def save_checkpoint(posterior: DirichletPosterior, policy: Policy, path) -> Path:
    if not path:
        raise CheckpointIOError(str(path), "empty path")
    if policy.n_states != posterior.n_states or policy.n_actions != posterior.n_actions:
        raise ValueError("policy and posterior describe different MDPs")
    doc = {
        "version": CHECKPOINT_VERSION,
        "posterior": {
            "alpha": posterior.alpha.tolist(),
            "n_states": posterior.n_states,
            "n_actions": posterior.n_actions,
        },
        "policy": {"probs": policy.probs.tolist()},
    }
    target = Path(path)
    try:
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(json.dumps(doc))
    except OSError as e:
        raise CheckpointIOError(str(path), str(e)) from e
    logger.debug("checkpoint written to %s", target)
    return target


def load_checkpoint(path) -> Tuple[DirichletPosterior, Policy]:
    if not path:
        raise CheckpointIOError(str(path), "empty path")
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise CheckpointIOError(str(path), str(e)) from e
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise CorruptCheckpoint(f"not a JSON document: {e}") from e

    if not isinstance(doc, dict) or doc.get("version") != CHECKPOINT_VERSION:
        raise CorruptCheckpoint(f"unsupported checkpoint version {doc.get('version') if isinstance(doc, dict) else None}")
    try:
        post_doc, policy_doc = doc["posterior"], doc["policy"]
        alpha = np.asarray(post_doc["alpha"], dtype=float)
        probs = np.asarray(policy_doc["probs"], dtype=float)
        n_states, n_actions = int(post_doc["n_states"]), int(post_doc["n_actions"])
    except (KeyError, TypeError, ValueError) as e:
        raise CorruptCheckpoint(f"malformed checkpoint: {e}") from e

    if alpha.shape != (n_states, n_actions, n_states) or probs.shape != (n_states, n_actions):
        raise CorruptCheckpoint("table dimensions do not match the declared sizes")
    try:
        posterior = DirichletPosterior(alpha)
    except ValueError as e:
        raise CorruptCheckpoint(f"posterior: {e}") from e
    violations = row_violations(probs, tol=POLICY_ROW_TOL)
    if violations:
        raise CorruptCheckpoint(f"policy rows: {violations[0]}")
    return posterior, Policy(probs)
