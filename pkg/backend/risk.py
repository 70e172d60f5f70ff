"""
Coherent risk over a finite distribution.

The inner mapping sigma(v, m) and the outer measure beta over N posterior
samples are the same functional: a risk measure applied to values on discrete
atoms. sigma uses the transition row as atom weights; beta uses uniform
weights 1/N. Mean and CVaR have closed forms; a polyhedral envelope is solved
as a linear program over the reweighting density xi.

Costs are minimized, so CVaR is taken over the upper tail.
"""
import logging
from dataclasses import dataclass

import numpy as np

from backend.errors import DegenerateAlpha, UnsupportedRiskSpec
from backend.schemas import (
    CVaRRisk,
    EnvelopeConstraint,
    EnvelopeRisk,
    EnvelopeTerm,
    InnerRiskSpec,
    MeanRisk,
    OuterRiskSpec,
    RiskSpec,
)
from backend.simplex import LPResult, solve_lp

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LipschitzConstant:
    value: float

    def __post_init__(self):
        if not self.value > 0:
            raise ValueError(f"Lipschitz constant must be positive, got {self.value}")


@dataclass(frozen=True)
class EnvelopeLP:
    """An envelope instantiated at concrete atoms, ready for the simplex."""
    c: np.ndarray
    A_ub: np.ndarray
    b_ub: np.ndarray
    A_eq: np.ndarray
    b_eq: np.ndarray
    n_atoms: int


# --- CVaR -------------------------------------------------------------------

def _check_alpha(alpha: float):
    if not alpha > 0:
        raise DegenerateAlpha(alpha)
    if alpha > 1:
        raise ValueError(f"CVaR level must lie in (0, 1], got {alpha}")


def cvar_batch(values, probs, alpha: float) -> np.ndarray:
    """
    Upper-tail CVaR along the last axis. Atoms are sorted from worst to best
    and receive weight 1/alpha until alpha of the mass is used up; the atom
    straddling the boundary gets the fractional remainder.
    """
    _check_alpha(alpha)
    values, probs = np.broadcast_arrays(np.asarray(values, dtype=float), np.asarray(probs, dtype=float))
    if alpha == 1.0:
        return np.sum(values * probs, axis=-1)
    order = np.argsort(-values, axis=-1, kind="stable")
    v_sorted = np.take_along_axis(values, order, axis=-1)
    p_sorted = np.take_along_axis(probs, order, axis=-1)
    cum = np.cumsum(p_sorted, axis=-1)
    prev = cum - p_sorted
    weights = (np.minimum(cum, alpha) - np.minimum(prev, alpha)) / alpha
    return np.sum(weights * v_sorted, axis=-1)


def cvar_discrete(values, probs, alpha: float) -> float:
    values = np.asarray(values, dtype=float)
    probs = np.asarray(probs, dtype=float)
    if values.shape != probs.shape or values.ndim != 1:
        raise ValueError("values and probs must be vectors of the same length")
    return float(cvar_batch(values, probs, alpha))


# --- polyhedral envelopes ---------------------------------------------------

def cvar_envelope(alpha: float) -> EnvelopeRisk:
    """CVaR written as an envelope: 0 <= xi <= 1/alpha, E_m[xi] = 1."""
    _check_alpha(alpha)
    return EnvelopeRisk(constraints=[
        EnvelopeConstraint(sense="le", terms=[EnvelopeTerm(var="xi", coef=1.0)], rhs=1.0 / alpha),
    ])


def semideviation_envelope(kappa: float) -> EnvelopeRisk:
    """
    Mean-upper-semideviation of order one: xi = 1 + h - E_m[h] with 0 <= h <= kappa.
    Its value is E[v] + kappa * E[(v - E[v])^+].
    """
    if not 0.0 <= kappa <= 1.0:
        raise ValueError(f"semideviation weight must lie in [0, 1], got {kappa}")
    return EnvelopeRisk(dual=True, constraints=[
        EnvelopeConstraint(sense="eq", rhs=1.0, terms=[
            EnvelopeTerm(var="xi", coef=1.0),
            EnvelopeTerm(var="h", coef=-1.0),
            EnvelopeTerm(var="h", coef=1.0, at="sum", weighted=True),
        ]),
        EnvelopeConstraint(sense="le", terms=[EnvelopeTerm(var="h", coef=1.0)], rhs=kappa),
        EnvelopeConstraint(sense="le", terms=[EnvelopeTerm(var="h", coef=-1.0)], rhs=0.0),
    ])


def _row(constraint: EnvelopeConstraint, atom, m: np.ndarray, n_cols: int, dual: bool) -> np.ndarray:
    k = m.size
    row = np.zeros(n_cols)
    for term in constraint.terms:
        if term.at == "self":
            weights = np.zeros(k)
            weights[atom] = 1.0
        else:
            weights = m.copy() if term.weighted else np.ones(k)
        weights *= term.coef
        if term.var == "xi":
            row[:k] += weights
        else:
            # h = h_plus - h_minus
            row[k:2 * k] += weights
            row[2 * k:3 * k] -= weights
    return row


def instantiate_envelope(spec: EnvelopeRisk, v, m) -> EnvelopeLP:
    v = np.asarray(v, dtype=float)
    m = np.asarray(m, dtype=float)
    k = m.size
    n_cols = 3 * k if spec.dual else k
    c = np.zeros(n_cols)
    c[:k] = m * v

    ub_rows, ub_rhs, eq_rows, eq_rhs = [], [], [], []
    if spec.normalized:
        norm = np.zeros(n_cols)
        norm[:k] = m
        eq_rows.append(norm)
        eq_rhs.append(1.0)
    for constraint in spec.constraints:
        atoms = range(k) if constraint.per_atom else [None]
        rows = ub_rows if constraint.sense == "le" else eq_rows
        rhs = ub_rhs if constraint.sense == "le" else eq_rhs
        for atom in atoms:
            rows.append(_row(constraint, atom, m, n_cols, spec.dual))
            rhs.append(constraint.rhs)

    def stack(rows):
        return np.vstack(rows) if rows else np.zeros((0, n_cols))

    return EnvelopeLP(c=c, A_ub=stack(ub_rows), b_ub=np.asarray(ub_rhs, dtype=float),
                      A_eq=stack(eq_rows), b_eq=np.asarray(eq_rhs, dtype=float), n_atoms=k)


def envelope_lp_solve(lp: EnvelopeLP) -> LPResult:
    return solve_lp(lp.c, lp.A_ub, lp.b_ub, lp.A_eq, lp.b_eq)


def _envelope_value(spec: EnvelopeRisk, v: np.ndarray, m: np.ndarray) -> float:
    return envelope_lp_solve(instantiate_envelope(spec, v, m)).value


# --- sigma / beta -----------------------------------------------------------

def risk_batch(spec: RiskSpec, values, probs) -> np.ndarray:
    """Risk of each distribution along the last axis; leading axes broadcast."""
    values, probs = np.broadcast_arrays(np.asarray(values, dtype=float), np.asarray(probs, dtype=float))
    if isinstance(spec, MeanRisk):
        return np.sum(values * probs, axis=-1)
    if isinstance(spec, CVaRRisk):
        return cvar_batch(values, probs, spec.alpha)
    if isinstance(spec, EnvelopeRisk):
        out = np.empty(values.shape[:-1])
        for idx in np.ndindex(out.shape):
            out[idx] = _envelope_value(spec, values[idx], probs[idx])
        return out
    raise UnsupportedRiskSpec(f"unknown risk specification {spec!r}")


def sigma_eval(spec: InnerRiskSpec, v, m) -> float:
    v = np.asarray(v, dtype=float)
    if not np.all(np.isfinite(v)):
        raise ValueError("value vector must be finite")
    return float(risk_batch(spec, v, m))


def sigma_batch(spec: InnerRiskSpec, values, kernels) -> np.ndarray:
    """
    sigma for every (sample, s, a): values is (S, A, S') and kernels is
    (N, S, A, S'). Returns (N, S, A).
    """
    return risk_batch(spec, np.asarray(values)[None], kernels)


def beta_eval(spec: OuterRiskSpec, sample_values) -> float:
    x = np.asarray(sample_values, dtype=float).ravel()
    if x.size < 1:
        raise ValueError("beta needs at least one sample")
    return float(risk_batch(spec, x, np.full(x.size, 1.0 / x.size)))


def beta_batch(spec: OuterRiskSpec, samples) -> np.ndarray:
    """beta over the leading sample axis: (N, ...) -> (...)."""
    samples = np.moveaxis(np.asarray(samples, dtype=float), 0, -1)
    n = samples.shape[-1]
    return risk_batch(spec, samples, np.full(n, 1.0 / n))


def lipschitz_B_sigma(spec: InnerRiskSpec, c_bar: float, gamma: float) -> LipschitzConstant:
    if not 0.0 < gamma < 1.0:
        raise ValueError(f"discount must lie in (0, 1), got {gamma}")
    if isinstance(spec, MeanRisk):
        return LipschitzConstant(c_bar / (1.0 - gamma))
    if isinstance(spec, CVaRRisk):
        return LipschitzConstant(2.0 * c_bar / (spec.alpha * (1.0 - gamma)))
    raise UnsupportedRiskSpec("no cross-section Lipschitz constant is available for polyhedral envelopes")
