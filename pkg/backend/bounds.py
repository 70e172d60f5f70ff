"""
Closed-form complexity bounds for Bayesian DP.

All calculators work in plain double precision. Overflow, and denominators
that underflow to zero, propagate as inf.
"""
import math

from backend.schemas import BoundParams

# The sample-complexity statement scales with alpha2 while its derivation
# carries a (1 - alpha2) factor at one step; the statement form is used here.
ALPHA2_FORM_NOTE = (
    "sample_complexity_T follows the theorem statement (alpha2); the derivation "
    "uses a (1 - alpha2) CVaR level at one step"
)


def _div(num: float, den: float) -> float:
    if den == 0.0:
        return math.inf if num > 0 else 0.0
    return num / den


def _risk_scale(p: BoundParams) -> float:
    """4 C / (a1 a2) * |S|^2 |A| / (1 - gamma)^2"""
    g = 1.0 - p.gamma
    return _div(4.0 * p.c_bar * p.n_states * p.n_states * p.n_actions, p.alpha1 * p.alpha2 * g * g)


def sample_complexity_T(p: BoundParams) -> float:
    mu, g = p.mu_min, 1.0 - p.gamma
    a12 = p.alpha1 * p.alpha2
    first = _div(16.0 * p.a_bar0 * p.c_bar, mu * g * g * a12 * p.theta)
    second = _div(128.0 * p.n_states * p.c_bar * p.c_bar, mu * g**4 * a12 * a12 * p.theta * p.theta)
    third = 8.0 / mu * math.log(2.0 * p.n_states * p.n_actions / p.delta)
    return p.t0 + max(first, second, third)


def perturbation_bound(p: BoundParams) -> float:
    """Sup-norm change of the optimal value after delta_total one-hot count updates."""
    inner = math.log1p(p.delta_total / (p.n_states * p.n_actions * p.o_alpha))
    return 0.0 if inner == 0.0 else _risk_scale(p) * inner


def _log_iterations(p: BoundParams, inner: float) -> float:
    """ln(1 + scale / theta * inner) / ln(1 / gamma), inf once the ratio overflows."""
    if inner == 0.0:
        return 0.0
    ratio = _div(_risk_scale(p), p.theta) * inner
    if not math.isfinite(ratio):
        return math.inf
    return math.log1p(ratio) / math.log(1.0 / p.gamma)


def stage_iteration_bound(p: BoundParams) -> float:
    """Integer iteration count, or inf when the inputs overflow double precision."""
    inner = math.log1p(p.delta_total / (p.n_states * p.n_actions * p.o_alpha))
    iterations = _log_iterations(p, inner)
    if not math.isfinite(iterations):
        return math.inf
    return math.ceil(iterations)


def sweep_iteration_bound(p: BoundParams) -> float:
    """delta_total is the observation count of the whole sweep, sweep_index its index L."""
    sa = p.n_states * p.n_actions
    inner = math.log1p(p.delta_total / (sa**2 * (p.o0 + p.sweep_index)))
    return sa * (_log_iterations(p, inner) + 1.0)


def backup_operation_count(n_states: int, n_actions: int, n_samples: int) -> float:
    """Arithmetic cost of one estimated backup with CVaR inner and outer measures."""
    return n_actions * n_samples * n_states * (n_states * math.log(n_states) + math.log(n_samples))


def all_bounds(p: BoundParams) -> dict:
    return {
        "sample_complexity_T": sample_complexity_T(p),
        "perturbation_bound": perturbation_bound(p),
        "stage_iteration_bound": stage_iteration_bound(p),
        "sweep_iteration_bound": sweep_iteration_bound(p),
    }
