"""
Dense two-phase tableau simplex with Bland's rule.

Solves   maximize c^T x   s.t.   A_ub x <= b_ub,  A_eq x = b_eq,  x >= 0
for the small envelope programs of the risk module (a few hundred columns at
most). Free variables are split by the caller.
"""
import logging
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from backend.errors import LPInfeasible, LPUnbounded, NonConvergence

logger = logging.getLogger(__name__)

FEAS_TOL = 1e-9
PIVOT_TOL = 1e-12
MAX_PIVOTS = 100_000


@dataclass(frozen=True)
class LPResult:
    value: float
    x: np.ndarray
    pivots: int


def _pivot(tableau: np.ndarray, row: int, col: int):
    tableau[row] /= tableau[row, col]
    column = tableau[:, col].copy()
    column[row] = 0.0
    tableau -= np.outer(column, tableau[row])


def _entering(reduced: np.ndarray, allowed: np.ndarray) -> Optional[int]:
    candidates = np.flatnonzero((reduced < -FEAS_TOL) & allowed)
    return int(candidates[0]) if candidates.size else None


def _leaving(tableau: np.ndarray, col: int, basis: List[int]) -> Optional[int]:
    column = tableau[1:, col]
    rhs = tableau[1:, -1]
    best_row, best_ratio, best_var = None, np.inf, None
    for i in np.flatnonzero(column > PIVOT_TOL):
        ratio = rhs[i] / column[i]
        if ratio < best_ratio - PIVOT_TOL or (abs(ratio - best_ratio) <= PIVOT_TOL and basis[i] < best_var):
            best_row, best_ratio, best_var = i, ratio, basis[i]
    return None if best_row is None else best_row + 1


def _run(tableau: np.ndarray, basis: List[int], allowed: np.ndarray, pivots: int) -> int:
    while True:
        col = _entering(tableau[0, :-1], allowed)
        if col is None:
            return pivots
        row = _leaving(tableau, col, basis)
        if row is None:
            raise LPUnbounded(f"objective unbounded along column {col}")
        _pivot(tableau, row, col)
        basis[row - 1] = col
        pivots += 1
        if pivots > MAX_PIVOTS:
            raise NonConvergence(float("nan"), pivots)


def solve_lp(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None) -> LPResult:
    c = np.asarray(c, dtype=float)
    n = c.size
    A_ub = np.zeros((0, n)) if A_ub is None else np.atleast_2d(np.asarray(A_ub, dtype=float))
    b_ub = np.zeros(0) if b_ub is None else np.asarray(b_ub, dtype=float).ravel()
    A_eq = np.zeros((0, n)) if A_eq is None else np.atleast_2d(np.asarray(A_eq, dtype=float))
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=float).ravel()
    m_ub, m_eq = A_ub.shape[0], A_eq.shape[0]
    m = m_ub + m_eq

    # columns: x | slacks | artificials
    n_slack = m_ub
    width = n + n_slack + m
    A = np.zeros((m, width))
    A[:m_ub, :n] = A_ub
    A[:m_ub, n:n + n_slack] = np.eye(m_ub)
    A[m_ub:, :n] = A_eq
    b = np.concatenate([b_ub, b_eq])
    flip = b < 0
    A[flip] *= -1.0
    b[flip] *= -1.0
    A[:, n + n_slack:] = np.eye(m)

    tableau = np.zeros((m + 1, width + 1))
    tableau[1:, :-1] = A
    tableau[1:, -1] = b
    basis = list(range(n + n_slack, width))
    # phase one minimizes the artificial sum; its reduced costs are minus the column sums
    tableau[0, :n + n_slack] = -A[:, :n + n_slack].sum(axis=0)
    tableau[0, -1] = -b.sum()

    everything = np.ones(width, dtype=bool)
    pivots = _run(tableau, basis, everything, 0)
    if -tableau[0, -1] > FEAS_TOL * max(1.0, float(np.abs(b).max(initial=0.0))):
        raise LPInfeasible(f"envelope is empty (phase-one residual {-tableau[0, -1]:.3e})")

    # drive zero-level artificials out of the basis, dropping redundant rows
    artificial = np.zeros(width, dtype=bool)
    artificial[n + n_slack:] = True
    keep = [0]
    for i in range(1, m + 1):
        if not artificial[basis[i - 1]]:
            keep.append(i)
            continue
        row = tableau[i, :n + n_slack]
        nonzero = np.flatnonzero(np.abs(row) > 1e-9)
        if nonzero.size:
            _pivot(tableau, i, int(nonzero[0]))
            basis[i - 1] = int(nonzero[0])
            keep.append(i)
    tableau = tableau[keep]
    basis = [basis[i - 1] for i in keep[1:]]

    # phase two: minimize -c^T x
    cost = np.zeros(width)
    cost[:n] = -c
    tableau[0, :] = 0.0
    tableau[0, :-1] = cost
    for i, var in enumerate(basis, start=1):
        if cost[var] != 0.0:
            tableau[0] -= cost[var] * tableau[i]
    pivots = _run(tableau, basis, ~artificial, pivots)

    x = np.zeros(width)
    for i, var in enumerate(basis, start=1):
        x[var] = tableau[i, -1]
    solution = x[:n]
    return LPResult(value=float(c @ solution), x=solution, pivots=pivots)
