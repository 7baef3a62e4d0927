"""Dense simplex solver for the desk-scale LPs used by the library.

Problems are stated as

    minimize    c . x
    subject to  A x >= b,   x >= 0.

Pivoting uses Bland's rule throughout, which guarantees termination on the
degenerate problems that Minkowski gauges and domination certificates
routinely produce.  When the objective is componentwise nonnegative (the
case for every LP built here) the problem is solved through its dual

    maximize    b . y     subject to  A^T y <= c,  y >= 0,

whose slack basis is immediately feasible; the primal solution is read off
the optimal dual multipliers.  General objectives fall back to a two-phase
tableau.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_EPS = 1e-11


class LpError(Exception):
    pass


class InfeasibleError(LpError):
    "Raised when the constraint system admits no nonnegative solution."


class UnboundedError(LpError):
    "Raised when the objective is unbounded below on the feasible set."


@dataclass(frozen=True)
class LpProblem:
    """min c.x  s.t.  A x >= b,  x >= 0."""

    c: np.ndarray
    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float)
        a = np.atleast_2d(np.asarray(self.A, dtype=float))
        b = np.asarray(self.b, dtype=float)
        if a.shape != (b.size, c.size):
            raise LpError(f"inconsistent LP dimensions: A is {a.shape}, "
                          f"b has {b.size}, c has {c.size}")
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "A", a)
        object.__setattr__(self, "b", b)


@dataclass(frozen=True)
class LpSolution:
    value: float
    x: np.ndarray
    y: np.ndarray  # row multipliers (dual solution)


def lp_solve(prob: LpProblem) -> LpSolution:
    """Optimal value and solution; raises Infeasible/Unbounded distinctly."""
    if not (np.all(np.isfinite(prob.c)) and np.all(np.isfinite(prob.A))
            and np.all(np.isfinite(prob.b))):
        raise LpError("LP data must be finite")
    if np.all(prob.c >= 0.0):
        return _solve_via_dual(prob)
    return _solve_two_phase(prob)


def _solve_via_dual(prob: LpProblem) -> LpSolution:
    try:
        value, y, x = _simplex_max(prob.A.T, prob.c, prob.b)
    except UnboundedError:
        # with c >= 0 the dual is feasible (y = 0), so an unbounded dual
        # certifies primal infeasibility
        raise InfeasibleError("constraints A x >= b admit no x >= 0") from None
    return LpSolution(value=value, x=x, y=y)


def _simplex_max(a_ub: np.ndarray, b_ub: np.ndarray, obj: np.ndarray):
    """max obj.z  s.t.  a_ub z <= b_ub (b_ub >= 0), z >= 0, via Bland.

    Returns ``(value, z, multipliers)`` where multipliers are the objective
    row entries under the slack columns at optimality (the dual solution).
    """
    m, n = a_ub.shape
    if np.any(b_ub < -_EPS):
        raise LpError("slack start requires a nonnegative right-hand side")
    tableau = np.zeros((m + 1, n + m + 1))
    tableau[:m, :n] = a_ub
    tableau[:m, n:n + m] = np.eye(m)
    tableau[:m, -1] = np.maximum(b_ub, 0.0)
    tableau[m, :n] = -obj
    basis = list(range(n, n + m))

    _pivot_until_optimal(tableau, basis)

    z = np.zeros(n)
    for row, var in enumerate(basis):
        if var < n:
            z[var] = tableau[row, -1]
    multipliers = tableau[m, n:n + m].copy()
    return float(tableau[m, -1]), z, multipliers


def _pivot_until_optimal(tableau: np.ndarray, basis: list[int],
                         max_pivots: int = 200_000):
    m = len(basis)
    width = tableau.shape[1] - 1
    basis_arr = np.asarray(basis)
    for _ in range(max_pivots):
        negative = np.nonzero(tableau[m, :width] < -_EPS)[0]
        if negative.size == 0:
            basis[:] = basis_arr.tolist()
            return
        entering = int(negative[0])  # Bland: smallest eligible index
        col = tableau[:m, entering]
        rhs = tableau[:m, -1]
        eligible = col > _EPS
        if not np.any(eligible):
            raise UnboundedError("objective is unbounded on the feasible set")
        ratios = np.full(m, np.inf)
        ratios[eligible] = rhs[eligible] / col[eligible]
        best = np.min(ratios)
        # Bland: break ratio ties by the smallest basic variable
        tied = ratios <= best + _EPS
        tied_basis = np.where(tied, basis_arr, np.iinfo(np.int64).max)
        leaving = int(np.argmin(tied_basis))
        _pivot(tableau, leaving, entering)
        basis_arr[leaving] = entering
    raise LpError("pivot limit exceeded")


def _pivot(tableau: np.ndarray, row: int, col: int):
    tableau[row] /= tableau[row, col]
    factors = tableau[:, col].copy()
    factors[row] = 0.0
    tableau -= np.outer(factors, tableau[row])
    tableau[:, col] = 0.0
    tableau[row, col] = 1.0


def _solve_two_phase(prob: LpProblem) -> LpSolution:
    """Two-phase primal simplex on  A x - s = b,  x, s >= 0  (min form)."""
    a, b, c = prob.A, prob.b, prob.c
    m, n = a.shape
    eq = np.hstack([a, -np.eye(m)])
    rhs = b.copy()
    flip = rhs < 0
    eq[flip] *= -1.0
    rhs[flip] *= -1.0

    total = n + m  # structural + surplus
    tableau = np.zeros((m + 1, total + m + 1))
    tableau[:m, :total] = eq
    tableau[:m, total:total + m] = np.eye(m)
    tableau[:m, -1] = rhs
    basis = list(range(total, total + m))
    # phase 1: minimize the artificial mass == maximize its negative
    tableau[m, :total] = -np.sum(eq, axis=0)
    tableau[m, -1] = -np.sum(rhs)
    _pivot_until_optimal(tableau, basis)
    if tableau[m, -1] < -1e-8:
        raise InfeasibleError("constraints A x >= b admit no x >= 0")
    # drive any leftover artificials out of the basis
    for row, var in enumerate(basis):
        if var >= total:
            for j in range(total):
                if abs(tableau[row, j]) > _EPS:
                    _pivot(tableau, row, j)
                    basis[row] = j
                    break

    work = np.delete(tableau, np.s_[total:total + m], axis=1)
    work[m, :] = 0.0
    cost = np.concatenate([c, np.zeros(m)])
    work[m, :total] = cost
    for row, var in enumerate(basis):
        if var < total:
            work[m, :] -= cost[var] * work[row, :]
    _pivot_until_optimal(work, basis)

    x = np.zeros(n)
    for row, var in enumerate(basis):
        if var < n:
            x[var] = work[row, -1]
    # row multipliers: reduced costs on the surplus columns, sign-adjusted
    y = work[m, n:total].copy()
    y[flip] *= -1.0
    return LpSolution(value=float(-work[m, -1]), x=x, y=y)
