"""Lattice-homomorphism extensions into l_p^n and related lattice checks.

A tuple (x_1*, ..., x_n*) of dual vectors defines the operator
T : E -> l_p^n, T x = (x_k*(x))_k, whose norm is the weak p-summing norm
of the tuple.  The unique lattice-homomorphism extension of T to the
expression lattice acts componentwise,

    T^ f = (f(x_1*), ..., f(x_n*)),

so applying the extension commutes with every calculus node: sup, inf,
absolute value and l_r-sums pass through coordinatewise, using the very
same floating-point operations on both routes.

The module also provides the disjointification of a finite family of
nonnegative vectors and a fuzz checker for the parametric convexity
inequality ||g(x_1, ..., x_m)|| <= M * g(||x_1||, ..., ||x_m||) over a
concrete l_r^d lattice (theta = 0 restricts the check to pairwise
disjoint tuples, theta = 1 checks all nonnegative tuples).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._seeds import rng_from
from .expressions import LatticeExpr, evaluate, powsum_reduce
from .spaces import SpaceModel, WeightedLp, dual_norm, norm_batch, weak_q_norm
from .summing import NormEstimate, SearchConfig, tuple_score


@dataclass(frozen=True)
class LpExtension:
    """Handle for the extension T^ of T = (x_k*)_k : E -> l_p^n."""

    p: float
    functionals: np.ndarray  # (n, d)
    operator_norm: float

    def __post_init__(self):
        arr = np.atleast_2d(np.asarray(self.functionals, dtype=float)).copy()
        arr.setflags(write=False)
        object.__setattr__(self, "functionals", arr)

    @property
    def target_dim(self) -> int:
        return self.functionals.shape[0]


def extend_to_lp(space: SpaceModel, functionals, p: float,
                 config: SearchConfig | None = None) -> LpExtension:
    """Extension handle with its operator norm.

    For finite p the operator norm is the weak p-summing norm of the
    tuple; for p = inf it is the largest dual norm among the rows (the
    sup-norm composition case).  An empty tuple extends into the zero
    space with norm 0.
    """
    rows = np.asarray(getattr(functionals, "functionals", functionals), dtype=float)
    rows = rows.reshape(-1, space.dim) if rows.size else np.zeros((0, space.dim))
    if rows.shape[0] == 0:
        return LpExtension(p=float(p), functionals=rows, operator_norm=0.0)
    space.check_dim(rows)
    if math.isinf(p):
        op_norm = max(dual_norm(space, row) for row in rows)
    else:
        cfg = config or SearchConfig()
        op_norm, _ = weak_q_norm(space, rows, p, restarts=cfg.weak_restarts,
                                 iters=cfg.weak_iters, tol=cfg.weak_tol,
                                 seed=cfg.seed)
    return LpExtension(p=float(p), functionals=rows, operator_norm=float(op_norm))


def apply_hom(ext: LpExtension, e: LatticeExpr) -> np.ndarray:
    """Componentwise image (f(x_1*), ..., f(x_n*)) of the expression."""
    if ext.functionals.shape[0] == 0:
        return np.zeros(0)
    return np.atleast_1d(evaluate(e, ext.functionals))


def lp_target_norm(values: np.ndarray, p: float) -> float:
    """The l_p norm in the target space of an extension."""
    values = np.atleast_1d(np.asarray(values, dtype=float))
    if values.size == 0:
        return 0.0
    if math.isinf(p):
        return float(np.max(np.abs(values)))
    return float(np.sum(np.abs(values) ** p) ** (1.0 / p))


@dataclass(frozen=True)
class ExtensionBoundReport:
    rho: float
    operator_norm: float
    lower: float
    upper: float | None
    pooled: bool
    ok_pooled: bool
    ok_upper: bool

    @property
    def passed(self) -> bool:
        return self.ok_pooled and self.ok_upper

    def to_json(self) -> dict:
        return {"rho": self.rho, "operator_norm": self.operator_norm,
                "lower": self.lower, "upper": self.upper, "pooled": self.pooled,
                "ok_pooled": self.ok_pooled, "ok_upper": self.ok_upper}


def verify_extension_bound(space: SpaceModel, e: LatticeExpr, ext: LpExtension,
                           estimate: NormEstimate, *, pooled: bool = False,
                           tol_pooled: float = 1e-8,
                           tol_upper: float = 1e-6) -> ExtensionBoundReport:
    """Check ||T^ f||_p / ||T|| against the norm estimate (report only).

    The ratio rho is itself the score of the tuple, hence a valid lower
    bound for the norm; it must not exceed the pooled lower estimate when
    the tuple was part of the estimate's candidate pool, and must stay
    below any attached upper estimate.
    """
    if math.isinf(ext.p):
        raise ValueError("extension bound reports need finite p")
    image = apply_hom(ext, e)
    if ext.operator_norm <= 1e-14:
        rho = 0.0
    else:
        rho = lp_target_norm(image, ext.p) / ext.operator_norm
    ok_pooled = (not pooled) or rho <= estimate.lower + tol_pooled
    ok_upper = estimate.upper is None or rho <= estimate.upper + tol_upper
    return ExtensionBoundReport(rho=float(rho), operator_norm=ext.operator_norm,
                                lower=estimate.lower, upper=estimate.upper,
                                pooled=pooled, ok_pooled=bool(ok_pooled),
                                ok_upper=bool(ok_upper))


# ---------------------------------------------------------------------------
# disjointification


def disjointify(vectors) -> np.ndarray:
    """Pairwise disjoint minorants x^i = min_{j != i} (y^i - y^i /\\ y^j).

    Inputs must be componentwise nonnegative vectors of equal length.  The
    outputs are pairwise disjoint exactly (componentwise minima are exact
    floating-point zeros), dominated by the inputs, and already-disjoint
    families pass through unchanged.  A single vector is returned as is
    (the empty meet convention).
    """
    arr = np.atleast_2d(np.asarray(vectors, dtype=float))
    if np.any(arr < 0):
        raise ValueError("disjointify needs componentwise nonnegative vectors")
    m = arr.shape[0]
    if m == 1:
        return arr.copy()
    out = np.empty_like(arr)
    for i in range(m):
        others = np.delete(arr, i, axis=0)
        residues = arr[i][None, :] - np.minimum(arr[i][None, :], others)
        out[i] = np.min(residues, axis=0)
    return out


# ---------------------------------------------------------------------------
# parametric convexity fuzzing


@dataclass(frozen=True)
class DConvexityReport:
    g_exponent: float
    arity: int
    theta: int
    bound: float
    samples: int
    violations: int
    first_violation: int | None
    worst_excess: float
    worst_case: list | None

    @property
    def passed(self) -> bool:
        return self.violations == 0

    def to_json(self) -> dict:
        return {"g_exponent": "inf" if math.isinf(self.g_exponent) else self.g_exponent,
                "arity": self.arity, "theta": self.theta, "bound": self.bound,
                "samples": self.samples, "violations": self.violations,
                "first_violation": self.first_violation,
                "worst_excess": self.worst_excess, "worst_case": self.worst_case}


def dconvexity_check(g_exponent: float, arity: int, theta: int, bound: float,
                     lattice: SpaceModel, samples: int, seed: int = 0,
                     tol: float = 1e-9) -> DConvexityReport:
    """Fuzz the inequality ||g(x_1..x_m)|| <= M g(||x_1||..||x_m||).

    ``g`` is the l_s-sum of arity m (s = ``g_exponent``), the lattice is a
    concrete weighted l_r^d with its norm, and theta = 0 disjointifies
    each sampled tuple before checking.  Violations are reported, not
    raised: finding them is the point for lattices that fail the claimed
    convexity.
    """
    if not isinstance(lattice, WeightedLp):
        raise ValueError("the concrete lattice must be a weighted l_r model "
                         "(polytope norms need not be lattice norms)")
    if not (g_exponent >= 1.0):
        raise ValueError("the l_s-sum family needs s >= 1")
    if theta not in (0, 1):
        raise ValueError("theta selects disjoint-only (0) or all tuples (1)")
    if bound < 1.0:
        raise ValueError("convexity constants are at least one")
    rng = rng_from(seed, "dconvex")
    d = lattice.dim
    violations = 0
    first: int | None = None
    worst_excess = 0.0
    worst_case = None
    for idx in range(samples):
        tup = rng.uniform(0.0, 1.0, size=(arity, d))
        if rng.random() < 0.25:
            tup *= rng.integers(0, 2, size=(arity, d))
        if theta == 0:
            tup = disjointify(tup)
        lhs = float(norm_batch(lattice, powsum_reduce(g_exponent, tup))[0])
        norms = norm_batch(lattice, tup)
        rhs = bound * float(powsum_reduce(g_exponent, norms[:, None])[0])
        excess = lhs - rhs
        if excess > tol * max(1.0, rhs):
            violations += 1
            if first is None:
                first = idx
            if excess > worst_excess:
                worst_excess = excess
                worst_case = [[float(c) for c in row] for row in tup]
    return DConvexityReport(g_exponent=float(g_exponent), arity=arity,
                            theta=theta, bound=float(bound), samples=samples,
                            violations=violations, first_violation=first,
                            worst_excess=float(worst_excess), worst_case=worst_case)


# ---------------------------------------------------------------------------
# pooled extension experiment helper


def score_of_extension(space: SpaceModel, e: LatticeExpr, ext: LpExtension,
                       config: SearchConfig | None = None) -> float:
    """The tuple score of the extension's functionals at (p, p)."""
    value, _ = tuple_score(space, e, ext.functionals, ext.p, ext.p, config)
    return value
