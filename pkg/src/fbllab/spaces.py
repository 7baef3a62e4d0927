"""Finite-dimensional normed-space oracles.

A space model packages everything the rest of the library needs about a
finite-dimensional real normed space E: the norm, the dual norm, duality
(norming) maps, extreme points of the unit ball when they are available
exactly, quasi-uniform unit-sphere samples otherwise, and the weak
q-summing norm of a finite tuple of dual vectors,

    omega_q(x_1*, ..., x_n*) = sup_{x in B_E} (sum_k |x_k*(x)|^q)^(1/q).

Two kinds of model are supported:

* ``WeightedLp(r, weights)``: the norm ||x|| = ||(w_i x_i)_i||_r for
  1 <= r <= inf, where r = inf means the weighted max.  The dual is the
  weighted l_{r*} space with inverted weights (r* the conjugate exponent,
  with the convention 1/inf = 0).
* ``Polytope(vertices)``: the Minkowski gauge of a symmetric,
  full-dimensional vertex hull.  The gauge is computed by a small LP and
  the dual norm is a vertex maximum.

The weak q-summing norm is a supremum of a convex function over the unit
ball, so it is attained at an extreme point.  Where the extreme points are
known exactly (polytopes, weighted l_1, small weighted l_inf) the supremum
is an exact finite maximum; for curved balls with q = 2 it is a largest
singular value; otherwise it is computed by a multi-start conditional
gradient ascent whose iterates stay inside the ball (the reported value is
therefore never an overestimate).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._seeds import child_seed, rng_from


class SpaceError(ValueError):
    pass


class DimensionMismatchError(SpaceError):
    pass


def conjugate_exponent(r: float) -> float:
    if r == 1:
        return math.inf
    if math.isinf(r):
        return 1.0
    return r / (r - 1.0)


def _as_matrix(functionals) -> np.ndarray:
    """Accept an (n, d) array, a list of vectors, or a FunctionalTuple."""
    funcs = getattr(functionals, "functionals", functionals)
    arr = np.atleast_2d(np.asarray(funcs, dtype=float))
    return arr


@dataclass(frozen=True)
class SpaceModel:
    """Base class; use :class:`WeightedLp` or :class:`Polytope`."""

    dim: int

    def __post_init__(self):
        if self.dim < 1:
            raise SpaceError("dimension must be a positive integer")
        object.__setattr__(self, "_memo", {})

    def check_dim(self, vec: np.ndarray) -> np.ndarray:
        arr = np.asarray(vec, dtype=float)
        if arr.shape[-1] != self.dim:
            raise DimensionMismatchError(
                f"vector of length {arr.shape[-1]} in a {self.dim}-dimensional space")
        return arr

    def dual(self) -> "SpaceModel":
        memo = self._memo
        if "dual" not in memo:
            memo["dual"] = self._make_dual()
        return memo["dual"]

    def _make_dual(self) -> "SpaceModel":
        raise NotImplementedError


@dataclass(frozen=True)
class WeightedLp(SpaceModel):
    r: float = 2.0
    weights: np.ndarray = field(default=None)

    def __post_init__(self):
        super().__post_init__()
        if not (self.r >= 1.0):
            raise SpaceError("the exponent must satisfy r >= 1 (inf allowed)")
        w = (np.ones(self.dim) if self.weights is None
             else np.asarray(self.weights, dtype=float).copy())
        if w.shape != (self.dim,):
            raise SpaceError("weights length must equal dim")
        if not np.all(w > 0):
            raise SpaceError("weights must be strictly positive")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    def _make_dual(self) -> "WeightedLp":
        return WeightedLp(self.dim, r=conjugate_exponent(self.r),
                          weights=1.0 / self.weights)


@dataclass(frozen=True)
class Polytope(SpaceModel):
    vertices: np.ndarray = field(default=None)

    def __post_init__(self):
        super().__post_init__()
        v = np.asarray(self.vertices, dtype=float).copy()
        if v.ndim != 2 or v.shape[1] != self.dim or v.shape[0] < 2:
            raise SpaceError("vertices must form a nonempty (k, dim) array")
        for row in v:
            if not any(np.array_equal(row, -other) for other in v):
                raise SpaceError("vertex set must be symmetric (v present => -v present)")
        if np.linalg.matrix_rank(v) < self.dim:
            raise SpaceError("vertex set must span the full space")
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)

    def polar_vertices(self) -> np.ndarray:
        """Vertices of the polar body (= extreme points of the dual ball)."""
        memo = self._memo
        if "polar" not in memo:
            memo["polar"] = _polar_vertices(self.vertices)
        return memo["polar"]

    def _make_dual(self) -> "Polytope":
        return Polytope(self.dim, vertices=self.polar_vertices())


def _polar_vertices(vertices: np.ndarray) -> np.ndarray:
    dim = vertices.shape[1]
    if dim == 1:
        reach = float(np.max(np.abs(vertices)))
        return np.array([[1.0 / reach], [-1.0 / reach]])
    from scipy.spatial import ConvexHull

    hull = ConvexHull(vertices)
    # facet {<a, x> <= b} of the hull maps to the polar vertex a / b
    normals = hull.equations[:, :-1]
    offsets = -hull.equations[:, -1]
    if np.any(offsets <= 0):
        raise SpaceError("polytope must contain the origin in its interior")
    polar = normals / offsets[:, None]
    return _dedupe_rows(polar)


def _dedupe_rows(rows: np.ndarray, decimals: int = 12) -> np.ndarray:
    seen = {}
    for row in rows:
        key = tuple(np.round(row, decimals))
        if key not in seen:
            seen[key] = row
    return np.array(list(seen.values()))


# ---------------------------------------------------------------------------
# norms and pairings


def norm(space: SpaceModel, x) -> float:
    """The model norm of ``x``; for polytopes, the Minkowski gauge (by LP)."""
    x = space.check_dim(x)
    if isinstance(space, WeightedLp):
        return float(_lp_norm(space, x[None, :])[0])
    return _polytope_gauge(space, x)


def norm_batch(space: SpaceModel, xs: np.ndarray) -> np.ndarray:
    """Vectorized norm; polytope gauges use the support-function formula
    over polar vertices, which agrees with the gauge LP."""
    xs = space.check_dim(np.atleast_2d(np.asarray(xs, dtype=float)))
    if isinstance(space, WeightedLp):
        return _lp_norm(space, xs)
    polar = space.polar_vertices()
    return np.max(xs @ polar.T, axis=1)


def _lp_norm(space: WeightedLp, xs: np.ndarray) -> np.ndarray:
    scaled = np.abs(xs * space.weights)
    if math.isinf(space.r):
        return np.max(scaled, axis=-1)
    if space.r == 1:
        return np.sum(scaled, axis=-1)
    return np.sum(scaled ** space.r, axis=-1) ** (1.0 / space.r)


def _polytope_gauge(space: Polytope, x: np.ndarray) -> float:
    if not np.any(x):
        return 0.0
    from .simplex import LpProblem, lp_solve

    # gauge(x) = min sum(lam) s.t. V^T lam = x, lam >= 0
    vt = space.vertices.T
    a = np.vstack([vt, -vt])
    b = np.concatenate([x, -x])
    c = np.ones(space.vertices.shape[0])
    sol = lp_solve(LpProblem(c=c, A=a, b=b))
    return float(sol.value)


def dual_norm(space: SpaceModel, xstar) -> float:
    """sup over the unit ball of |<x, x*>|."""
    xstar = space.check_dim(xstar)
    return float(dual_norm_batch(space, xstar[None, :])[0])


def dual_norm_batch(space: SpaceModel, xstars: np.ndarray) -> np.ndarray:
    xstars = space.check_dim(np.atleast_2d(np.asarray(xstars, dtype=float)))
    if isinstance(space, WeightedLp):
        return _lp_norm(space.dual(), xstars)
    return np.max(np.abs(xstars @ space.vertices.T), axis=1)


def pairing(x, xstar) -> float:
    return float(np.dot(np.asarray(x, float), np.asarray(xstar, float)))


# ---------------------------------------------------------------------------
# duality (norming) maps


def norming_functional(space: SpaceModel, x) -> np.ndarray:
    """Some x* in B_{E*} with <x, x*> = ||x|| (zero vector for x = 0)."""
    x = space.check_dim(x)
    return norming_functional_batch(space, x[None, :])[0]


def norming_functional_batch(space: SpaceModel, xs: np.ndarray) -> np.ndarray:
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    if isinstance(space, Polytope):
        polar = space.polar_vertices()
        out = polar[np.argmax(xs @ polar.T, axis=1)].copy()
        out[~np.any(xs, axis=1)] = 0.0
        return out
    return _lp_norming(space, xs)


def norming_point(space: SpaceModel, xstar) -> np.ndarray:
    """Some x in B_E with <x, x*> = ||x*||_* (the duality map into E)."""
    xstar = space.check_dim(xstar)
    return norming_point_batch(space, xstar[None, :])[0]


def norming_point_batch(space: SpaceModel, xstars: np.ndarray) -> np.ndarray:
    xstars = np.atleast_2d(np.asarray(xstars, dtype=float))
    if isinstance(space, Polytope):
        verts = space.vertices
        idx = np.argmax(xstars @ verts.T, axis=1)
        out = verts[idx].copy()
        out[~np.any(xstars, axis=1)] = 0.0
        return out
    # E** = E: the norming point is the norming functional taken in E*
    return _lp_norming(space.dual(), xstars)


def _lp_norming(space: WeightedLp, xs: np.ndarray) -> np.ndarray:
    """Rowwise norming functionals for a weighted l_r space.

    With u = W x the norming functional of x is W * J(u) where J is the
    duality map of plain l_r, so the result lives in the dual weighted
    space W^{-1} l_{r*}.
    """
    u = xs * space.weights
    r = space.r
    out = np.zeros_like(u)
    nonzero = np.any(u, axis=1)
    if not np.any(nonzero):
        return out
    uu = u[nonzero]
    if r == 1:
        j = np.sign(uu)
    elif math.isinf(r):
        j = np.zeros_like(uu)
        idx = np.argmax(np.abs(uu), axis=1)
        rows = np.arange(uu.shape[0])
        j[rows, idx] = np.sign(uu[rows, idx])
    else:
        mags = np.abs(uu)
        denom = np.sum(mags**r, axis=1) ** ((r - 1.0) / r)
        j = np.sign(uu) * mags ** (r - 1.0) / denom[:, None]
    out[nonzero] = j
    return out * space.weights


# ---------------------------------------------------------------------------
# extreme points and sphere sampling


def exact_extreme_points(space: SpaceModel, budget: int = 4096):
    """The extreme points of B_E when they form an exact finite list
    within ``budget`` (polytopes, weighted l_1, small weighted l_inf,
    dimension one); ``None`` otherwise."""
    memo = space._memo
    key = ("extreme", budget)
    if key in memo:
        return memo[key]
    result = None
    if isinstance(space, Polytope):
        result = space.vertices
    else:
        d, r, w = space.dim, space.r, space.weights
        if r == 1 or d == 1:
            eye = np.eye(d) / w
            result = np.vstack([eye, -eye])
        elif math.isinf(r) and 2**d <= budget:
            from itertools import product

            signs = np.array(list(product((-1.0, 1.0), repeat=d)))
            result = signs / w
    memo[key] = result
    return result


def ball_extreme_points(space: SpaceModel, budget: int, seed: int = 0):
    """Extreme points of B_E, exact when the ball is (a scaled copy of) a
    polytope whose vertex list fits the budget; otherwise a quasi-uniform
    sphere sample of size ``budget`` flagged inexact.

    Returns ``(points, exact)``.
    """
    exact = exact_extreme_points(space, budget)
    if exact is not None:
        return exact.copy(), True
    return sphere_sample(space, budget, seed), False


def sphere_sample(space: SpaceModel, count: int, seed: int = 0) -> np.ndarray:
    """Quasi-uniform (Halton) sample of the unit sphere of the space.

    Samples are memoized per (count, seed) on the immutable space model;
    callers must not mutate the returned array.
    """
    if count < 1:
        return np.zeros((0, space.dim))
    memo = space._memo
    key = ("sphere", count, seed)
    if key not in memo:
        from scipy.stats import norm as normal_dist
        from scipy.stats import qmc

        halton = qmc.Halton(d=space.dim, scramble=True,
                            seed=np.random.Generator(np.random.PCG64(
                                child_seed(seed, "halton-sphere"))))
        u = np.clip(halton.random(count), 1e-12, 1 - 1e-12)
        directions = normal_dist.ppf(u)
        degenerate = ~np.any(directions, axis=1)
        directions[degenerate] = 1.0
        directions /= norm_batch(space, directions)[:, None]
        directions.setflags(write=False)
        memo[key] = directions
    return memo[key]


# ---------------------------------------------------------------------------
# weak q-summing norm


def weak_q_norm(space: SpaceModel, functionals, q: float, *,
                restarts: int = 12, iters: int = 80, tol: float = 1e-9,
                seed: int = 0, warm_start: np.ndarray | None = None,
                sign_budget: int = 4096):
    """sup_{x in B_E} (sum_k |x_k*(x)|^q)^(1/q) together with a maximizer.

    The objective is convex, so the supremum is over extreme points of the
    ball; exact enumeration is used whenever the extreme points are exact,
    with a spectral shortcut for Euclidean balls at q = 2, and a multi-start
    conditional-gradient ascent otherwise.  An empty tuple gives value 0
    with the zero witness.
    """
    a = _as_matrix(functionals)
    if a.size == 0:
        return 0.0, np.zeros(space.dim)
    a = space.check_dim(a)
    if not (q >= 1.0) or math.isinf(q):
        raise SpaceError("the weak summing exponent must satisfy 1 <= q < inf")
    if a.shape[0] == 1:
        return dual_norm(space, a[0]), norming_point(space, a[0])

    points = exact_extreme_points(space, sign_budget)
    if points is not None:
        scores = _lq_rows(a, points, q)
        k = int(np.argmax(scores))
        return float(scores[k]), points[k].copy()

    if isinstance(space, WeightedLp) and space.r == 2 and q == 2:
        scaled = a / space.weights
        _, s, vt = np.linalg.svd(scaled, full_matrices=False)
        return float(s[0]), vt[0] / space.weights

    return _weak_ascent(space, a, q, restarts, iters, tol, seed, warm_start)


def _lq(a: np.ndarray, x: np.ndarray, q: float) -> float:
    vals = np.abs(a @ x)
    if q == 1:
        return float(np.sum(vals))
    return float(np.sum(vals**q) ** (1.0 / q))


def _lq_rows(a: np.ndarray, xs: np.ndarray, q: float) -> np.ndarray:
    vals = np.abs(xs @ a.T)
    if q == 1:
        return np.sum(vals, axis=1)
    return np.sum(vals**q, axis=1) ** (1.0 / q)


def _weak_ascent(space, a, q, restarts, iters, tol, seed, warm_start):
    """Multi-start conditional-gradient ascent for the weak q-norm.

    Each step replaces x by the ball point norming the gradient; convexity
    of the objective makes every step monotone, and every iterate is
    feasible, so the final value is a certified lower estimate of the
    supremum (tight to ``tol`` in practice).
    """
    starts = [norming_point_batch(space, a)]
    if restarts > 0:
        starts.append(sphere_sample(space, restarts, seed=seed))
    if warm_start is not None:
        starts.append(np.atleast_2d(warm_start))
    xs = np.vstack(starts)
    vals = _lq_rows(a, xs, q)
    for _ in range(iters):
        p = xs @ a.T
        if q == 1:
            grads = np.sign(p) @ a
        else:
            grads = (np.abs(p) ** (q - 1.0) * np.sign(p)) @ a
        nxt = norming_point_batch(space, grads)
        nvals = _lq_rows(a, nxt, q)
        keep = nvals >= vals
        xs = np.where(keep[:, None], nxt, xs)
        gain = np.max(nvals - vals)
        vals = np.maximum(nvals, vals)
        if gain <= tol * max(float(np.max(vals)), 1e-300):
            break
    k = int(np.argmax(vals))
    return float(vals[k]), xs[k].copy()


# ---------------------------------------------------------------------------
# JSON descriptions


def space_from_json(doc: dict) -> SpaceModel:
    """Build a space from {"dim", "kind", "r"|"weights"|"vertices"}."""
    kind = doc.get("kind")
    dim = int(doc["dim"])
    if kind == "lp":
        raw_r = doc.get("r", 2)
        r = math.inf if raw_r in ("inf", "Infinity") else float(raw_r)
        weights = doc.get("weights")
        return WeightedLp(dim, r=r, weights=None if weights is None
                          else np.asarray(weights, dtype=float))
    if kind == "polytope":
        return Polytope(dim, vertices=np.asarray(doc["vertices"], dtype=float))
    raise SpaceError(f"unknown space kind {kind!r}")


def space_to_json(space: SpaceModel) -> dict:
    if isinstance(space, WeightedLp):
        return {"dim": space.dim, "kind": "lp",
                "r": "inf" if math.isinf(space.r) else space.r,
                "weights": [float(w) for w in space.weights]}
    return {"dim": space.dim, "kind": "polytope",
            "vertices": [[float(c) for c in v] for v in space.vertices]}


def lp_space(dim: int, r: float, weights=None) -> WeightedLp:
    return WeightedLp(dim, r=r, weights=weights)


def polytope_space(vertices) -> Polytope:
    vertices = np.asarray(vertices, dtype=float)
    return Polytope(vertices.shape[1], vertices=vertices)
