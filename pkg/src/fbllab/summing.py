"""Estimators and oracles for the (p, q)-summing norms of lattice expressions.

For a positively homogeneous f : E* -> R the central quantity is

    ||f||_{p,q} = sup { (sum_k |f(x_k*)|^p)^(1/p) :
                        n in N, omega_q(x_1*, ..., x_n*) <= 1 },

where omega_q is the weak q-summing norm of the tuple; ||f||_p denotes the
diagonal case p = q (the free p-convex norm).  The supremum runs over
tuples of unbounded length, so exact computation is out of reach; this
module produces certified lower estimates with reproducing witnesses:

* :func:`pq_norm_lower` scores the homogeneous ratio
  score(T) = (sum_k |f(x_k*)|^p)^(1/p) / omega_q(T) over a candidate pool
  (norming functionals of the generators, dual-ball extreme points,
  quasi-uniform dual-sphere samples, a coarse grid scan in dimension <= 2)
  refined by multi-start projected ascent, with tuple lengths following a
  doubling schedule that stops once doubling stalls.
* :func:`pq_norm_bruteforce` exhausts a coordinate grid of tuples in
  dimension <= 2, renormalizing each tuple to weak q-norm one before
  scoring; it is the independent oracle for the estimator.
* :func:`sup_norm` is the supremum of |f| over the dual unit ball, i.e.
  exactly the singleton stage of the tuple search; computing it that way
  keeps the estimate-level inequality ||f||_inf <= ||f||_{p,q} automatic.
* :func:`inclusion_check`, :func:`divergence_exponent` and
  :func:`cotype_ratio_experiment` package the comparison results among
  these norms as checkable reports.

Scores are invariant under scaling a tuple, so every candidate is
renormalized to weak q-norm one; weak-norm values are computed over
feasible ball points only and hence never overestimated, which keeps every
reported lower bound sound.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np

from ._seeds import child_seed, parallel_map, rng_from
from .expressions import (LatticeExpr, collect_generators, eval_with_grad,
                          evaluate, random_lattice_linear)
from .spaces import (SpaceModel, WeightedLp, ball_extreme_points,
                     dual_norm_batch, exact_extreme_points, norm_batch,
                     norming_functional, norming_functional_batch,
                     sphere_sample, weak_q_norm)


class PQOrderError(ValueError):
    """p < q requested: the (p, q)-norm of any nonzero expression is
    infinite there (see :func:`divergence_exponent` for the growth rate)."""


class ZeroExpressionError(ValueError):
    pass


class InclusionHypothesisError(ValueError):
    pass


_TINY = 1e-14


@dataclass(frozen=True)
class FunctionalTuple:
    """A finite tuple of dual vectors with an optional cached weak norm."""

    functionals: np.ndarray
    cached_weak_q: tuple | None = None  # (q, value, witness)

    def __post_init__(self):
        arr = np.atleast_2d(np.asarray(self.functionals, dtype=float)).copy()
        arr.setflags(write=False)
        object.__setattr__(self, "functionals", arr)

    def __len__(self) -> int:
        return self.functionals.shape[0]

    @property
    def dim(self) -> int:
        return self.functionals.shape[1]

    def with_cached_weak_q(self, space: SpaceModel, q: float,
                           **kwargs) -> "FunctionalTuple":
        value, witness = weak_q_norm(space, self.functionals, q, **kwargs)
        return FunctionalTuple(self.functionals, cached_weak_q=(q, value, witness))


@dataclass(frozen=True)
class SearchConfig:
    seed: int = 0
    restarts: int = 6
    ascent_iters: int = 40
    max_tuple_len: int = 16
    stall_rel_tol: float = 1e-3
    singleton_samples: int = 48
    coarse_scan: bool = True
    coarse_scan_step: float = 0.12
    weak_restarts: int = 8
    weak_iters: int = 60
    weak_tol: float = 1e-9
    init_step: float = 0.25
    extra_candidates: tuple = ()

    def reseeded(self, *tags) -> "SearchConfig":
        return dataclasses.replace(
            self, seed=int(child_seed(self.seed, *tags).generate_state(1)[0]))


@dataclass(frozen=True)
class NormEstimate:
    p: float
    q: float
    lower: float
    witness: FunctionalTuple
    upper: float | None
    method: dict

    def __post_init__(self):
        if self.upper is not None and self.lower > self.upper + 1e-9:
            raise ValueError("lower estimate exceeds the attached upper estimate")

    def with_upper(self, upper: float) -> "NormEstimate":
        return dataclasses.replace(self, upper=float(upper))

    def to_json(self) -> dict:
        return {
            "p": self.p,
            "q": self.q,
            "lower": self.lower,
            "upper": self.upper,
            "witness": [[float(c) for c in row] for row in self.witness.functionals],
            "seed": self.method.get("seed"),
            "schedule": self.method.get("schedule"),
        }


# ---------------------------------------------------------------------------
# scoring helpers


def _numerator(e: LatticeExpr, rows: np.ndarray, p: float) -> float:
    vals = np.abs(np.atleast_1d(evaluate(e, rows)))
    if p == 1:
        return float(np.sum(vals))
    return float(np.sum(vals**p) ** (1.0 / p))


def tuple_score(space: SpaceModel, e: LatticeExpr, rows, p: float, q: float,
                config: SearchConfig | None = None):
    """score(T) = numerator / weak q-norm, with the normalized tuple."""
    cfg = config or SearchConfig()
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    omega, _ = weak_q_norm(space, rows, q, restarts=cfg.weak_restarts,
                           iters=cfg.weak_iters, tol=cfg.weak_tol, seed=cfg.seed)
    if omega <= _TINY:
        return 0.0, None
    normalized = rows / omega
    return _numerator(e, normalized, p), normalized


def _lex_smaller(a: np.ndarray, b: np.ndarray) -> bool:
    fa, fb = a.ravel(), b.ravel()
    if fa.size != fb.size:
        return fa.size < fb.size
    for x, y in zip(fa, fb):
        if x != y:
            return x < y
    return False


class _Best:
    """Maximum with deterministic lexicographic tie-breaking."""

    def __init__(self):
        self.value = 0.0
        self.rows = None

    def offer(self, value: float, rows: np.ndarray | None):
        if rows is None:
            return
        if value > self.value or (value == self.value and self.rows is not None
                                  and _lex_smaller(rows, self.rows)):
            self.value = value
            self.rows = rows.copy()
        elif self.rows is None and value >= self.value:
            self.value = value
            self.rows = rows.copy()


# ---------------------------------------------------------------------------
# ascent


def _ratio_gradient(space, e, p, q, rows, f_vals, witness):
    """Gradient of score at a tuple normalized to weak q-norm one."""
    n, d = rows.shape
    mags = np.abs(f_vals)
    if p == 1:
        coeff = np.sign(f_vals)
        total = float(np.sum(mags))
    else:
        total_p = float(np.sum(mags**p))
        total = total_p ** (1.0 / p)
        if total <= _TINY:
            return None, 0.0
        coeff = (total ** (1.0 - p)) * mags ** (p - 1.0) * np.sign(f_vals)
    if total <= _TINY:
        return None, 0.0
    grad = np.zeros_like(rows)
    for k in range(n):
        _, g = eval_with_grad(e, rows[k])
        grad[k] = coeff[k] * g
    pair = rows @ witness
    if q == 1:
        omega_coeff = np.sign(pair)
    else:
        omega_coeff = np.abs(pair) ** (q - 1.0) * np.sign(pair)
    grad -= total * omega_coeff[:, None] * witness[None, :]
    return grad, total


def _ascend(space, e, p, q, rows, cfg: SearchConfig):
    """Projected ascent on the tuple ratio: step, renormalize, keep gains."""
    def renorm(t, warm=None):
        omega, wit = weak_q_norm(space, t, q, restarts=cfg.weak_restarts,
                                 iters=cfg.weak_iters, tol=cfg.weak_tol,
                                 seed=cfg.seed, warm_start=warm)
        if omega <= _TINY:
            return None, None
        return t / omega, wit

    state = renorm(np.atleast_2d(np.asarray(rows, dtype=float)))
    if state[0] is None:
        return 0.0, None
    current, witness = state
    f_vals = np.atleast_1d(evaluate(e, current))
    best = _numerator(e, current, p)
    step = cfg.init_step
    for _ in range(cfg.ascent_iters):
        grad, _ = _ratio_gradient(space, e, p, q, current, f_vals, witness)
        if grad is None:
            break
        scale = float(np.max(np.abs(grad)))
        if scale < 1e-13:
            break
        trial, trial_wit = renorm(current + (step / scale) * grad, warm=witness)
        if trial is not None:
            value = _numerator(e, trial, p)
            if value > best * (1.0 + 1e-12):
                current, witness, best = trial, trial_wit, value
                f_vals = np.atleast_1d(evaluate(e, current))
                step = min(step * 1.5, 2.0)
                continue
        step *= 0.5
        if step < 1e-8:
            break
    return best, current


# ---------------------------------------------------------------------------
# candidate generation


def _singleton_candidates(space, e, cfg: SearchConfig) -> np.ndarray:
    dual = space.dual()
    rows = []
    for g in collect_generators(e):
        if np.any(g):
            nf = norming_functional(space, g)
            rows.append(nf)
            rows.append(-nf)
    pts, _ = ball_extreme_points(dual, budget=64, seed=cfg.seed)
    rows.append(pts)
    if cfg.singleton_samples > 0:
        rows.append(sphere_sample(dual, cfg.singleton_samples, seed=cfg.seed))
    for extra in cfg.extra_candidates:
        rows.append(np.atleast_2d(np.asarray(extra, dtype=float)))
    stack = np.vstack([np.atleast_2d(r) for r in rows])
    return stack[np.any(stack, axis=1)]


def _singleton_stage(space, e, cfg: SearchConfig):
    """Best single functional: max |f(x*)| / ||x*||_* over the pool plus
    ascent refinements.  This is exactly sup |f| over the dual unit ball."""
    cands = _singleton_candidates(space, e, cfg)
    if cands.size == 0:
        return 0.0, None, np.zeros((0, space.dim))
    vals = np.abs(np.atleast_1d(evaluate(e, cands)))
    duals = dual_norm_batch(space, cands)
    ok = duals > _TINY
    scores = np.zeros(len(cands))
    scores[ok] = vals[ok] / duals[ok]
    order = np.argsort(-scores, kind="stable")
    top = order[:max(cfg.restarts, 1)]
    best = _Best()
    normalized = cands[order] / np.maximum(duals[order], _TINY)[:, None]
    results = parallel_map(
        lambda idx: _ascend(space, e, 1.0, 1.0, cands[idx][None, :], cfg),
        [int(i) for i in top if scores[i] > 0.0])
    for value, rows in results:
        best.offer(value, rows)
    for idx in order[:8]:
        if scores[idx] > 0.0:
            best.offer(float(scores[idx]), cands[idx][None, :] / duals[idx])
    return best.value, best.rows, normalized[:8]


def _stack(*parts) -> np.ndarray:
    return np.vstack([np.atleast_2d(p) for p in parts])


def pq_norm_lower(space: SpaceModel, e: LatticeExpr, p: float, q: float,
                  config: SearchConfig | None = None) -> NormEstimate:
    """Certified lower estimate of ||e||_{p,q} with a reproducing witness.

    Tuple lengths follow the doubling schedule 1, 2, 4, ... up to
    ``config.max_tuple_len``, stopping once doubling improves the estimate
    by less than ``config.stall_rel_tol`` relatively.  Tuples supplied in
    ``config.extra_candidates`` are always scored, so their scores never
    exceed the reported lower value.  No upper bound is produced here;
    upper estimates come from domination certificates and are attached
    separately.
    """
    cfg = config or SearchConfig()
    if not (p >= q >= 1.0):
        raise PQOrderError(
            f"need p >= q >= 1; the ({p}, {q}) norm of a nonzero expression "
            "is infinite (repeated-functional tuples grow like n^(1/p - 1/q))")

    best = _Best()
    stage_value, stage_rows, top_singles = _singleton_stage(space, e, cfg)
    best.offer(stage_value, stage_rows)
    schedule = [1]
    prev_value = best.value
    prev_rows = best.rows

    coarse: list[np.ndarray] = []
    if cfg.coarse_scan and space.dim <= 2 and cfg.max_tuple_len >= 2:
        coarse = _coarse_pairs(space, e, p, q, cfg)

    n = 2
    while n <= cfg.max_tuple_len and prev_rows is not None:
        starts = _stage_starts(n, prev_rows, top_singles, coarse, cfg, space)
        results = parallel_map(lambda T: _ascend(space, e, p, q, T, cfg), starts)
        stage_best = _Best()
        for value, rows in results:
            stage_best.offer(value, rows)
        best.offer(stage_best.value, stage_best.rows)
        schedule.append(n)
        if stage_best.value <= prev_value * (1.0 + cfg.stall_rel_tol):
            break
        prev_value = stage_best.value
        if stage_best.rows is not None:
            prev_rows = stage_best.rows
        n *= 2

    for extra in cfg.extra_candidates:
        value, rows = tuple_score(space, e, extra, p, q, cfg)
        best.offer(value, rows)

    witness_rows = best.rows if best.rows is not None else np.zeros((1, space.dim))
    witness = FunctionalTuple(witness_rows)
    if best.value > 0.0:
        witness = witness.with_cached_weak_q(
            space, q, restarts=cfg.weak_restarts, iters=cfg.weak_iters,
            tol=cfg.weak_tol, seed=cfg.seed)
    method = {"seed": cfg.seed, "restarts": cfg.restarts, "schedule": schedule,
              "stall_rel_tol": cfg.stall_rel_tol}
    return NormEstimate(p=float(p), q=float(q), lower=best.value,
                        witness=witness, upper=None, method=method)


def _stage_starts(n, prev_rows, top_singles, coarse, cfg, space):
    starts: list[np.ndarray] = []
    prev = np.atleast_2d(prev_rows)
    reps = max(1, int(np.ceil(n / prev.shape[0])))
    starts.append(np.tile(prev, (reps, 1))[:n])
    singles = [row for row in top_singles]
    for row in singles[:4]:
        stacked = _stack(prev, row)
        if stacked.shape[0] >= n:
            starts.append(stacked[:n])
    if n == 2:
        for i in range(min(3, len(singles))):
            for j in range(i, min(4, len(singles))):
                starts.append(_stack(singles[i], singles[j]))
        for rows in coarse:
            starts.append(rows)
    for extra in cfg.extra_candidates:
        arr = np.atleast_2d(np.asarray(extra, dtype=float))
        if arr.shape[0] == n:
            starts.append(arr)
    fill = sphere_sample(space.dual(), n * 3, seed=cfg.seed + n)
    starts.append(fill[:n])
    starts.append(fill[n:2 * n])
    # deterministic order; cap the stage's work
    return starts[:max(2 * cfg.restarts, 4)]


def _coarse_pairs(space, e, p, q, cfg) -> list[np.ndarray]:
    try:
        found = _grid_search(space, e, p, q, grid_step=cfg.coarse_scan_step,
                             max_len=2, top_k=6, outer_count=128)
    except ValueError:
        return []
    return [rows for _, rows in found if rows.shape[0] == 2]


def sup_norm(space: SpaceModel, e: LatticeExpr,
             config: SearchConfig | None = None) -> float:
    """sup of |f| over the dual unit ball B_{E*}.

    Computed over the dual-ball extreme points (exact where the dual ball
    is a polytope) augmented with multi-start ascent on the homogeneous
    ratio |f(x*)| / ||x*||_*; expressions are piecewise smooth but not
    convex, so vertex enumeration alone would be insufficient.
    """
    cfg = config or SearchConfig()
    value, _, _ = _singleton_stage(space, e, cfg)
    return value


# ---------------------------------------------------------------------------
# brute-force oracle


def pq_norm_bruteforce(space: SpaceModel, e: LatticeExpr, p: float, q: float,
                       grid_step: float = 0.01, max_len: int = 2) -> float:
    """Exhaustive grid oracle for ||e||_{p,q} in dimension <= 2.

    Every coordinate of every functional ranges over a grid of pitch
    ``grid_step`` on [-R, R], where R is the reach of the dual unit ball
    along the coordinate axes; each tuple is renormalized to weak q-norm
    exactly one before scoring.  The result is a certified lower bound of
    the norm converging to it as the grid refines.
    """
    if not (p >= q >= 1.0):
        raise PQOrderError("need p >= q >= 1")
    found = _grid_search(space, e, p, q, grid_step=grid_step, max_len=max_len,
                         top_k=1)
    return found[0][0] if found else 0.0


def _grid_search(space, e, p, q, grid_step, max_len, top_k=1, outer_count=512):
    """Shared engine: scan grid tuples ranked by the monotone surrogate
    score^q = (sum_k |f|^p)^(q/p) / omega^q, which avoids fractional powers
    inside the pair loops entirely when p = q."""
    if space.dim > 2:
        raise ValueError("grid oracle is limited to dimension <= 2 (cost guard)")
    if not (1 <= max_len <= 3):
        raise ValueError("grid oracle is limited to tuples of length <= 3 (cost guard)")
    if grid_step <= 0:
        raise ValueError("grid_step must be positive")
    d = space.dim
    reach = float(np.max(norm_batch(space, np.eye(d))))
    half = max(1, int(round(reach / grid_step)))
    axis = np.linspace(-reach, reach, 2 * half + 1)
    if d == 1:
        grid = axis[:, None]
    else:
        ga, gb = np.meshgrid(axis, axis, indexing="ij")
        grid = np.column_stack([ga.ravel(), gb.ravel()])

    f_p = np.abs(np.atleast_1d(evaluate(e, grid))) ** p
    num_pow = _cheap_power(q / p)
    results: list[tuple[float, tuple[int, ...]]] = []

    kind, feats, reduce_wq = _omega_features_q(space, grid, q, outer_count)

    wq_single = reduce_wq(feats)
    ok = wq_single > _TINY
    surr = np.zeros(len(grid))
    surr[ok] = num_pow(f_p[ok]) / wq_single[ok]
    _push_topk(results, surr, lambda i: (i,), top_k)

    if max_len >= 2:
        _pair_scan(results, f_p, feats, kind, reduce_wq, q / p, top_k)
        if max_len >= 3:
            _triple_scan(results, f_p, feats, reduce_wq, q / p, top_k)

    results.sort(key=lambda item: (-item[0], item[1]))
    out = []
    for surr_value, idx in results[:top_k]:
        rows = grid[list(idx)]
        out.append((float(surr_value ** (1.0 / q)), rows))
    return out


def _cheap_power(exponent: float):
    if exponent == 1.0:
        return lambda s: s
    if exponent == 2.0:
        return lambda s: s * s
    if exponent == 0.5:
        return np.sqrt
    return lambda s: s**exponent


def _push_topk(results, scores, idx_of, top_k):
    flat = scores.ravel()
    k = min(top_k, flat.size)
    if k == 0:
        return
    part = np.argpartition(-flat, k - 1)[:k]
    for i in part:
        if flat[i] > 0.0:
            results.append((float(flat[i]), idx_of(int(i))))


def _omega_features_q(space, grid, q, outer_count):
    """Per-point features whose tuple-wise sums yield omega^q.

    * Exact extreme points: features are |<g, v>|^q per vertex; omega^q of
      a tuple is the plain max over vertices of the summed features (a
      convex sup over the ball is a vertex max).
    * Euclidean ball with q = 2: features are the entries of g g^T and
      omega^2 is the top eigenvalue of the summed Gram matrix.
    * Otherwise (curved ball, dim 2): vertices of an outer supporting
      polytope give a certified overestimate of omega, so scores remain
      certified lower bounds.
    """
    pts = exact_extreme_points(space, 4096)
    if pts is not None:
        feats = np.abs(grid @ _halve_signs(pts).T) ** q
        return "vertexmax", feats, lambda s: np.max(s, axis=-1)
    if isinstance(space, WeightedLp) and space.r == 2 and q == 2:
        scaled = grid / space.weights
        feats = np.column_stack([scaled[:, 0] ** 2,
                                 scaled[:, 0] * scaled[:, 1],
                                 scaled[:, 1] ** 2])

        def spectral_sq(s):
            a, b, c = s[..., 0], s[..., 1], s[..., 2]
            disc = np.sqrt(np.maximum((a - c) ** 2 + 4.0 * b**2, 0.0))
            return np.maximum(0.5 * (a + c + disc), 0.0)

        return "spectral", feats, spectral_sq
    outer = _outer_polytope_vertices(space, outer_count)
    feats = np.abs(grid @ _halve_signs(outer).T) ** q
    return "vertexmax", feats, lambda s: np.max(s, axis=-1)


def _halve_signs(points: np.ndarray) -> np.ndarray:
    """One representative per +-v pair (features are even in the point)."""
    pts = points.copy()
    for row in pts:
        nz = np.nonzero(row)[0]
        if nz.size and row[nz[0]] < 0:
            row *= -1.0
    return np.unique(pts, axis=0)


def _outer_polytope_vertices(space, count) -> np.ndarray:
    """Vertices of a polytope containing B_E, from supporting lines at
    ``count`` boundary points (dimension 2, smooth balls)."""
    if space.dim != 2:
        raise ValueError("outer polytope construction needs dimension 2")
    theta = (np.arange(count) + 0.5) * (2.0 * np.pi / count)
    boundary = np.column_stack([np.cos(theta), np.sin(theta)])
    boundary /= norm_batch(space, boundary)[:, None]
    normals = norming_functional_batch(space, boundary)
    nxt = np.roll(normals, -1, axis=0)
    det = normals[:, 0] * nxt[:, 1] - normals[:, 1] * nxt[:, 0]
    if np.any(np.abs(det) < 1e-12):
        raise ValueError("outer polytope is degenerate at this resolution")
    vx = (nxt[:, 1] - normals[:, 1]) / det
    vy = (normals[:, 0] - nxt[:, 0]) / det
    return np.column_stack([vx, vy])


def _apply_power_inplace(arr: np.ndarray, exponent: float) -> np.ndarray:
    if exponent == 1.0:
        return arr
    if exponent == 0.5:
        return np.sqrt(arr, out=arr)
    if exponent == 2.0:
        return np.multiply(arr, arr, out=arr)
    return np.power(arr, exponent, out=arr)


def _pair_scan(results, f_p, feats, kind, reduce_wq, num_pow_exp, top_k):
    """Scan all pairs in float32 (ranking only), then rescore the leading
    candidates exactly; the reported score is always exact arithmetic on
    the winning tuple."""
    n = f_p.shape[0]
    s = feats.shape[1]
    f32, fp32 = feats.astype(np.float32), f_p.astype(np.float32)
    block = int(max(16, min(n, 3.2e7 // max(1, n))))
    w1 = np.empty((block, n), dtype=np.float32)
    w2 = np.empty((block, n), dtype=np.float32)
    w3 = np.empty((block, n), dtype=np.float32)
    tril_cache: dict[int, tuple] = {}
    keep = max(8, top_k)
    candidates: list[tuple[int, int]] = []
    for start in range(0, n, block):
        stop = min(start + block, n)
        blk, width = stop - start, n - start
        a, b, c = w1[:blk, :width], w2[:blk, :width], w3[:blk, :width]
        if kind == "vertexmax":
            np.add(f32[start:stop, 0][:, None], f32[start:, 0][None, :], out=a)
            for v in range(1, s):
                np.add(f32[start:stop, v][:, None], f32[start:, v][None, :], out=b)
                np.maximum(a, b, out=a)
        else:
            # top eigenvalue of the summed 2x2 Gram, componentwise
            np.add(f32[start:stop, 0][:, None], f32[start:, 0][None, :], out=a)
            np.add(f32[start:stop, 2][:, None], f32[start:, 2][None, :], out=b)
            np.add(a, b, out=c)                     # trace
            np.subtract(a, b, out=a)
            np.multiply(a, a, out=a)                # (A - C)^2
            np.add(f32[start:stop, 1][:, None], f32[start:, 1][None, :], out=b)
            np.multiply(b, b, out=b)
            b *= 4.0
            np.add(a, b, out=a)
            np.sqrt(a, out=a)                       # discriminant
            np.add(a, c, out=a)
            a *= 0.5
        # a vanishing weak norm forces a vanishing numerator, so clamping
        # the denominator is safe and avoids a masking pass
        np.maximum(a, np.float32(_TINY), out=a)
        np.add(fp32[start:stop][:, None], fp32[start:][None, :], out=b)
        _apply_power_inplace(b, num_pow_exp)
        np.divide(b, a, out=b)
        if blk not in tril_cache:
            tril_cache[blk] = np.tril_indices(blk, k=-1)
        b[tril_cache[blk]] = 0.0  # keep j >= i only
        flat = b.ravel()
        k = min(keep, flat.size)
        for t in np.argpartition(-flat, k - 1)[:k]:
            if flat[t] > 0.0:
                candidates.append((start + int(t) // width, start + int(t) % width))
    for i, j in candidates:
        wq = float(reduce_wq(feats[i] + feats[j]))
        if wq > _TINY:
            surr = float((f_p[i] + f_p[j]) ** num_pow_exp) / wq
            results.append((surr, (i, j)))


def _triple_scan(results, f_p, feats, reduce_wq, num_pow_exp, top_k):
    n = f_p.shape[0]
    s = feats.shape[1]
    if n**3 * s > 2e9:
        raise ValueError("triple grid scan needs a coarser grid (cost guard)")
    base_nums = f_p[:, None] + f_p[None, :]
    pair_feats = feats[:, None, :] + feats[None, :, :]
    tril = np.tril_indices(n, k=-1)
    for i in range(n):
        wq = reduce_wq(feats[i][None, None, :] + pair_feats)
        np.maximum(wq, _TINY, out=wq)
        surr = _apply_power_inplace(f_p[i] + base_nums, num_pow_exp)
        np.divide(surr, wq, out=surr)
        surr[:i, :] = 0.0      # keep j >= i
        surr[tril] = 0.0       # keep k >= j
        _push_topk(results, surr,
                   lambda t, i=i, w=n: (i, t // w, t % w),
                   top_k)


# ---------------------------------------------------------------------------
# comparison reports


@dataclass(frozen=True)
class InclusionReport:
    p1: float
    q1: float
    p2: float
    q2: float
    lower_1: float
    lower_2: float
    tol: float
    ok: bool

    def to_json(self) -> dict:
        return {"p1": self.p1, "q1": self.q1, "p2": self.p2, "q2": self.q2,
                "lower_p1q1": self.lower_1, "lower_p2q2": self.lower_2,
                "tol": self.tol, "ok": self.ok}


def transfer_tuple(e: LatticeExpr, rows: np.ndarray, p1: float, p2: float):
    """Reweight a tuple scored at outer exponent p2 into one scored at
    p1 <= p2 without losing score: row k is scaled by |f(x_k*)|^(p2/p1 - 1)
    (rows where f vanishes are dropped)."""
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    if p1 == p2:
        return rows
    vals = np.abs(np.atleast_1d(evaluate(e, rows)))
    keep = vals > _TINY
    if not np.any(keep):
        return None
    lam = vals[keep] ** (p2 / p1 - 1.0)
    return rows[keep] * lam[:, None]


def inclusion_check(space: SpaceModel, e: LatticeExpr, pair1, pair2,
                    config: SearchConfig | None = None,
                    tol: float = 1e-8) -> InclusionReport:
    """Check the comparison ||f||_{p2,q2} <= ||f||_{p1,q1}.

    Hypotheses: q_j <= p_j, p1 <= p2, q1 <= q2 and
    1/q1 - 1/p1 <= 1/q2 - 1/p2.  Candidate tuples are shared between the
    two runs: the (p2, q2) witness is transferred into the (p1, q1) pool
    through the reweighting that underlies the comparison, which makes the
    asserted ordering hold at estimate level and not only in the limit.
    """
    (p1, q1), (p2, q2) = pair1, pair2
    for (pp, qq) in ((p1, q1), (p2, q2)):
        if not (pp >= qq >= 1.0):
            raise InclusionHypothesisError(f"need q <= p, got ({pp}, {qq})")
    if not (p1 <= p2 and q1 <= q2 and
            1.0 / q1 - 1.0 / p1 <= 1.0 / q2 - 1.0 / p2 + 1e-12):
        raise InclusionHypothesisError(
            "hypotheses p1 <= p2, q1 <= q2, 1/q1 - 1/p1 <= 1/q2 - 1/p2 fail")
    cfg = config or SearchConfig()
    est2 = pq_norm_lower(space, e, p2, q2, cfg)
    extras = list(cfg.extra_candidates)
    moved = transfer_tuple(e, est2.witness.functionals, p1, p2)
    if moved is not None:
        extras.append(moved)
    cfg1 = dataclasses.replace(cfg, extra_candidates=tuple(extras))
    est1 = pq_norm_lower(space, e, p1, q1, cfg1)
    return InclusionReport(p1=p1, q1=q1, p2=p2, q2=q2,
                           lower_1=est1.lower, lower_2=est2.lower, tol=tol,
                           ok=bool(est2.lower <= est1.lower + tol))


@dataclass(frozen=True)
class DivergenceReport:
    p: float
    q: float
    slope: float
    expected: float
    probe: np.ndarray
    lengths: list
    scores: list

    def to_json(self) -> dict:
        return {"p": self.p, "q": self.q, "slope": self.slope,
                "expected": self.expected,
                "probe": [float(c) for c in self.probe],
                "lengths": self.lengths, "scores": self.scores}


def divergence_exponent(space: SpaceModel, e: LatticeExpr, p: float, q: float,
                        n_max: int = 64,
                        config: SearchConfig | None = None) -> DivergenceReport:
    """Growth rate of the repeated-functional witness family for p < q.

    The tuple (x*, ..., x*) of length n scores
    n^(1/p) |f(x*)| / (n^(1/q) ||x*||_*), so the fitted log-log slope is
    1/p - 1/q; this quantifies why the (p, q) norm is infinite for p < q.
    """
    if not (1.0 <= p < q):
        raise PQOrderError("divergence_exponent needs 1 <= p < q")
    cfg = config or SearchConfig()
    cands = _singleton_candidates(space, e, cfg)
    if cands.size == 0:
        raise ZeroExpressionError("expression has no usable probes")
    vals = np.abs(np.atleast_1d(evaluate(e, cands)))
    duals = dual_norm_batch(space, cands)
    ok = duals > _TINY
    ratios = np.zeros(len(cands))
    ratios[ok] = vals[ok] / duals[ok]
    k = int(np.argmax(ratios))
    if ratios[k] <= _TINY:
        raise ZeroExpressionError("expression evaluates to zero on all probes")
    probe = cands[k]
    base = float(ratios[k])
    lengths = list(range(1, n_max + 1))
    scores = [n ** (1.0 / p) * base / n ** (1.0 / q) for n in lengths]
    slope = float(np.polyfit(np.log(lengths), np.log(scores), 1)[0])
    return DivergenceReport(p=p, q=q, slope=slope, expected=1.0 / p - 1.0 / q,
                            probe=probe, lengths=lengths, scores=scores)


@dataclass(frozen=True)
class CotypeRatioReport:
    p: float
    q: float
    rows: list  # per-dimension {"dim", "trials", "max_ratio"}

    def to_json(self) -> dict:
        return {"p": self.p, "q": self.q, "rows": self.rows}


def cotype_ratio_experiment(p: float, q: float, dims, trials: int,
                            config: SearchConfig | None = None,
                            seed: int = 0) -> CotypeRatioReport:
    """Boundedness experiment for ||f||_{p,q} / ||f||_inf on E = l_inf^d.

    The dual l_1^d has cotype 2 uniformly in d, and for 1/q - 1/p >= 1/2
    the two norms are equivalent; the experiment reports, per dimension,
    the largest observed ratio over random lattice-linear expressions.
    The claim under test is boundedness across dimensions, not any
    specific constant.
    """
    if 1.0 / q - 1.0 / p < 0.5 - 1e-12:
        raise InclusionHypothesisError(
            "the cotype-2 regime needs 1/q - 1/p >= 1/2")
    cfg = config or SearchConfig()
    rows = []
    for d in dims:
        space = WeightedLp(int(d), r=math.inf)
        worst = 0.0
        for t in range(trials):
            rng = rng_from(seed, "cotype", int(d), t)
            expr = random_lattice_linear(int(d), rng)
            probes = sphere_sample(space.dual(), 64, seed=seed + t)
            if not np.any(np.abs(np.atleast_1d(evaluate(expr, probes))) > 1e-9):
                continue
            run_cfg = cfg.reseeded("cotype", int(d), t)
            sup = sup_norm(space, expr, run_cfg)
            if sup <= _TINY:
                continue
            est = pq_norm_lower(space, expr, p, q, run_cfg)
            worst = max(worst, est.lower / sup)
        rows.append({"dim": int(d), "trials": trials, "max_ratio": worst})
    return CotypeRatioReport(p=p, q=q, rows=rows)
