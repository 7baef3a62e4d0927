"""Domination certificates: discrete measures with f <= C * f_mu^p.

A probability measure mu on the unit ball induces the function

    f_mu^p(x*) = ( integral |x*(z)|^p dmu(z) )^(1/p),

which has (p, p)-norm at most one.  A nonnegative positively homogeneous
f has finite norm exactly when f <= C * f_mu^p for some mu and C, and the
best constant equals the norm.  This module builds such certificates
constructively: the ball is discretized by atoms z_1..z_J, constraints
are sampled functionals x_1*..x_I*, and the LP

    minimize sum_j nu_j   s.t.   sum_j nu_j |x_i*(z_j)|^p >= f(x_i*)^p,
                                 nu >= 0

is solved; with t = sum nu the certificate is mu = nu / t, C = t^(1/p)
(the normalization of mu is absorbed into the objective).  After the LP,
C is raised to the supremum of f / f_mu over a dense fresh validation set
plus ascent refinement, so the reported pair (mu, C) dominates robustly
off the constraint sample; the raise amount is recorded.  Because the
constraint set always contains every witness produced by the norm
estimator, C is never smaller than the best known lower bound.

After discretization C is an estimate of the norm, not a certified bound
in either direction: restricting atoms pushes it up while sampling
constraints pushes it down, so reports carry both grid parameters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._seeds import rng_from
from .expressions import (Abs, Gen, LatticeExpr, PowSum, Scale, evaluate,
                          eval_with_grad, collect_generators)
from .simplex import InfeasibleError, LpProblem, lp_solve
from .spaces import (SpaceModel, ball_extreme_points, dual_norm_batch,
                     norm, norm_batch, sphere_sample)
from .summing import (FunctionalTuple, NormEstimate, SearchConfig,
                      pq_norm_lower, _singleton_candidates)


class DegenerateGridError(ValueError):
    """The expression is positive somewhere while every atom pairs to
    zero there; the atom grid cannot dominate it."""


@dataclass(frozen=True)
class DominationCertificate:
    p: float
    atoms: np.ndarray    # (J, d), inside the unit ball
    weights: np.ndarray  # (J,), nonnegative, sums to one
    C: float
    meta: dict

    def __post_init__(self):
        atoms = np.atleast_2d(np.asarray(self.atoms, dtype=float)).copy()
        weights = np.asarray(self.weights, dtype=float).copy()
        atoms.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", weights)

    def f_mu(self, xstars) -> np.ndarray:
        """f_mu^p at a functional or batch of functionals."""
        xs = np.atleast_2d(np.asarray(xstars, dtype=float))
        pairings = np.abs(xs @ self.atoms.T) ** self.p
        return (pairings @ self.weights) ** (1.0 / self.p)

    def to_json(self) -> dict:
        return {"p": self.p, "C": self.C,
                "atoms": [[float(c) for c in a] for a in self.atoms],
                "weights": [float(w) for w in self.weights],
                "constraints_used": self.meta.get("constraints_used"),
                "grid": self.meta.get("grid")}


def f_mu_expression(cert: DominationCertificate) -> LatticeExpr:
    """f_mu^p as a lattice expression: powsum(p; w_j^(1/p) * delta_{z_j})."""
    children = [Scale(float(w) ** (1.0 / cert.p), Gen(z))
                for w, z in zip(cert.weights, cert.atoms) if w > 0.0]
    if not children:
        children = [Gen(np.zeros(cert.atoms.shape[1]))]
    return PowSum(cert.p, children)


def _atom_grid(space: SpaceModel, e: LatticeExpr, size: int, seed: int) -> np.ndarray:
    pts, _ = ball_extreme_points(space, budget=max(8, size), seed=seed)
    rows = [pts]
    for g in collect_generators(e):
        if np.any(g):
            unit = np.asarray(g, dtype=float) / norm(space, g)
            rows.append(unit[None, :])
            rows.append(-unit[None, :])
    have = sum(r.shape[0] for r in rows)
    if have < size:
        rows.append(sphere_sample(space, size - have, seed=seed + 1))
    atoms = np.vstack(rows)
    # gauge roundoff can leave atoms a hair outside the ball
    gauges = norm_batch(space, atoms)
    atoms[gauges > 1.0] /= gauges[gauges > 1.0, None]
    return atoms


def _constraint_functionals(space, e, count, seed, cfg, extra_rows):
    base = _singleton_candidates(space, e, cfg)
    rows = [base]
    if count > base.shape[0]:
        rows.append(sphere_sample(space.dual(), count - base.shape[0], seed=seed + 2))
    for extra in extra_rows:
        rows.append(np.atleast_2d(np.asarray(extra, dtype=float)))
    return np.vstack(rows)


def pietsch_certificate(space: SpaceModel, e: LatticeExpr, p: float,
                        atom_grid_size: int = 128,
                        constraint_samples: int = 512, *,
                        seed: int = 0,
                        estimate: NormEstimate | None = None,
                        extra_constraints=(),
                        config: SearchConfig | None = None) -> DominationCertificate:
    """Build a domination certificate for a (probed-nonnegative) expression.

    Pass ``Abs(e)`` for expressions that take negative values; the
    construction dominates the positive part of whatever it is given.
    The constraint set contains every witness of ``estimate`` (computed
    here when not supplied) plus any ``extra_constraints`` tuples, which
    ties C to the best known lower bound.
    """
    if math.isinf(p) or p < 1:
        raise ValueError("certificates need 1 <= p < inf")
    cfg = config or SearchConfig()
    if estimate is None:
        estimate = pq_norm_lower(space, e, p, p, cfg.reseeded("pietsch-est"))
    witness_rows = [estimate.witness.functionals]
    witness_rows.extend(extra_constraints)

    atoms = _atom_grid(space, e, atom_grid_size, seed)
    functionals = _constraint_functionals(space, e, constraint_samples,
                                          seed, cfg, witness_rows)
    f_vals = np.maximum(np.atleast_1d(evaluate(e, functionals)), 0.0)
    active = f_vals > 1e-13
    if not np.any(active):
        weights = np.full(len(atoms), 1.0 / len(atoms))
        return DominationCertificate(
            p=float(p), atoms=atoms, weights=weights, C=0.0,
            meta={"constraints_used": int(functionals.shape[0]),
                  "grid": int(atoms.shape[0]), "c_lp": 0.0, "c_raise": 0.0,
                  "seed": seed})

    x_act = functionals[active]
    b = f_vals[active] ** p
    a = np.abs(x_act @ atoms.T) ** p
    dead = ~np.any(a > 1e-15, axis=1)
    if np.any(dead):
        raise DegenerateGridError(
            "an active constraint pairs to zero with every atom; "
            "enlarge the atom grid")
    try:
        solution = lp_solve(LpProblem(c=np.ones(atoms.shape[0]), A=a, b=b))
    except InfeasibleError as err:  # pragma: no cover - dead rows caught above
        raise DegenerateGridError(str(err)) from err
    nu = np.maximum(solution.x, 0.0)
    total = float(np.sum(nu))
    if total <= 0.0:
        weights = np.full(len(atoms), 1.0 / len(atoms))
        return DominationCertificate(
            p=float(p), atoms=atoms, weights=weights, C=0.0,
            meta={"constraints_used": int(functionals.shape[0]),
                  "grid": int(atoms.shape[0]), "c_lp": 0.0, "c_raise": 0.0,
                  "seed": seed})
    keep = nu > total * 1e-15
    atoms_kept = atoms[keep]
    weights = nu[keep] / total
    c_lp = total ** (1.0 / p)

    cert = DominationCertificate(p=float(p), atoms=atoms_kept, weights=weights,
                                 C=c_lp, meta={})
    c_final = _raise_constant(space, e, cert, c_lp, functionals, seed, cfg)
    meta = {"constraints_used": int(functionals.shape[0]),
            "grid": int(atoms.shape[0]), "c_lp": float(c_lp),
            "c_raise": float(c_final - c_lp), "seed": seed}
    return DominationCertificate(p=float(p), atoms=atoms_kept, weights=weights,
                                 C=float(c_final), meta=meta)


def _raise_constant(space, e, cert, c_lp, constraint_rows, seed, cfg):
    """Raise C to the observed supremum of f / f_mu over dense validation
    plus multi-start ascent, so domination holds well off the LP sample."""
    dual = space.dual()
    probes = [constraint_rows,
              sphere_sample(dual, max(2048, 4 * constraint_rows.shape[0]),
                            seed=seed + 7)]
    xs = np.vstack(probes)
    ratios = _ratio_batch(e, cert, xs)
    c_val = float(np.max(ratios)) if ratios.size else 0.0
    order = np.argsort(-ratios, kind="stable")[:max(4, cfg.restarts)]
    best = max(c_lp, c_val)
    for idx in order:
        best = max(best, _ratio_ascent(e, cert, xs[int(idx)], iters=60))
    return best


def _ratio_batch(e, cert, xs) -> np.ndarray:
    f_vals = np.maximum(np.atleast_1d(evaluate(e, xs)), 0.0)
    mu_vals = cert.f_mu(xs)
    ok = mu_vals > 1e-13
    bad = (~ok) & (f_vals > 1e-10)
    if np.any(bad):
        raise DegenerateGridError(
            "f is positive where f_mu vanishes; enlarge the atom grid")
    out = np.zeros_like(f_vals)
    out[ok] = f_vals[ok] / mu_vals[ok]
    return out


def _ratio_ascent(e, cert, x0, iters=60, step0=0.2):
    """Local ascent of f / f_mu over functional directions."""
    mu_expr = f_mu_expression(cert)
    x = np.asarray(x0, dtype=float).copy()
    scale = float(np.max(np.abs(x)))
    if scale <= 0:
        return 0.0
    x /= scale

    def ratio_and_grad(xs):
        fv, fg = eval_with_grad(e, xs)
        mv, mg = eval_with_grad(mu_expr, xs)
        if fv <= 0.0 or mv <= 1e-13:
            return max(fv, 0.0) / mv if mv > 1e-13 else 0.0, None
        value = fv / mv
        return value, (fg - value * mg) / mv

    best, grad = ratio_and_grad(x)
    step = step0
    for _ in range(iters):
        if grad is None:
            break
        gn = float(np.max(np.abs(grad)))
        if gn < 1e-14:
            break
        trial = x + (step / gn) * grad
        trial /= max(float(np.max(np.abs(trial))), 1e-13)
        value, tgrad = ratio_and_grad(trial)
        if value > best * (1.0 + 1e-13):
            x, best, grad = trial, value, tgrad
            step = min(step * 1.5, 1.0)
        else:
            step *= 0.5
            if step < 1e-9:
                break
    return best


# ---------------------------------------------------------------------------
# verification


@dataclass(frozen=True)
class CertificateReport:
    weights_sum_ok: bool
    atoms_in_ball: bool
    domination_ok: bool
    domination_worst: float
    mu_norm_estimate: float
    mu_norm_ok: bool
    fresh_samples: int

    @property
    def passed(self) -> bool:
        return (self.weights_sum_ok and self.atoms_in_ball and
                self.domination_ok and self.mu_norm_ok)

    def to_json(self) -> dict:
        return {"weights_sum_ok": self.weights_sum_ok,
                "atoms_in_ball": self.atoms_in_ball,
                "domination_ok": self.domination_ok,
                "domination_worst": self.domination_worst,
                "mu_norm_estimate": self.mu_norm_estimate,
                "mu_norm_ok": self.mu_norm_ok,
                "fresh_samples": self.fresh_samples}


def verify_certificate(space: SpaceModel, e: LatticeExpr,
                       cert: DominationCertificate, fresh_samples: int = 10_000,
                       *, seed: int = 1, dom_tol: float = 1e-6,
                       norm_tol: float = 0.02,
                       config: SearchConfig | None = None) -> CertificateReport:
    """Report-only checks of a certificate on fresh functionals.

    Checks the measure invariants, the domination f <= C f_mu + tol on
    fresh random functionals, and that the tuple-search estimate of
    ||f_mu^p||_p stays within ``norm_tol`` of one.
    """
    cfg = config or SearchConfig()
    weights_sum_ok = bool(abs(float(np.sum(cert.weights)) - 1.0) <= 1e-10)
    atoms_in_ball = bool(np.all(norm_batch(space, cert.atoms) <= 1.0 + 1e-10))

    rng = rng_from(seed, "verify-cert")
    dual = space.dual()
    randoms = rng.normal(size=(max(0, fresh_samples - 256), space.dim))
    randoms = randoms[np.any(randoms, axis=1)]
    randoms /= dual_norm_batch(space, randoms)[:, None]
    xs = np.vstack([sphere_sample(dual, min(256, fresh_samples), seed=seed + 3),
                    randoms])
    f_vals = np.atleast_1d(evaluate(e, xs))
    mu_vals = cert.f_mu(xs)
    gap = f_vals - cert.C * mu_vals
    worst = float(np.max(gap)) if gap.size else 0.0
    domination_ok = bool(worst <= dom_tol)

    mu_est = pq_norm_lower(space, f_mu_expression(cert), cert.p, cert.p,
                           cfg.reseeded("verify-mu"))
    mu_norm_ok = bool(mu_est.lower <= 1.0 + norm_tol)
    return CertificateReport(weights_sum_ok=weights_sum_ok,
                             atoms_in_ball=atoms_in_ball,
                             domination_ok=domination_ok,
                             domination_worst=worst,
                             mu_norm_estimate=mu_est.lower,
                             mu_norm_ok=mu_norm_ok,
                             fresh_samples=int(xs.shape[0]))


def attach_upper(estimate: NormEstimate, cert: DominationCertificate) -> NormEstimate:
    """Attach a certificate constant as the separate upper estimate."""
    return estimate.with_upper(cert.C)


__all__ = [
    "DominationCertificate", "CertificateReport", "DegenerateGridError",
    "pietsch_certificate", "verify_certificate", "f_mu_expression",
    "attach_upper",
]
