"""Deterministic invariant battery behind the ``selftest`` subcommand.

Every public operation of the library is exercised at least once at desk
scale; each check contributes one entry with a pass flag and the numbers
behind it.  The whole battery is a pure function of the seed, so the
emitted report is byte-identical across reruns.
"""

from __future__ import annotations

import math

import numpy as np

from ._seeds import rng_from
from .expressions import (Abs, Add, CanonicalForm, Gen, Inf, PowSum, Scale,
                          Sup, apply_calculus, canonical_form, evaluate,
                          parse_expr, powsum_reduce, random_lattice_linear)
from .extensions import (apply_hom, dconvexity_check, disjointify,
                         extend_to_lp, lp_target_norm, verify_extension_bound)
from .domination import pietsch_certificate, verify_certificate
from .simplex import InfeasibleError, LpProblem, lp_solve
from .spaces import (WeightedLp, ball_extreme_points, dual_norm, lp_space,
                     norm, polytope_space, weak_q_norm)
from .summing import (SearchConfig, cotype_ratio_experiment,
                      divergence_exponent, inclusion_check,
                      pq_norm_bruteforce, pq_norm_lower, sup_norm)

_FAST = dict(restarts=4, ascent_iters=30, max_tuple_len=4,
             singleton_samples=24, weak_restarts=6, weak_iters=40)


def power_iteration_sigma(a: np.ndarray, iters: int = 2000, tol: float = 1e-14) -> float:
    """Largest singular value via power iteration on the Gram matrix."""
    gram = a.T @ a
    v = np.ones(gram.shape[0]) + 0.01 * np.arange(gram.shape[0])
    v /= np.linalg.norm(v)
    prev = 0.0
    for _ in range(iters):
        w = gram @ v
        lam = float(np.linalg.norm(w))
        if lam == 0.0:
            return 0.0
        v = w / lam
        if abs(lam - prev) <= tol * max(lam, 1.0):
            break
        prev = lam
    return math.sqrt(lam)


def _check(name: str, passed: bool, **detail) -> dict:
    entry = {"name": name, "passed": bool(passed)}
    entry.update(detail)
    return entry


def run_selftest(seed: int) -> dict:
    rng = rng_from(seed, "selftest")
    checks: list[dict] = []
    cfg = SearchConfig(seed=seed, **_FAST)

    l1_2 = lp_space(2, 1)
    l2_2 = lp_space(2, 2)
    l2_3 = lp_space(3, 2)
    linf_2 = lp_space(2, math.inf)
    diamond = polytope_space([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])

    # --- space oracles -----------------------------------------------------
    checks.append(_check("norm.euclidean", abs(norm(l2_2, [3.0, 4.0]) - 5.0) < 1e-12,
                         value=norm(l2_2, [3.0, 4.0])))
    checks.append(_check("norm.zero", norm(l1_2, [0.0, 0.0]) == 0.0))
    gauge = norm(diamond, [1.0, 1.0])
    checks.append(_check("norm.polytope_gauge", abs(gauge - 2.0) < 1e-9, value=gauge))
    tri_ok = True
    for _ in range(50):
        x, y = rng.normal(size=2), rng.normal(size=2)
        tri_ok &= norm(l2_2, x + y) <= norm(l2_2, x) + norm(l2_2, y) + 1e-12
    checks.append(_check("norm.triangle", tri_ok))
    checks.append(_check("dual_norm.l1_to_linf",
                         dual_norm(l1_2, [1.0, -3.0]) == 3.0))
    checks.append(_check("dual_norm.self_dual",
                         abs(dual_norm(l2_3, [1.0, 2.0, 2.0]) - 3.0) < 1e-12))

    pts, exact = ball_extreme_points(lp_space(3, 1), budget=16)
    checks.append(_check("extreme.l1", exact and pts.shape == (6, 3)))
    pts, exact = ball_extreme_points(linf_2, budget=16)
    checks.append(_check("extreme.linf", exact and pts.shape == (4, 2)))
    pts, exact = ball_extreme_points(l2_2, budget=100, seed=seed)
    checks.append(_check("extreme.sampled", (not exact) and pts.shape == (100, 2)))

    xstar = rng.normal(size=3)
    wv, _ = weak_q_norm(l2_3, xstar[None, :], 2)
    checks.append(_check("weak.singleton_dual",
                         abs(wv - dual_norm(l2_3, xstar)) < 1e-10))
    tup = rng.normal(size=(4, 3))
    col = np.max(np.sum(np.abs(tup) ** 2, axis=0) ** 0.5)
    wl1, _ = weak_q_norm(lp_space(3, 1), tup, 2)
    checks.append(_check("weak.l1_column_formula", wl1 == col, value=wl1, oracle=col))
    w22, _ = weak_q_norm(l2_3, tup, 2)
    sig = power_iteration_sigma(tup)
    checks.append(_check("weak.spectral", abs(w22 - sig) < 1e-8, value=w22, oracle=sig))
    grown, _ = weak_q_norm(l2_3, np.vstack([tup, rng.normal(size=(1, 3))]), 2)
    checks.append(_check("weak.monotone_append", grown >= w22 - 1e-12))
    scaled, _ = weak_q_norm(l2_3, -2.5 * tup, 2)
    checks.append(_check("weak.homogeneous", abs(scaled - 2.5 * w22) < 1e-10))

    # --- expressions -------------------------------------------------------
    gens = {"x": np.array([1.0, 0.0]), "y": np.array([0.0, 1.0])}
    e_sup = parse_expr("x \\/ y", gens)
    checks.append(_check("parse.sup", e_sup == Sup(Gen(gens["x"]), Gen(gens["y"]))))
    e_mix = parse_expr("abs(x) - 2*y", gens)
    checks.append(_check("parse.scale",
                         e_mix == Add(Abs(Gen(gens["x"])), Scale(-2.0, Gen(gens["y"])))))
    e_ps = parse_expr("powsum(2; x, y)", gens)
    checks.append(_check("parse.powsum",
                         e_ps == PowSum(2.0, [Gen(gens["x"]), Gen(gens["y"])])))
    checks.append(_check("eval.abs", evaluate(Abs(Gen([1.0, 0.0])), [-2.0, 5.0]) == 2.0))
    checks.append(_check("eval.sup", evaluate(e_sup, [3.0, 4.0]) == 4.0))
    checks.append(_check("eval.powsum_euclid",
                         abs(evaluate(e_ps, [3.0, 4.0]) - 5.0) < 1e-12))
    hom_ok = True
    for _ in range(20):
        expr = random_lattice_linear(2, rng)
        probe = rng.normal(size=2)
        lam = float(rng.uniform(0, 3))
        a, b = evaluate(expr, lam * probe), lam * evaluate(expr, probe)
        hom_ok &= abs(a - b) <= 1e-10 * max(1.0, abs(b))
    checks.append(_check("eval.positively_homogeneous", hom_ok))
    canon_ok = True
    for _ in range(10):
        expr = random_lattice_linear(2, rng)
        cf = canonical_form(expr)
        probes = rng.normal(size=(100, 2))
        canon_ok &= np.allclose(cf.evaluate(probes), evaluate(expr, probes),
                                rtol=1e-10, atol=1e-10)
    checks.append(_check("canonical.round_trip", canon_ok))
    e = random_lattice_linear(2, rng)
    probes = rng.normal(size=(50, 2))
    lhs = evaluate(Add(Inf(e, e_sup), Sup(e, e_sup)), probes)
    rhs = evaluate(Add(e, e_sup), probes)
    checks.append(_check("lattice.inf_plus_sup", np.allclose(lhs, rhs, atol=1e-12)))
    calc = apply_calculus(math.inf, [Abs(e), Abs(e_sup)])
    lhs = evaluate(calc, probes)
    rhs = evaluate(Sup(Abs(e), Abs(e_sup)), probes)
    checks.append(_check("calculus.inf_is_sup_abs", np.allclose(lhs, rhs, atol=0)))

    # --- summing norms ------------------------------------------------------
    x = np.array([3.0, 4.0])
    est = pq_norm_lower(l2_2, Gen(x), 2, 2, cfg)
    checks.append(_check("pq.delta_isometry", abs(est.lower - 5.0) <= 0.005 * 5.0,
                         lower=est.lower))
    f12 = Sup(Abs(Gen([1.0, 0.0])), Abs(Gen([0.0, 1.0])))
    oracle = pq_norm_bruteforce(l1_2, f12, 1, 1, grid_step=0.05, max_len=2)
    est12 = pq_norm_lower(l1_2, f12, 1, 1, cfg)
    checks.append(_check("pq.oracle_sup_abs", abs(oracle - 2.0) <= 0.06
                         and est12.lower >= oracle - 1e-8
                         and abs(est12.lower - 2.0) <= 1e-6,
                         oracle=oracle, lower=est12.lower))
    sup12 = sup_norm(l1_2, f12, cfg)
    checks.append(_check("sup.l1_example", abs(sup12 - 1.0) <= 1e-9, value=sup12))
    checks.append(_check("sup.le_pq", sup12 <= est12.lower + 1e-8))
    rep = inclusion_check(l2_2, f12, (2, 2), (4, 2), cfg)
    checks.append(_check("inclusion.4_2_le_2_2", rep.ok,
                         lower_p1q1=rep.lower_1, lower_p2q2=rep.lower_2))
    div = divergence_exponent(l2_2, Gen(x), 1, 2)
    checks.append(_check("divergence.slope_half",
                         abs(div.slope - 0.5) <= 1e-6, slope=div.slope))
    cot = cotype_ratio_experiment(2, 1, dims=[2], trials=2, config=cfg, seed=seed)
    ratios = [row["max_ratio"] for row in cot.rows]
    checks.append(_check("cotype.ratios_bounded",
                         all(np.isfinite(r) and r >= 1.0 - 1e-8 for r in ratios),
                         ratios=ratios))

    # --- extensions ---------------------------------------------------------
    ident = extend_to_lp(l2_2, np.eye(2), 2, cfg)
    checks.append(_check("extend.identity_norm",
                         abs(ident.operator_norm - 1.0) < 1e-10))
    checks.append(_check("extend.empty",
                         extend_to_lp(l2_2, np.zeros((0, 2)), 2).operator_norm == 0.0))
    image = apply_hom(ident, Gen(x))
    checks.append(_check("hom.generator", np.array_equal(image, x)))
    commute_ok = True
    for _ in range(20):
        expr1 = random_lattice_linear(2, rng)
        expr2 = random_lattice_linear(2, rng)
        rows = rng.normal(size=(3, 2))
        ext = extend_to_lp(l2_2, rows, 2, cfg)
        node = PowSum(2.0, [expr1, expr2])
        left = apply_hom(ext, node)
        right = powsum_reduce(2.0, np.stack([apply_hom(ext, expr1),
                                             apply_hom(ext, expr2)]))
        commute_ok &= np.array_equal(left, right)
        left = apply_hom(ext, Sup(expr1, expr2))
        right = np.maximum(apply_hom(ext, expr1), apply_hom(ext, expr2))
        commute_ok &= np.array_equal(left, right)
    checks.append(_check("hom.commutes_bitexact", commute_ok))
    wit_ext = extend_to_lp(l2_2, est.witness.functionals, 2, cfg)
    bound = verify_extension_bound(l2_2, Gen(x), wit_ext, est, pooled=True)
    checks.append(_check("extend.witness_reproduces",
                         abs(bound.rho - est.lower) <= 1e-8 and bound.passed,
                         rho=bound.rho, lower=est.lower))

    dis = disjointify([[1.0, 1.0], [1.0, 0.0]])
    checks.append(_check("disjointify.hand",
                         np.array_equal(dis, [[0.0, 1.0], [0.0, 0.0]])))
    ok_dis = True
    for _ in range(50):
        arr = rng.uniform(0, 1, size=(4, 6))
        out = disjointify(arr)
        ok_dis &= np.all(out >= 0) and np.all(out <= arr)
        for i in range(4):
            for j in range(i + 1, 4):
                ok_dis &= not np.any(np.minimum(out[i], out[j]))
        ok_dis &= np.array_equal(disjointify(out), out)
    checks.append(_check("disjointify.random", ok_dis))

    good = dconvexity_check(2.0, 2, 1, 1.0, lp_space(3, 2), samples=400, seed=seed)
    checks.append(_check("dconvex.l2_passes", good.passed,
                         violations=good.violations))
    bad = dconvexity_check(2.0, 2, 1, 1.0, lp_space(2, 1), samples=100, seed=seed)
    checks.append(_check("dconvex.l1_counterexample",
                         (not bad.passed) and bad.first_violation is not None
                         and bad.first_violation < 100,
                         first=bad.first_violation))

    # --- linear programming --------------------------------------------------
    sol = lp_solve(LpProblem(c=[1.0], A=[[1.0]], b=[3.0]))
    checks.append(_check("lp.scalar", abs(sol.value - 3.0) < 1e-9))
    sol = lp_solve(LpProblem(c=[1.0, 1.0], A=[[1.0, 2.0], [2.0, 1.0]], b=[2.0, 2.0]))
    checks.append(_check("lp.two_lines", abs(sol.value - 4.0 / 3.0) < 1e-9
                         and np.allclose(sol.x, [2.0 / 3.0, 2.0 / 3.0], atol=1e-9)))
    try:
        lp_solve(LpProblem(c=[1.0], A=[[1.0], [-1.0]], b=[1.0, 0.0]))
        infeasible_ok = False
    except InfeasibleError:
        infeasible_ok = True
    checks.append(_check("lp.infeasible", infeasible_ok))

    # --- domination -----------------------------------------------------------
    xg = np.array([0.6, -0.8, 0.0])
    est_g = pq_norm_lower(l2_3, Gen(xg), 2, 2, cfg)
    cert = pietsch_certificate(l2_3, Gen(xg), 2, atom_grid_size=48,
                               constraint_samples=160, seed=seed,
                               estimate=est_g, config=cfg)
    checks.append(_check("pietsch.point_mass",
                         abs(cert.C - 1.0) <= 1e-9, C=cert.C))
    f_pos = Abs(random_lattice_linear(2, rng))
    est_pos = pq_norm_lower(l2_2, f_pos, 2, 2, cfg)
    cert_pos = pietsch_certificate(l2_2, f_pos, 2, atom_grid_size=64,
                                   constraint_samples=200, seed=seed,
                                   estimate=est_pos, config=cfg)
    rep_pos = verify_certificate(l2_2, f_pos, cert_pos, fresh_samples=2000,
                                 seed=seed + 1, config=cfg)
    checks.append(_check("pietsch.random_verifies", rep_pos.passed,
                         C=cert_pos.C, lower=est_pos.lower,
                         worst=rep_pos.domination_worst,
                         mu_norm=rep_pos.mu_norm_estimate))
    checks.append(_check("pietsch.dominates_lower",
                         cert_pos.C >= est_pos.lower - 1e-6))

    passed = all(c["passed"] for c in checks)
    return {"seed": seed, "passed": passed, "checks": checks}
