"""Command-line driver: job files, subcommands, deterministic reports.

Job files are JSON documents::

    {
      "seed": 7,
      "space": {"dim": 2, "kind": "lp", "r": 2},
      "generators": {"x": [3, 4], "y": [0, 1]},
      "expressions": {"f": "abs(x) \\/ abs(y)"},
      "tasks": [
        {"kind": "norm", "expr": "f", "p": 2, "q": 2, "out": "norm_f.json"}
      ]
    }

Tasks run in declaration order and each writes one JSON report (plus a CSV
flattening with ``--csv``).  Exit codes: 0 when every report-only check
passes, 1 on validation failures, 2 when some check reports a violation,
64 for an unknown subcommand.  All randomness derives from the job seed
(or ``--seed``); reruns with the same seed produce byte-identical reports.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from ._reportio import write_csv, write_report
from .expressions import Abs, ExprError, parse_expr
from .extensions import (dconvexity_check, extend_to_lp,
                         verify_extension_bound)
from .domination import (DegenerateGridError, pietsch_certificate,
                         verify_certificate)
from .selftest import run_selftest
from .spaces import SpaceError, space_from_json
from .summing import (SearchConfig, cotype_ratio_experiment,
                      divergence_exponent, inclusion_check,
                      pq_norm_bruteforce, pq_norm_lower, sup_norm)

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_VIOLATION = 2
EXIT_USAGE = 64

_SUBCOMMANDS = ("run", "norm", "supnorm", "extend", "pietsch", "dconvex",
                "compare", "selftest")


class JobValidationError(ValueError):
    pass


class Job:
    def __init__(self, doc: dict, base_dir: Path):
        if "seed" not in doc:
            raise JobValidationError("job files must carry an explicit seed")
        self.seed = int(doc["seed"])
        self.base_dir = base_dir
        self.space = None
        if "space" in doc:
            try:
                self.space = space_from_json(doc["space"])
            except (SpaceError, KeyError, TypeError, ValueError) as err:
                raise JobValidationError(f"bad space description: {err}") from err
        self.generators = {name: np.asarray(v, dtype=float)
                           for name, v in doc.get("generators", {}).items()}
        self.expression_sources = dict(doc.get("expressions", {}))
        self.expressions = {}
        for name, text in self.expression_sources.items():
            try:
                self.expressions[name] = parse_expr(text, self.generators)
            except ExprError as err:
                raise JobValidationError(f"expression {name!r}: {err}") from err
        self.tasks = list(doc.get("tasks", []))
        for i, task in enumerate(self.tasks):
            if "kind" not in task:
                raise JobValidationError(f"task #{i} has no kind")
            if task["kind"] not in _TASKS:
                raise JobValidationError(f"task #{i}: unknown kind {task['kind']!r}")
            self._validate_names(task, i)

    def _validate_names(self, task: dict, i: int):
        name = task.get("expr")
        if name is not None and name not in self.expressions:
            raise JobValidationError(f"task #{i}: unresolved expression {name!r}")

    def expression(self, task: dict):
        name = task.get("expr")
        if name is None:
            raise JobValidationError("task needs an 'expr' field")
        return self.expressions[name]

    def need_space(self):
        if self.space is None:
            raise JobValidationError("this task needs a 'space' in the job file")
        return self.space

    def config(self, task: dict, tag: str) -> SearchConfig:
        overrides = {k: task[k] for k in
                     ("restarts", "ascent_iters", "max_tuple_len",
                      "singleton_samples", "stall_rel_tol") if k in task}
        return SearchConfig(seed=self.seed, **overrides).reseeded("task", tag)


def load_job(path: str | Path) -> Job:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as err:
        raise JobValidationError(f"cannot read job file {path}: {err}") from err
    return Job(doc, path.parent)


# ---------------------------------------------------------------------------
# task handlers: each returns (report dict, passed flag)


def _task_norm(job: Job, task: dict, index: int):
    space = job.need_space()
    e = job.expression(task)
    p, q = float(task.get("p", 2)), float(task.get("q", task.get("p", 2)))
    cfg = job.config(task, f"norm{index}")
    est = pq_norm_lower(space, e, p, q, cfg)
    report = {"task": "norm", "estimate": est.to_json()}
    passed = True
    if task.get("oracle"):
        value = pq_norm_bruteforce(space, e, p, q,
                                   grid_step=float(task.get("grid_step", 0.01)),
                                   max_len=int(task.get("max_len", 2)))
        passed = est.lower >= value - 1e-8
        report["oracle"] = {"value": value, "grid_step": float(task.get("grid_step", 0.01)),
                            "max_len": int(task.get("max_len", 2)),
                            "estimator_not_below": passed}
    return report, passed


def _task_supnorm(job: Job, task: dict, index: int):
    space = job.need_space()
    e = job.expression(task)
    cfg = job.config(task, f"supnorm{index}")
    value = sup_norm(space, e, cfg)
    return {"task": "supnorm", "sup": value}, True


def _task_extend(job: Job, task: dict, index: int):
    space = job.need_space()
    e = job.expression(task)
    p = float(task.get("p", 2))
    rows = np.asarray(task["tuple"], dtype=float)
    cfg = job.config(task, f"extend{index}")
    import dataclasses

    pooled_cfg = dataclasses.replace(
        cfg, extra_candidates=cfg.extra_candidates + (rows,))
    est = pq_norm_lower(space, e, p, p, pooled_cfg)
    ext = extend_to_lp(space, rows, p, cfg)
    rep = verify_extension_bound(space, e, ext, est, pooled=True)
    return {"task": "extend", "estimate": est.to_json(),
            "bound": rep.to_json()}, rep.passed


def _task_pietsch(job: Job, task: dict, index: int):
    space = job.need_space()
    e = job.expression(task)
    if task.get("abs", True):
        e = Abs(e)
    p = float(task.get("p", 2))
    cfg = job.config(task, f"pietsch{index}")
    est = pq_norm_lower(space, e, p, p, cfg)
    try:
        cert = pietsch_certificate(
            space, e, p, atom_grid_size=int(task.get("grid", 128)),
            constraint_samples=int(task.get("samples", 512)),
            seed=job.seed + index, estimate=est, config=cfg)
    except DegenerateGridError as err:
        return {"task": "pietsch", "error": str(err)}, False
    rep = verify_certificate(space, e, cert,
                             fresh_samples=int(task.get("fresh", 10_000)),
                             seed=job.seed + index + 1, config=cfg)
    passed = rep.passed and cert.C >= est.lower - 1e-6
    return {"task": "pietsch", "certificate": cert.to_json(),
            "estimate": est.to_json(), "verification": rep.to_json()}, passed


def _task_dconvex(job: Job, task: dict, index: int):
    lattice_doc = task.get("lattice", {"dim": 2, "kind": "lp", "r": 2})
    lattice_doc.setdefault("kind", "lp")
    lattice = space_from_json(lattice_doc)
    rep = dconvexity_check(
        g_exponent=(math.inf if task.get("g_exponent") == "inf"
                    else float(task.get("g_exponent", 2))),
        arity=int(task.get("arity", 2)),
        theta=int(task.get("theta", 1)),
        bound=float(task.get("M", 1.0)),
        lattice=lattice,
        samples=int(task.get("samples", 1000)),
        seed=job.seed + index)
    expect_violation = bool(task.get("expect_violation", False))
    passed = (not rep.passed) if expect_violation else rep.passed
    return {"task": "dconvex", "report": rep.to_json(),
            "expect_violation": expect_violation}, passed


def _task_compare(job: Job, task: dict, index: int):
    mode = task.get("mode", "inclusion")
    cfg = job.config(task, f"compare{index}")
    if mode == "inclusion":
        space = job.need_space()
        e = job.expression(task)
        rep = inclusion_check(space, e,
                              (float(task.get("p1", 2)), float(task.get("q1", 2))),
                              (float(task.get("p2", 4)), float(task.get("q2", 2))),
                              cfg)
        return {"task": "compare", "mode": mode, "report": rep.to_json()}, rep.ok
    if mode == "divergence":
        space = job.need_space()
        e = job.expression(task)
        rep = divergence_exponent(space, e, float(task.get("p", 1)),
                                  float(task.get("q", 2)),
                                  n_max=int(task.get("n_max", 64)), config=cfg)
        passed = abs(rep.slope - rep.expected) <= 1e-6
        return {"task": "compare", "mode": mode, "report": rep.to_json()}, passed
    if mode == "cotype":
        rep = cotype_ratio_experiment(float(task.get("p", 2)),
                                      float(task.get("q", 1)),
                                      dims=list(task.get("dims", [2, 3])),
                                      trials=int(task.get("trials", 3)),
                                      config=cfg, seed=job.seed + index)
        ratios = [row["max_ratio"] for row in rep.rows]
        passed = all(np.isfinite(r) for r in ratios)
        return {"task": "compare", "mode": mode, "report": rep.to_json()}, passed
    raise JobValidationError(f"unknown compare mode {mode!r}")


def _task_selftest(job: Job, task: dict, index: int):
    report = run_selftest(int(task.get("seed", job.seed)))
    return report, report["passed"]


_TASKS = {
    "norm": _task_norm,
    "supnorm": _task_supnorm,
    "extend": _task_extend,
    "pietsch": _task_pietsch,
    "dconvex": _task_dconvex,
    "compare": _task_compare,
    "selftest": _task_selftest,
}


def run_job(job: Job, out_dir: str | Path, emit_csv: bool = False) -> int:
    out_dir = Path(out_dir)
    all_passed = True
    for index, task in enumerate(job.tasks):
        handler = _TASKS[task["kind"]]
        report, passed = handler(job, task, index)
        report["passed"] = bool(passed)
        name = task.get("out", f"task{index:02d}_{task['kind']}.json")
        path = write_report(out_dir / name, report)
        if emit_csv:
            write_csv(path.with_suffix(".csv"), report)
        all_passed &= passed
    return EXIT_OK if all_passed else EXIT_VIOLATION


# ---------------------------------------------------------------------------
# argument parsing


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--job", default=argparse.SUPPRESS,
                        help="job file (JSON)")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS,
                        help="override the job seed")
    common.add_argument("--out", default=argparse.SUPPRESS,
                        help="report output directory (default .)")
    common.add_argument("--csv", action="store_true", default=argparse.SUPPRESS,
                        help="also write CSV flattenings of each report")
    parser = argparse.ArgumentParser(
        prog="fbllab", parents=[common],
        description="estimate free p-convex and (p, q)-summing norms of "
                    "lattice expressions over finite-dimensional spaces")
    sub = parser.add_subparsers(dest="command")

    sub.add_parser("run", parents=[common],
                   help="execute every task in the job file")

    norm = sub.add_parser("norm", parents=[common],
                          help="lower estimate of a (p, q) norm")
    norm.add_argument("--expr", required=True)
    norm.add_argument("--p", type=float, default=2.0)
    norm.add_argument("--q", type=float)
    norm.add_argument("--oracle", action="store_true",
                      help="also run the dim<=2 grid oracle")
    norm.add_argument("--grid", type=float, default=0.01)
    norm.add_argument("--max-len", type=int, default=2)

    supn = sub.add_parser("supnorm", parents=[common], help="sup of |f| over the dual ball")
    supn.add_argument("--expr", required=True)

    ext = sub.add_parser("extend", parents=[common], help="extension bound check for a tuple")
    ext.add_argument("--expr", required=True)
    ext.add_argument("--p", type=float, default=2.0)
    ext.add_argument("--tuple", required=True,
                     help="JSON list of functional rows")

    pie = sub.add_parser("pietsch", parents=[common], help="domination certificate + verification")
    pie.add_argument("--expr", required=True)
    pie.add_argument("--p", type=float, default=2.0)
    pie.add_argument("--grid", type=int, default=128)
    pie.add_argument("--samples", type=int, default=512)
    pie.add_argument("--fresh", type=int, default=10_000)

    dcv = sub.add_parser("dconvex", parents=[common], help="convexity inequality fuzzing")
    dcv.add_argument("--g-exponent", default="2")
    dcv.add_argument("--arity", type=int, default=2)
    dcv.add_argument("--theta", type=int, choices=(0, 1), default=1)
    dcv.add_argument("--M", type=float, default=1.0)
    dcv.add_argument("--lattice-dim", type=int, default=2)
    dcv.add_argument("--lattice-r", default="2")
    dcv.add_argument("--samples", type=int, default=1000)
    dcv.add_argument("--expect-violation", action="store_true")

    cmp_ = sub.add_parser("compare", parents=[common], help="norm comparison experiments")
    cmp_.add_argument("--mode", choices=("inclusion", "divergence", "cotype"),
                      default="inclusion")
    cmp_.add_argument("--expr")
    cmp_.add_argument("--p1", type=float, default=2.0)
    cmp_.add_argument("--q1", type=float, default=2.0)
    cmp_.add_argument("--p2", type=float, default=4.0)
    cmp_.add_argument("--q2", type=float, default=2.0)
    cmp_.add_argument("--p", type=float, default=1.0)
    cmp_.add_argument("--q", type=float, default=2.0)
    cmp_.add_argument("--n-max", type=int, default=64)
    cmp_.add_argument("--dims", default="2,3")
    cmp_.add_argument("--trials", type=int, default=3)

    sub.add_parser("selftest", parents=[common],
                   help="run the full invariant battery")

    return parser


def _flags_to_task(args) -> dict:
    cmd = args.command
    if cmd == "norm":
        task = {"kind": "norm", "expr": args.expr, "p": args.p,
                "q": args.q if args.q is not None else args.p,
                "grid_step": args.grid, "max_len": args.max_len}
        if args.oracle:
            task["oracle"] = True
        return task
    if cmd == "supnorm":
        return {"kind": "supnorm", "expr": args.expr}
    if cmd == "extend":
        return {"kind": "extend", "expr": args.expr, "p": args.p,
                "tuple": json.loads(getattr(args, "tuple"))}
    if cmd == "pietsch":
        return {"kind": "pietsch", "expr": args.expr, "p": args.p,
                "grid": args.grid, "samples": args.samples, "fresh": args.fresh}
    if cmd == "dconvex":
        return {"kind": "dconvex", "g_exponent": args.g_exponent,
                "arity": args.arity, "theta": args.theta, "M": args.M,
                "samples": args.samples,
                "lattice": {"dim": args.lattice_dim, "kind": "lp",
                            "r": args.lattice_r if args.lattice_r == "inf"
                            else float(args.lattice_r)},
                "expect_violation": args.expect_violation}
    if cmd == "compare":
        task = {"kind": "compare", "mode": args.mode}
        if args.mode == "inclusion":
            task.update(expr=args.expr, p1=args.p1, q1=args.q1,
                        p2=args.p2, q2=args.q2)
        elif args.mode == "divergence":
            task.update(expr=args.expr, p=args.p, q=args.q, n_max=args.n_max)
        else:
            task.update(p=args.p, q=args.q, trials=args.trials,
                        dims=[int(d) for d in str(args.dims).split(",") if d])
        return task
    raise JobValidationError(f"no task mapping for {cmd!r}")


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    commands = [a for a in argv if not a.startswith("-")]
    if commands and commands[0] not in _SUBCOMMANDS:
        sys.stderr.write(f"unknown subcommand {commands[0]!r}\n"
                         f"usage: fbllab {{{','.join(_SUBCOMMANDS)}}} [flags]\n")
        return EXIT_USAGE
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    job_path = getattr(args, "job", None)
    seed = getattr(args, "seed", None)
    out_dir = getattr(args, "out", ".")
    emit_csv = bool(getattr(args, "csv", False))

    try:
        if args.command == "selftest":
            report = run_selftest(seed if seed is not None else 0)
            path = write_report(Path(out_dir) / "selftest.json", report)
            if emit_csv:
                write_csv(path.with_suffix(".csv"), report)
            sys.stdout.write(f"selftest: {'pass' if report['passed'] else 'FAIL'} "
                             f"({sum(c['passed'] for c in report['checks'])}/"
                             f"{len(report['checks'])} checks)\n")
            return EXIT_OK if report["passed"] else EXIT_VIOLATION

        if job_path is None:
            sys.stderr.write("this subcommand needs --job\n")
            return EXIT_VALIDATION
        job = load_job(job_path)
        if seed is not None:
            job.seed = int(seed)
        if args.command != "run":
            job.tasks = [_flags_to_task(args)]
            for i, task in enumerate(job.tasks):
                job._validate_names(task, i)
        return run_job(job, out_dir, emit_csv=emit_csv)
    except JobValidationError as err:
        sys.stderr.write(f"validation error: {err}\n")
        return EXIT_VALIDATION
    except (ExprError, SpaceError, ValueError) as err:
        sys.stderr.write(f"error: {err}\n")
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
