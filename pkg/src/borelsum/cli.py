"""Batch front door: validate, slowcurve, solve, sum, verify, example.

Exit codes: 0 pass, 1 constraint or verification failure, 2 usage/parse
errors.  All randomized probes take an explicit seed (default 0) and all
outputs are plain CSV or structured text, so identical configs reproduce
byte-identical files.
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction

import numpy as np

from . import __version__
from .borelsolve import (
    build_family_operator,
    contraction_probe,
    fixed_point_residual,
    solve_recursive,
)
from .configio import ConfigError, load_config
from .coeffspace import save_csv
from .problem import PlanInfeasibleError, validate_problem
from .series import TruncSeries
from .slowcurve import branch as slow_branch, build_abc, verify_branch
from .summation import (
    assemble_solution,
    formal_residual,
    forcing_correction,
    measure_flatness,
    measure_orders,
    plan_geometry,
)
from .problem import p_zero_series


def _write(path, text):
    with open(path, "w") as fh:
        fh.write(text)


def _complex_str(z):
    return f"{z.real:.17g},{z.imag:.17g}"


def _load(args):
    try:
        cfg = load_config(args.config)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        sys.exit(2)
    return cfg


def _plan_or_exit(cfg, out_dir, force=False):
    report, plan = validate_problem(cfg.spec, **cfg.plan_params)
    _write(os.path.join(out_dir, "constraints.csv"), report.to_csv() + "\n")
    _write(os.path.join(out_dir, "constraints.txt"), report.to_text() + "\n")
    if plan is None or (not report.overall and not force):
        print(report.to_text())
        print("validation failed; use --force to continue anyway", file=sys.stderr)
        sys.exit(1)
    return report, plan


def cmd_validate(args):
    cfg = _load(args)
    os.makedirs(args.out, exist_ok=True)
    report, plan = validate_problem(cfg.spec, **cfg.plan_params)
    _write(os.path.join(args.out, "constraints.csv"), report.to_csv() + "\n")
    _write(os.path.join(args.out, "constraints.txt"), report.to_text() + "\n")
    print(report.to_text())
    if plan is not None:
        print(
            f"levels: kappa1={plan.kappa1} kappa2={plan.kappa2}; "
            f"rescales: chi1={plan.chi1} chi2={plan.chi2}; "
            f"orders: {plan.gevrey1} and {plan.gevrey2}"
        )
    return 0 if (plan is not None and report.overall) else 1


def _branch_report(br):
    lines = [
        f"which={br.which}",
        f"leading_exponent={br.leading_exponent}",
        f"leading_coeff={_complex_str(br.leading_coeff)}",
        "degree,re,im",
    ]
    for d in br.tail.degrees():
        c = br.tail[d]
        lines.append(f"{d},{c.real:.17g},{c.imag:.17g}")
    return "\n".join(lines) + "\n"


def cmd_slowcurve(args):
    cfg = _load(args)
    os.makedirs(args.out, exist_ok=True)
    _, plan = _plan_or_exit(cfg, args.out, args.force)
    triple = build_abc(
        p_zero_series(cfg.spec, plan, 1),
        p_zero_series(cfg.spec, plan, 2),
        p_zero_series(cfg.spec, plan, 3),
    )
    order = args.order or cfg.numeric("order", 16)
    for which in (1, 2):
        br = slow_branch(triple, which, order)
        _, rel = verify_branch(triple, br)
        _write(os.path.join(args.out, f"branch{which}.txt"), _branch_report(br))
        print(
            f"branch {which}: leading {br.leading_coeff:.6g} T^{br.leading_exponent}, "
            f"tail through T^{br.tail.top_degree}, residual rel {rel:.3e}"
        )
    return 0


def _solution_manifest(out_dir, sol, tag):
    rows = ["degree,file"]
    for n in sol.omega.degrees():
        from .coeffspace import CoeffFn

        name = f"{tag}_deg{n:03d}.csv"
        fn = CoeffFn(sol.omega.grid, sol.omega.row(n), sol.omega.beta, sol.omega.mu)
        save_csv(fn, os.path.join(out_dir, name))
        rows.append(f"{n},{name}")
    _write(os.path.join(out_dir, f"{tag}_manifest.csv"), "\n".join(rows) + "\n")
    meta = [
        f"family={sol.family}",
        f"eps={_complex_str(sol.eps)}",
        f"order={sol.omega.top_degree}",
        f"sigma_denominator={sol.q_den}",
        f"level={sol.kappa}",
        f"residual={sol.residual:.17g}",
    ]
    _write(os.path.join(out_dir, f"{tag}_meta.txt"), "\n".join(meta) + "\n")


def cmd_solve(args):
    cfg = _load(args)
    os.makedirs(args.out, exist_ok=True)
    _, plan = _plan_or_exit(cfg, args.out, args.force)
    order = args.order or cfg.numeric("order", 12)
    eps = complex(args.eps) if args.eps else 0.1 + 0.0j
    rc = 1
    for family in _families(args):
        fam = build_family_operator(cfg.spec, plan, family, order)
        sol = solve_recursive(cfg.spec, plan, family, eps, order, fam=fam)
        res = fixed_point_residual(cfg.spec, plan, fam, eps, sol)
        sol = type(sol)(
            sol.family, sol.eps, sol.omega, sol.q_den, sol.kappa, sol.keff, res
        )
        _solution_manifest(args.out, sol, f"omega{family}")
        print(f"family {family}: solved to degree {sol.omega.top_degree}, fixed-point residual {res:.3e}")
        rc = 0
    return rc


def cmd_sum(args):
    cfg = _load(args)
    os.makedirs(args.out, exist_ok=True)
    _, plan = _plan_or_exit(cfg, args.out, args.force)
    order = args.order or cfg.numeric("order", 12)
    eps = complex(args.eps) if args.eps else None
    for family in _families(args):
        cov, assoc, p = plan_geometry(cfg.spec, plan, family)
        fam = build_family_operator(cfg.spec, plan, family, order)
        triple = build_abc(
            p_zero_series(cfg.spec, plan, 1),
            p_zero_series(cfg.spec, plan, 2),
            p_zero_series(cfg.spec, plan, 3),
        )
        br = slow_branch(triple, family, order + 4)
        e = eps if eps is not None else 0.45 * np.exp(1j * cov.sectors[p].direction)
        sol = solve_recursive(cfg.spec, plan, family, e, order, fam=fam)
        rows = ["t_re,t_im,z_re,z_im,u_re,u_im"]
        for t_abs in (0.05, 0.1, 0.15):
            for z in (0.0, 0.3):
                val = assemble_solution(
                    cfg.spec, plan, family, br, sol, t_abs, z, e,
                    direction_sector=assoc.image_sector(p), allow_untrusted=True,
                )
                rows.append(
                    f"{t_abs:.17g},0,{complex(z).real:.17g},{complex(z).imag:.17g},"
                    f"{val.value.real:.17g},{val.value.imag:.17g}"
                )
        _write(os.path.join(args.out, f"solution{family}.csv"), "\n".join(rows) + "\n")
        print(f"family {family}: assembled on sector {p} at eps = {e:.4g}")
    return 0


def cmd_verify(args):
    cfg = _load(args)
    os.makedirs(args.out, exist_ok=True)
    report, plan = _plan_or_exit(cfg, args.out, args.force)
    order = args.order or cfg.numeric("order", 10)
    seed = args.seed if args.seed is not None else cfg.numeric("seed", 0)
    lines = []
    ok = True

    def check(name, passed, detail):
        nonlocal ok
        ok = ok and passed
        line = f"{'PASS' if passed else 'FAIL'}  {name}: {detail}"
        lines.append(line)
        print(line)

    check("constraints", report.overall, f"{len(report.failing())} gating failures")
    with ThreadPoolExecutor(max_workers=max(1, args.threads or os.cpu_count() or 1)) as pool:
        futures = {}
        for family in _families(args):
            futures[family] = pool.submit(_verify_family, cfg, plan, family, order, seed)
        for family, fut in futures.items():
            for name, passed, detail in fut.result():
                check(f"family{family}.{name}", passed, detail)
    orders = {}
    for family in _families(args):
        fit = measure_orders(cfg.spec, plan, family, order_t=order)
        orders[family] = fit.params.get("order", float("nan"))
        lines.append(f"INFO  family{family}.order-estimate: {orders[family]:.4g} (r2={fit.r2:.3f})")
    if set(orders) == {1, 2}:
        check("order-ordering", orders[2] >= orders[1], f"{orders[2]:.4g} >= {orders[1]:.4g}")
    _write(os.path.join(args.out, "verify.txt"), "\n".join(lines) + "\n")
    return 0 if ok else 1


def _verify_family(cfg, plan, family, order, seed):
    out = []
    fam = build_family_operator(cfg.spec, plan, family, order)
    eps = 0.45
    sol = solve_recursive(cfg.spec, plan, family, eps, order, fam=fam)
    res = fixed_point_residual(cfg.spec, plan, fam, eps, sol)
    out.append(("fixed-point", res < 1e-8, f"residual {res:.3e}"))
    rep = formal_residual(cfg.spec, plan, family, sol, eps, fam_op=fam)
    out.append(("formal-residual", rep.relative < 1e-8, f"relative {rep.relative:.3e}"))
    stats = contraction_probe(cfg.spec, plan, family, 0.2, trials=10, seed=seed, fam=fam, order_t=order)
    out.append(("contraction", stats.max_ratio <= 0.5, f"max ratio {stats.max_ratio:.4f}"))
    flat = measure_flatness(cfg.spec, plan, family, order_t=order)
    out.append(
        (
            "flatness",
            flat.passed,
            f"M={flat.fixed.params.get('M', float('nan')):.4g} r2={flat.fixed.r2:.4f}",
        )
    )
    return out


def cmd_example(args):
    from .configio import WORKED_EXAMPLE

    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "example.cfg")
    _write(path, WORKED_EXAMPLE)
    args.config = path
    rc = cmd_validate(args)
    if rc != 0 and not args.force:
        return rc
    for sub in (cmd_slowcurve, cmd_solve, cmd_sum, cmd_verify):
        rc = sub(args) or rc
    return rc


def _families(args):
    return (args.family,) if args.family else (1, 2)


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="borelsum",
        description="slow curves, Borel-plane fixed points and Laplace-Fourier summation",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    commands = {
        "validate": cmd_validate,
        "slowcurve": cmd_slowcurve,
        "solve": cmd_solve,
        "sum": cmd_sum,
        "verify": cmd_verify,
        "example": cmd_example,
    }
    for name, fn in commands.items():
        p = sub.add_parser(name)
        if name != "example":
            p.add_argument("config", help="problem configuration file")
        p.add_argument("--order", type=int, default=None, help="series truncation order")
        p.add_argument("--eps", default=None, help="perturbation parameter, complex like 0.1+0j")
        p.add_argument("--family", type=int, choices=(1, 2), default=None)
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--threads", type=int, default=None)
        p.add_argument("--force", action="store_true", help="continue past failed validation")
        p.set_defaults(func=fn)
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except PlanInfeasibleError as exc:
        print(f"infeasible plan: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
