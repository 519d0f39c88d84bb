"""Command-line front end: ``smoothpatch <command> [options]``."""
from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

from . import checks
from .errors import (DegenerateGeometryError, InvalidArgumentError, SmoothPatchError,
                     UnsupportedTopologyError)
from .fields import ExactField
from .galerkin import (CASES, PDES, BoundaryData, ConvergenceReport, SolverConfig, case_degree,
                       compute_errors, convergence_study, prepare_geometry, solve_pde)
from .geometry import BUILTIN_NAMES, builtin_domain, domain_to_json, load_domain
from .mixed2d import mixed_dimension
from .smoothspace import assemble_smooth_space, check_smooth_config

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
CONFIG_ERRORS = (InvalidArgumentError, DegenerateGeometryError, UnsupportedTopologyError)

DEFAULT_S = {"biharmonic": 1, "triharmonic": 2}
DEFAULT_H0 = {("biharmonic", "A"): Fraction(1, 6), ("triharmonic", "A"): Fraction(1, 5),
              ("biharmonic", "B"): Fraction(1, 4), ("triharmonic", "B"): Fraction(1, 5)}


@dataclass
class RunConfig:
    command: str
    domain: str
    pde: str
    case: str
    s: int
    levels: int
    h0: Fraction
    out: Path | None
    omega: tuple
    quad: int | None
    k: int | None = None

    @property
    def p1(self) -> int:
        return case_degree(self.case, self.s)

    def solver(self) -> SolverConfig:
        w = list(self.omega) + [None] * (3 - len(self.omega))
        return SolverConfig(pde=self.pde, omega=w[0], omega1=w[1], omega2=w[2], quad=self.quad)

    @classmethod
    def from_args(cls, args) -> "RunConfig":
        pde = getattr(args, "pde", None) or "biharmonic"
        case = getattr(args, "case", None) or "A"
        s = args.s if getattr(args, "s", None) is not None else DEFAULT_S[pde]
        h0 = args.h0 if getattr(args, "h0", None) is not None else DEFAULT_H0[pde, case]
        levels = getattr(args, "levels", None) or 4
        if levels < 1:
            raise InvalidArgumentError("--levels must be at least 1")
        return cls(args.command, getattr(args, "domain", None) or "three-patch", pde, case, s,
                   levels, h0, Path(args.out) if getattr(args, "out", None) else None,
                   tuple(getattr(args, "omega", None) or ()), getattr(args, "quad", None),
                   getattr(args, "k", None))


def _fraction(text: str) -> Fraction:
    try:
        value = Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a fraction: {text!r}") from None
    if value <= 0 or value.numerator != 1:
        raise argparse.ArgumentTypeError(f"h0 must have the form 1/m, got {text!r}")
    return value


def _omega(text: str) -> tuple:
    try:
        values = tuple(float(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a weight list: {text!r}") from None
    if not 1 <= len(values) <= 3:
        raise argparse.ArgumentTypeError("--omega takes one to three comma-separated weights")
    return values


def _add_problem_flags(p, levels=False, pde=True):
    p.add_argument("--domain", help=f"builtin name ({', '.join(BUILTIN_NAMES)}) or JSON file")
    if pde:
        p.add_argument("--pde", choices=PDES)
    p.add_argument("--case", choices=CASES)
    p.add_argument("--s", type=int, choices=(1, 2))
    if levels:
        p.add_argument("--levels", type=int)
        p.add_argument("--h0", type=_fraction, help="coarsest mesh size 1/m")


def _add_solver_flags(p):
    p.add_argument("--omega", type=_omega, metavar="W[,W1[,W2]]",
                   help="boundary fit weights (default h^2, h^2, h^4)")
    p.add_argument("--quad", type=int, metavar="N", help="Gauss points per span")
    p.add_argument("--out", metavar="DIR", help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="smoothpatch", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("space-info", help="dimensions of the mixed and smooth spaces")
    _add_problem_flags(p, pde=False)
    p.add_argument("--k", type=int, default=4, help="interior knots per direction")
    p.add_argument("--json", action="store_true", help="print the full JSON summary")

    p = sub.add_parser("check", help="run invariant suites")
    _add_problem_flags(p, pde=False)
    p.add_argument("--k", type=int, default=4)
    p.add_argument("--suite", action="append", choices=checks.SUITES,
                   help="run only this suite (repeatable)")
    p.add_argument("--perturb-gluing", type=int, metavar="EDGE",
                   help="perturb the gluing data of one inner edge (fault injection)")

    p = sub.add_parser("solve", help="solve on a single mesh and report errors")
    _add_problem_flags(p, levels=True)
    p.add_argument("--k", type=int, help="interior knots (overrides --h0)")
    _add_solver_flags(p)

    p = sub.add_parser("convergence", help="refinement study with CSV, SVG and order table")
    _add_problem_flags(p, levels=True)
    _add_solver_flags(p)

    p = sub.add_parser("domains", help="builtin domain utilities")
    dsub = p.add_subparsers(dest="action", required=True)
    e = dsub.add_parser("export", help="write a builtin domain as JSON")
    e.add_argument("name", choices=BUILTIN_NAMES + ("square",))
    e.add_argument("--out", metavar="FILE", help="output file (default stdout)")
    return parser


# -- commands ----------------------------------------------------------------

def cmd_space_info(cfg: RunConfig, as_json: bool) -> int:
    domain = load_domain(cfg.domain)
    check_smooth_config(domain, cfg.s, cfg.p1, cfg.k)
    space = assemble_smooth_space(domain, cfg.s, cfg.p1, cfg.k)
    summary = space.summary()
    summary["case"] = cfg.case
    if as_json:
        print(json.dumps(summary, indent=2, sort_keys=True, default=str))
        return EXIT_OK
    print(f"domain {domain.name}: {len(domain.patches)} patches, case {cfg.case}, "
          f"s={cfg.s}, p1={cfg.p1}, k={cfg.k}")
    print(f"mixed dim per patch: {mixed_dimension(cfg.s, cfg.p1, cfg.k)}")
    print("mixed blocks: " + ", ".join(f"{g} {n}" for g, n in summary["mixed_blocks"].items()))
    print("smooth blocks: " + ", ".join(f"{g} {n}" for g, n in summary["blocks"].items()))
    print(f"total dofs: {summary['total']} (homogeneous {summary['homogeneous']})")
    return EXIT_OK


def cmd_check(cfg: RunConfig, suites, perturb) -> int:
    domain = load_domain(cfg.domain)
    gluing = None
    if perturb is not None:
        if not any(e.index == perturb for e in domain.inner_edges):
            raise InvalidArgumentError(f"edge {perturb} is not an inner edge of {domain.name}")
        gluing = checks.perturbed_gluing(domain, perturb)
    names = suites or checks.SUITES
    results = checks.run_suites(domain, cfg.s, cfg.p1, cfg.k or 4, names, gluing=gluing)
    for r in results:
        print(r.line())
    failed = [r.name for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} suites passed")
    return EXIT_NUMERIC if failed else EXIT_OK


def cmd_solve(cfg: RunConfig) -> int:
    k = cfg.k if cfg.k is not None else cfg.h0.denominator - 1
    if k < 1:
        raise InvalidArgumentError(f"--k must be positive, got {k}")
    domain = prepare_geometry(load_domain(cfg.domain), cfg.p1, cfg.s, Fraction(1, k + 1))
    exact = ExactField()
    space = assemble_smooth_space(domain, cfg.s, cfg.p1, k)
    sol = solve_pde(space, BoundaryData.from_exact(exact, cfg.pde), cfg.solver())
    errors = compute_errors(sol, exact)
    result = {"domain": domain.name, "pde": cfg.pde, "case": cfg.case, "s": cfg.s, "p1": cfg.p1,
              "k": k, "h": 1 / (k + 1), "dofs": space.dim, "errors": errors,
              "galerkin_residual": sol.info["galerkin_residual"]}
    print(f"{cfg.pde} case {cfg.case} on {domain.name}: k={k}, dofs={space.dim}")
    for name, value in errors.items():
        print(f"  rel. error {name}: {value:.6e}")
    if cfg.out:
        cfg.out.mkdir(parents=True, exist_ok=True)
        (cfg.out / "solve.json").write_text(json.dumps(result, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def order_table(report: ConvergenceReport) -> str:
    norms = report.norms
    lines = ["level  " + "  ".join(f"{'order ' + n:>9}" for n in norms)]
    for lvl, rate in zip(report.levels, report.rates()):
        cells = ["        -" if rate is None else f"{rate[n]:9.3f}" for n in norms]
        lines.append(f"{lvl.level:5d}  " + "  ".join(cells))
    return "\n".join(lines)


_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd")


def convergence_svg(report: ConvergenceReport, width: int = 480, height: int = 360) -> str:
    """Log-log plot: log2(1/h) against log10(relative error), one polyline per norm."""
    xs = [math.log2(1 / lvl.h) for lvl in report.levels]
    series = {n: [math.log10(lvl.errors[n]) for lvl in report.levels] for n in report.norms}
    ys = [y for ys_ in series.values() for y in ys_ if math.isfinite(y)]
    x0, x1 = min(xs) - 0.25, max(xs) + 0.25
    y0, y1 = math.floor(min(ys)), math.ceil(max(ys))
    if y1 == y0:
        y1 += 1
    left, right, top, bottom = 60, 90, 20, 45

    def px(x):
        return left + (x - x0) / (x1 - x0) * (width - left - right)

    def py(y):
        return top + (y1 - y) / (y1 - y0) * (height - top - bottom)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'font-family="sans-serif" font-size="11">',
           f'<rect x="{left}" y="{top}" width="{width - left - right}" '
           f'height="{height - top - bottom}" fill="none" stroke="black"/>']
    for y in range(y0, y1 + 1):
        out.append(f'<line x1="{left}" y1="{py(y):.2f}" x2="{width - right}" y2="{py(y):.2f}" '
                   f'stroke="#ddd"/><text x="{left - 6}" y="{py(y) + 4:.2f}" '
                   f'text-anchor="end">{y}</text>')
    for x in xs:
        out.append(f'<text x="{px(x):.2f}" y="{height - bottom + 15}" '
                   f'text-anchor="middle">{x:.2f}</text>')
    out.append(f'<text x="{(left + width - right) / 2:.2f}" y="{height - 8}" '
               f'text-anchor="middle">log2(1/h)</text>')
    out.append(f'<text x="14" y="{(top + height - bottom) / 2:.2f}" text-anchor="middle" '
               f'transform="rotate(-90 14 {(top + height - bottom) / 2:.2f})">log10(error)</text>')
    for i, (name, vals) in enumerate(series.items()):
        color = _COLORS[i % len(_COLORS)]
        pts = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in zip(xs, vals) if math.isfinite(y))
        out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        ly = top + 14 + 16 * i
        out.append(f'<line x1="{width - right + 8}" y1="{ly - 4}" x2="{width - right + 28}" '
                   f'y2="{ly - 4}" stroke="{color}" stroke-width="1.5"/>'
                   f'<text x="{width - right + 32}" y="{ly}">{name}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def cmd_convergence(cfg: RunConfig) -> int:
    domain = load_domain(cfg.domain)

    def progress(lvl):
        errs = ", ".join(f"{n} {v:.3e}" for n, v in lvl.errors.items())
        print(f"level {lvl.level}: h={lvl.h:.6g} dofs={lvl.dofs} {errs} ({lvl.seconds:.1f}s)",
              file=sys.stderr)

    report = convergence_study(domain, cfg.pde, cfg.case, cfg.s, cfg.levels, cfg.h0,
                               config=cfg.solver(), progress=progress)
    table = order_table(report)
    print(table)
    if cfg.out:
        cfg.out.mkdir(parents=True, exist_ok=True)
        stem = f"{domain.name}_{cfg.pde}_{cfg.case}_s{cfg.s}"
        (cfg.out / f"{stem}.csv").write_text(report.to_csv())
        (cfg.out / f"{stem}.svg").write_text(convergence_svg(report))
        (cfg.out / f"{stem}_orders.txt").write_text(table + "\n")
    return EXIT_OK


def cmd_domains_export(name: str, out: str | None) -> int:
    text = json.dumps(domain_to_json(builtin_domain(name)), indent=2) + "\n"
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def run(args) -> int:
    if args.command == "domains":
        return cmd_domains_export(args.name, args.out)
    cfg = RunConfig.from_args(args)
    if args.command == "space-info":
        return cmd_space_info(cfg, args.json)
    if args.command == "check":
        return cmd_check(cfg, args.suite, args.perturb_gluing)
    if args.command == "solve":
        return cmd_solve(cfg)
    return cmd_convergence(cfg)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return run(args)
    except CONFIG_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SmoothPatchError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
