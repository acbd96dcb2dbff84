"""Command-line driver: eigen, constants, identity, pme and all."""

from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, bundled_config, describe_defaults, load_config
from .constants import ConstantQuery, Which, compute_constant
from .eigen import NonConvergence, SolverConfig, solve_first_eigenpair
from .grid import GrushinDomain, ScalarField, product_of_sines, write_field_csv
from .identities import (
    phi_family,
    random_smooth_field,
    verify_main_identity,
    verify_remainder_formula,
)
from .pme import (
    PmeProblem,
    PowerLaw,
    Status,
    Tabulated,
    Zero,
    check_blowup_certificate,
    check_global_certificate,
    run,
)
from .reports import (
    CONSTANT_HEADER,
    IDENTITY_HEADER,
    TRACE_HEADER,
    constant_row,
    identity_row,
    read_table,
    trace_meta,
    write_table,
)

log = logging.getLogger("grushinlab")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NONCONVERGENCE = 3
EXIT_CONSTANT_BOUND = 4
EXIT_IDENTITY = 5
EXIT_PME = 6

PME_BUNDLE = ("blowup", "global", "zero")


def make_domain(sec, gamma=None, extents=None, grid=None) -> GrushinDomain:
    m, k = sec["m"], sec["k"]
    extents = extents if extents is not None else sec["extents"]
    grid = grid if grid is not None else sec["grid"]
    if isinstance(grid, int):
        grid = (grid,)
    if len(grid) == 1:
        grid = grid * (m + k)
    return GrushinDomain(m, k, sec["gamma"] if gamma is None else gamma, tuple(extents), tuple(grid))


def solver_config(cfg: RunConfig, p=None) -> SolverConfig:
    s = cfg["solver"]
    return SolverConfig(p=s["p"] if p is None else p, max_iterations=s["max_iterations"],
                        tolerance=s["tolerance"], random_restarts=s["random_restarts"],
                        seed=cfg.seed)


def _base_meta(cfg: RunConfig, command: str) -> dict:
    return {"tool": f"grushinlab {__version__}", "command": command, "seed": cfg.seed}


# eigen


def cmd_eigen(cfg: RunConfig, out: Path) -> int:
    dom = make_domain(cfg["domain"])
    pair = solve_first_eigenpair(dom, solver_config(cfg), raise_on_failure=True)
    meta = _base_meta(cfg, "eigen")
    meta.update(p=cfg["solver"]["p"], lambda1=pair.lambda1, residual=pair.residual,
                iterations=pair.iterations)
    write_field_csv(out / "eigen.csv", pair.phi1,
                    {k: format(v, ".17g") if isinstance(v, float) else v for k, v in meta.items()})
    print(f"lambda1={pair.lambda1:.17g} residual={pair.residual:.3e}")
    return EXIT_OK


# constants


def constant_queries(cfg: RunConfig):
    sec = cfg["constants"]
    which = sec["which"]
    queries = []
    for p in sec["p_values"]:
        if "all" in which:
            kinds = [Which.CP] if p >= 2 else [Which.C1, Which.C2, Which.C3]
        else:
            kinds = [Which(w) for w in which]
        for w in kinds:
            queries.append(ConstantQuery(p, w, sec["search_radius"], sec["coarse_grid"],
                                         sec["refine_tol"]))
    return queries


def cmd_constants(cfg: RunConfig, out: Path) -> int:
    try:
        queries = constant_queries(cfg)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    results = [compute_constant(q) for q in queries]
    write_table(out / "constants.csv", CONSTANT_HEADER, [constant_row(r) for r in results],
                _base_meta(cfg, "constants"))
    code = EXIT_OK
    for r in results:
        status = "pass" if r.bound_check else "FAIL"
        print(f"{r.which.value}(p={r.p:g}) = {r.value:.12g} +- {r.uncertainty:.1e} "
              f"interval=[{r.interval[0]:.6g}, {r.interval[1]:.6g}] {status}"
              + (f" flags={','.join(r.flags)}" if r.flags else ""))
        if not r.bound_check:
            code = EXIT_CONSTANT_BOUND
    return code


# identity


def identity_domain(cfg: RunConfig, gamma: float, grid: int) -> GrushinDomain:
    sec = cfg["identity"]
    extents = sec["extents"] if gamma == 0 else sec["grushin_extents"]
    return make_domain(cfg["domain"], gamma=gamma, extents=extents, grid=(grid,))


def identity_rows(cfg: RunConfig):
    """(row, passed) tuples for the configured case matrix."""
    sec = cfg["identity"]
    rows = []
    for gi, gamma in enumerate(sec["gammas"]):
        for grid in sec["grids"]:
            dom = identity_domain(cfg, gamma, grid)
            u = random_smooth_field(dom, np.random.default_rng([cfg.seed, gi]))
            for p in sec["p_values"]:
                for fam in sec["families"]:
                    rep = verify_main_identity(u, phi_family(dom, fam), p, case=f"main:{fam}")
                    ok = rep.rel_residual <= sec["threshold"]
                    rows.append((identity_row(rep, max(dom.spacing), sec["threshold"], ok), ok))
        for p in sec["p_values"]:
            dom = identity_domain(cfg, gamma, sec["attainment_grid"])
            pair = solve_first_eigenpair(dom, solver_config(cfg, p))
            for label, c in (("1", 1.0), ("-2", -2.0), ("3i", 3j)):
                rep = verify_remainder_formula(pair.phi1 * c, pair, p, case=f"attain:c={label}")
                ok = rep.scaled_residual <= sec["attainment_threshold"]
                rows.append((identity_row(rep, max(dom.spacing), sec["attainment_threshold"], ok), ok))
        if sec["refinement"]:
            for p in sec["p_values"]:
                for fam in sec["families"]:
                    previous = math.inf
                    for grid in (32, 64, 128):
                        dom = identity_domain(cfg, gamma, grid)
                        u = random_smooth_field(dom, np.random.default_rng([cfg.seed, gi]))
                        rep = verify_main_identity(u, phi_family(dom, fam), p, case=f"refine:{fam}")
                        ok = rep.rel_residual < previous
                        previous = rep.rel_residual
                        rows.append((identity_row(rep, max(dom.spacing), math.nan, ok), ok))
    return rows


def cmd_identity(cfg: RunConfig, out: Path) -> int:
    rows = identity_rows(cfg)
    write_table(out / "identity.csv", IDENTITY_HEADER, [r for r, _ in rows],
                _base_meta(cfg, "identity"))
    failed = sum(1 for _, ok in rows if not ok)
    print(f"identity cases={len(rows)} failed={failed}")
    return EXIT_IDENTITY if failed else EXIT_OK


# pme


def _read_source_table(path_text, cfg: RunConfig) -> Tabulated:
    path = Path(path_text)
    if not path.is_absolute() and cfg.source != "<defaults>":
        path = Path(cfg.source).parent / path
    if not path.is_file():
        raise ConfigError(f"source table not found: {path}")
    _, rows = read_table(path)
    try:
        return Tabulated(tuple(float(r["u"]) for r in rows), tuple(float(r["f"]) for r in rows))
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"bad source table {path}: {exc}") from None


def build_pme(cfg: RunConfig):
    """Return (problem, certificate kind) for the [pme] section."""
    sec = cfg["pme"]
    p = sec["p"] if sec["p"] is not None else cfg["solver"]["p"]
    dom = make_domain(cfg["domain"])
    kind = sec["source"]
    if kind == "zero":
        source = Zero()
    elif kind == "power":
        source = PowerLaw(sec["q"], sec["coef"])
    elif kind == "table":
        source = _read_source_table(sec["table"], cfg)
    else:
        raise ConfigError(f"[pme] source must be zero, power or table, got {kind!r}")
    cert = sec["certificate"]
    if cert not in ("blowup", "global", "none"):
        raise ConfigError(f"[pme] certificate must be blowup, global or none, got {cert!r}")
    pair = solve_first_eigenpair(dom, solver_config(cfg, p))
    ell, alpha = sec["ell"], sec["alpha"]
    beta = sec["beta"]
    if beta is None:
        edge = pair.lambda1 * (alpha - ell - 1) / (ell + 1)
        beta = min(1.0, edge) if cert == "blowup" else edge
    u0 = ScalarField(dom, sec["u0_amplitude"] * product_of_sines(dom).values.real)
    problem = PmeProblem(dom, p, ell, source, u0, (alpha, beta, sec["theta"]), pair.lambda1)
    return problem, cert


def cmd_pme(cfg: RunConfig, out: Path) -> int:
    try:
        problem, cert_kind = build_pme(cfg)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    sec = cfg["pme"]
    report = None
    if cert_kind == "blowup":
        report = check_blowup_certificate(problem)
    elif cert_kind == "global":
        report = check_global_certificate(problem)
    t_max = sec["t_max"]
    blowup_cert = report is not None and report.kind == "BlowUp" and report.holds
    if blowup_cert:
        # nothing to learn past the bound: reaching it unexploded is the violation
        t_max = min(t_max, report.Tstar_bound * (1 + 1e-9))
    threshold = sec["blowup_factor"] * float(problem.u0.values.real.max())
    trace = run(problem, t_max, threshold, record_every=sec["record_every"], certificate=report)
    meta = _base_meta(cfg, "pme")
    meta.update(trace_meta(trace))
    meta.update(p=problem.p, ell=problem.ell, lambda1=problem.lambda1, t_max=t_max)
    write_table(out / "pme_trace.csv", TRACE_HEADER, list(trace.rows()), meta)
    if report is not None:
        (out / "certificate.txt").write_text(report.as_text(), encoding="utf-8")
        print(report.as_text(), end="")
    print(f"status={trace.status.value} t_detect={trace.t_detect} steps={trace.steps}")
    code = EXIT_OK
    if blowup_cert and report.Tstar_bound <= t_max * (1 + 1e-12):
        if not (trace.status is Status.BLOWUP and trace.t_detect <= report.Tstar_bound):
            code = EXIT_PME
    if report is not None and report.kind == "Global" and report.holds:
        m0 = trace.mass[0]
        if any(m > m0 * (1 + 1e-8) for m in trace.mass):
            code = EXIT_PME
    return code


# all


def cmd_all(cfg: RunConfig, out: Path) -> int:
    """Every subcommand into its own directory; pme runs use the bundled configs."""
    results = []
    for name, func in (("eigen", cmd_eigen), ("constants", cmd_constants),
                       ("identity", cmd_identity)):
        print(f"== {name}")
        results.append((name, _guarded(func, cfg, out / name)))
    for name in PME_BUNDLE:
        print(f"== pme {name}")
        sub = load_config(bundled_config(f"{name}.ini"), {("run", "seed"): cfg.seed})
        results.append((f"pme-{name}", _guarded(cmd_pme, sub, out / f"pme_{name}")))
    write_table(out / "summary.csv", ["step", "exit_code"], results, _base_meta(cfg, "all"))
    for name, code in results:
        print(f"{name}: exit {code}")
    return next((c for _, c in results if c != EXIT_OK), EXIT_OK)


def _guarded(func, cfg, out):
    out.mkdir(parents=True, exist_ok=True)
    try:
        return func(cfg, out)
    except NonConvergence as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE


COMMANDS = {"eigen": cmd_eigen, "constants": cmd_constants, "identity": cmd_identity,
            "pme": cmd_pme, "all": cmd_all}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="grushinlab",
        description="Lp-Poincare remainder experiments for Baouendi-Grushin vector fields.",
        epilog="Exit codes: 0 ok, 2 config error, 3 non-convergence, 4 constant outside "
               "its interval, 5 identity over threshold, 6 PME bound violated.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--show-defaults", action="store_true",
                        help="print every config key with its default and exit")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="INI file with [run] [domain] [solver] "
                        "[constants] [identity] [pme] sections")
    common.add_argument("--p", type=float, help="exponent p (solver, sweeps)")
    common.add_argument("--gamma", type=float, help="Grushin exponent")
    common.add_argument("--grid", type=int, help="cells per axis")
    common.add_argument("--seed", type=int, help="seed for randomised sweeps")
    common.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    common.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command")
    sub.add_parser("eigen", parents=[common], help="first Dirichlet eigenpair")
    pc = sub.add_parser("constants", parents=[common], help="remainder constants")
    pc.add_argument("--which", help="cp, c1, c2, c3 or all (comma separated)")
    sub.add_parser("identity", parents=[common], help="identity and attainment checks")
    pp = sub.add_parser("pme", parents=[common], help="porous-medium run with certificate")
    pp.add_argument("--bundled", choices=PME_BUNDLE, help="use a bundled pme config")
    sub.add_parser("all", parents=[common], help="every subcommand with bundled settings")
    return parser


def overrides_from(args) -> dict:
    ov = {}
    if args.p is not None:
        for key in (("solver", "p"), ("constants", "p_values"), ("identity", "p_values")):
            ov[key] = repr(args.p)
    if args.gamma is not None:
        ov[("domain", "gamma")] = repr(args.gamma)
        ov[("identity", "gammas")] = repr(args.gamma)
    if args.grid is not None:
        ov[("domain", "grid")] = str(args.grid)
        ov[("identity", "grids")] = str(args.grid)
    if args.seed is not None:
        ov[("run", "seed")] = str(args.seed)
    if getattr(args, "which", None):
        ov[("constants", "which")] = args.which
    return ov


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.show_defaults:
        print(describe_defaults(), end="")
        return EXIT_OK
    if args.command is None:
        parser.print_help()
        return EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        path = args.config
        if path is None and getattr(args, "bundled", None):
            path = bundled_config(f"{args.bundled}.ini")
        cfg = load_config(path, overrides_from(args))
        args.out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](cfg, args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NonConvergence as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    except ValueError as exc:
        # invalid parameter combinations caught by the library constructors
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
