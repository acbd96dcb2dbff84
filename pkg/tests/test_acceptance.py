"""Acceptance suite: one test and one recorded PASS/FAIL line per criterion."""

import math
import time

import numpy as np
import pytest

import frozen
from grushinlab.cli import main
from grushinlab.config import bundled_config, load_config
from grushinlab.constants import ConstantQuery, Which, compute_constant
from grushinlab.eigen import SolverConfig, solve_first_eigenpair
from grushinlab.grid import (
    GrushinDomain,
    ScalarField,
    VectorField,
    grushin_divergence,
    grushin_gradient,
    inner,
    vector_inner,
)
from grushinlab.identities import (
    PHI_FAMILIES,
    phi_family,
    random_smooth_field,
    verify_main_identity,
    verify_poincare,
    verify_remainder_bounds,
    verify_remainder_formula,
)
from grushinlab.picone import cp_eval, picone_expanded
from grushinlab.cli import build_pme
from grushinlab.pme import (
    Status,
    check_blowup_certificate,
    check_global_certificate,
    run,
)

CP_SWEEP = (2.0, 2.5, 3.0, 4.0, 6.0)
SUB2_SWEEP = (1.1, 1.5, 1.9)


def _cvec(rng, n, dim=2):
    return rng.normal(size=(n, dim)) + 1j * rng.normal(size=(n, dim))


def _grushin_box(gamma, grid):
    extents = None if gamma == 0 else [(-1.0, 1.0), (0.0, 1.0)]
    return GrushinDomain.box(gamma=gamma, extents=extents, grid=grid)


def test_criterion_01_picone_equality(acceptance):
    rng = np.random.default_rng(1)
    start = time.perf_counter()
    worst = {}
    for p in (1.2, 1.5, 2.0, 3.0, 4.7):
        n = 10_000
        grad_u = _cvec(rng, n) * np.exp(rng.uniform(-3, 3, n))[:, None]
        grad_phi = _cvec(rng, n) * np.exp(rng.uniform(-3, 3, n))[:, None]
        u = (rng.normal(size=n) + 1j * rng.normal(size=n)) * np.exp(rng.uniform(-3, 3, n))
        phi = (rng.normal(size=n) + 1j * rng.normal(size=n)) * np.exp(rng.uniform(-3, 3, n))
        v = grad_phi * (u / phi)[:, None]
        lhs = cp_eval(grad_u, grad_u - v, p)
        rhs = picone_expanded(grad_u, u, grad_phi, phi, p)
        scale = np.maximum(np.linalg.norm(grad_u, axis=1), np.linalg.norm(v, axis=1)) ** p
        worst[p] = float(np.max(np.abs(lhs - rhs) / scale))
    elapsed = time.perf_counter() - start
    ok = max(worst.values()) <= 1e-11 and elapsed < 10
    acceptance(1, ok, f"max rel |Cp - expanded| = {max(worst.values()):.2e} "
                      f"over 5 x 1e4 samples in {elapsed:.2f}s")
    assert ok


def test_criterion_02_cp_nonnegative_and_vanishing(acceptance):
    rng = np.random.default_rng(2)
    n = 100_000
    p = rng.choice([1.2, 1.5, 2.0, 3.0, 4.7], size=n)
    xi = _cvec(rng, n, 3) * np.exp(rng.uniform(-4, 3, n))[:, None]
    eta = _cvec(rng, n, 3) * np.exp(rng.uniform(-4, 3, n))[:, None]
    vals = np.array([cp_eval(xi[p == q], eta[p == q], q) for q in np.unique(p)], dtype=object)
    vals = np.concatenate(list(vals))
    order = np.concatenate([np.flatnonzero(p == q) for q in np.unique(p)])
    xi, eta, p = xi[order], eta[order], p[order]
    nxi, neta = np.linalg.norm(xi, axis=1), np.linalg.norm(eta, axis=1)
    scale = np.maximum(nxi, np.linalg.norm(xi - eta, axis=1)) ** p
    nonneg = bool(np.all(vals >= -1e-12 * scale))
    sel = (neta >= 0.1) & (nxi <= 10)
    positive = bool(np.all(vals[sel] > 0))
    ok = nonneg and positive and sel.sum() > 1000
    acceptance(2, ok, f"min Cp/scale = {np.min(vals / scale):.2e}; "
                      f"{int(sel.sum())} pairs with |eta|>=0.1, |xi|<=10 all positive: {positive}")
    assert ok


def test_criterion_03_exact_p2(acceptance):
    r = compute_constant(ConstantQuery(2.0, Which.CP))
    rng = np.random.default_rng(3)
    xi, eta = _cvec(rng, 10_000, 3), _cvec(rng, 10_000, 3)
    expected = np.sum(np.abs(eta) ** 2, axis=1)
    rel = float(np.max(np.abs(cp_eval(xi, eta, 2.0) - expected) / expected))
    ok = abs(r.value - 1.0) <= 1e-9 and rel <= 1e-12
    acceptance(3, ok, f"c_2 = {r.value!r}; max rel |C2 - |eta|^2| = {rel:.2e}")
    assert ok


def test_criterion_04_constant_intervals(acceptance):
    start = time.perf_counter()
    results = [compute_constant(ConstantQuery(p, Which.CP)) for p in CP_SWEEP]
    for p in SUB2_SWEEP:
        results += [compute_constant(ConstantQuery(p, w)) for w in (Which.C1, Which.C2, Which.C3)]
    elapsed = time.perf_counter() - start
    bad = [f"{r.which.value}({r.p:g})={r.value:.6g} > {r.interval[1]:.6g}"
           for r in results if not r.bound_check]
    ok = not bad and elapsed < 120
    acceptance(4, ok, f"{len(results) - len(bad)}/{len(results)} constants inside their intervals "
                      f"in {elapsed:.1f}s" + (f"; outside: {', '.join(bad)}" if bad else ""))
    assert ok


def test_criterion_05_summation_by_parts(acceptance):
    rng = np.random.default_rng(5)
    worst = 0.0
    for i in range(100):
        dom = _grushin_box(float(i % 2), 64)
        u = random_smooth_field(dom, rng, modes=5)
        shape = (2**dom.n, dom.n, *dom.shape)
        V = VectorField(dom, rng.normal(size=shape) + 1j * rng.normal(size=shape))
        lhs = vector_inner(grushin_gradient(u), V)
        rhs = -inner(u, grushin_divergence(V))
        worst = max(worst, abs(lhs - rhs) / max(abs(lhs), abs(rhs)))
    ok = worst <= 1e-12
    acceptance(5, ok, f"max relative SBP residual over 100 pairs at 64^2 = {worst:.2e}")
    assert ok


def test_criterion_06_eigenvalues(acceptance):
    t0 = time.perf_counter()
    lam0 = solve_first_eigenpair(GrushinDomain.box(grid=128), SolverConfig(2.0)).lambda1
    t1 = time.perf_counter()
    lam1 = solve_first_eigenpair(_grushin_box(1.0, 32), SolverConfig(2.0)).lambda1
    t2 = time.perf_counter()
    rel0 = abs(lam0 - 2 * math.pi**2) / (2 * math.pi**2)
    diff1 = abs(lam1 - frozen.DENSE_GAMMA1_32)
    ok = rel0 <= 1e-2 and diff1 <= 1e-6 and t1 - t0 < 60 and t2 - t1 < 60
    acceptance(6, ok, f"gamma=0 128^2: {lam0:.8f} (rel {rel0:.1e} to 2pi^2, {t1 - t0:.1f}s); "
                      f"gamma=1 32^2: |{lam1:.10f} - dense| = {diff1:.1e} ({t2 - t1:.1f}s)")
    assert ok


def test_criterion_07_main_identity(acceptance):
    worst_fine, failures = 0.0, []
    for gamma in (0.0, 1.0):
        for p in (1.5, 2.0, 3.0):
            for fam in sorted(PHI_FAMILIES):
                res = []
                for grid in (32, 64, 128):
                    dom = _grushin_box(gamma, grid)
                    u = random_smooth_field(dom, np.random.default_rng(7))
                    res.append(verify_main_identity(u, phi_family(dom, fam), p).rel_residual)
                worst_fine = max(worst_fine, res[-1])
                if not (res[0] > res[1] > res[2] and res[2] <= 1e-2):
                    failures.append(f"{fam}/p={p}/gamma={gamma}: {res}")
    ok = not failures
    acceptance(7, ok, f"18 cases, max rel_residual at 128^2 = {worst_fine:.2e}, "
                      f"all decreasing: {not failures}")
    assert ok, failures


def test_criterion_08_poincare_and_attainment(acceptance, eigenpairs):
    rng = np.random.default_rng(8)
    min_slack, worst_ratio, ok = math.inf, 0.0, True
    for p in (1.5, 3.0):
        pair = eigenpairs(p)
        for _ in range(100):
            u = random_smooth_field(pair.phi1.domain, rng)
            scale = pair.lambda1 * np.sum(np.abs(u.values) ** p) * u.domain.cell_volume
            slack = verify_poincare(u, pair, p)
            min_slack = min(min_slack, slack / scale)
            ok &= slack >= -1e-8 * scale
        for c in (1.0, -2.0, 3j):
            rep = verify_remainder_formula(pair.phi1 * c, pair, p)
            ratio = rep.scaled_residual / (pair.residual / pair.lambda1)
            worst_ratio = max(worst_ratio, ratio)
            ok &= ratio <= 10
    acceptance(8, ok, f"min slack/scale = {min_slack:.2e} over 200 fields; "
                      f"attainment residual / eigen residual <= {worst_ratio:.2e}")
    assert ok


def test_criterion_09_remainder_bounds(acceptance, eigenpairs):
    rng = np.random.default_rng(9)
    margins = {}
    ok = True
    for p, kinds in ((3.0, (Which.CP,)), (1.5, (Which.C1, Which.C2, Which.C3))):
        pair = eigenpairs(p)
        consts = [compute_constant(ConstantQuery(p, w)) for w in kinds]
        for _ in range(20):
            rep = verify_remainder_bounds(random_smooth_field(pair.phi1.domain, rng), pair, p, consts)
            ok &= rep.passed
            for c in rep.checks:
                gap = (c.remainder - c.bound) if c.name.endswith("lower") else (c.bound - c.remainder)
                margins[c.name] = min(margins.get(c.name, math.inf), gap / rep.scale)
    detail = ", ".join(f"{k} min margin/scale {v:.2e}" for k, v in margins.items())
    acceptance(9, ok, detail)
    assert ok


def _bundled_problem(name):
    cfg = load_config(bundled_config(f"{name}.ini"))
    problem, _ = build_pme(cfg)
    return cfg, problem


def test_criterion_10_pme_blowup(acceptance):
    start = time.perf_counter()
    cfg, problem = _bundled_problem("blowup")
    rep = check_blowup_certificate(problem)
    trace = run(problem, cfg["pme"]["t_max"], certificate=rep)
    elapsed = time.perf_counter() - start
    ok = (rep.holds and abs(rep.sigma - (math.sqrt(2) - 1)) < 1e-12
          and trace.status is Status.BLOWUP and trace.t_detect <= rep.Tstar_bound
          and problem.domain.resolution == (64, 64) and elapsed < 120)
    acceptance(10, ok, f"certificate holds={rep.holds}, sigma={rep.sigma:.6f}, "
                       f"t_detect={trace.t_detect:.6g} <= T*={rep.Tstar_bound:.6g} ({elapsed:.1f}s)")
    assert ok


def test_criterion_11_pme_global(acceptance):
    cfg, problem = _bundled_problem("global")
    rep = check_global_certificate(problem)
    trace = run(problem, cfg["pme"]["t_max"], record_every=cfg["pme"]["record_every"])
    m0 = trace.mass[0]
    mass_ok = all(m <= m0 * (1 + 1e-8) for m in trace.mass)
    zcfg, zero = _bundled_problem("zero")
    ztrace = run(zero, zcfg["pme"]["t_max"], record_every=zcfg["pme"]["record_every"])
    zm = ztrace.mass
    dissipative = all(b <= a for a, b in zip(zm, zm[1:])) and ztrace.status is Status.BOUNDED
    failed = [k for k, v in rep.details.items() if not v]
    ok = rep.holds and mass_ok and dissipative
    acceptance(11, ok, f"global certificate holds={rep.holds} (failed clauses: {failed or 'none'}, "
                       f"J0={rep.J0:.4g}); mass(t)<=mass(0): {mass_ok}; f=0 dissipative: {dissipative}")
    assert ok


def test_criterion_12_determinism(acceptance, tmp_path):
    codes = [main(["all", "--seed", "12", "--out", str(tmp_path / name)]) for name in ("a", "b")]
    files_a = sorted(p.relative_to(tmp_path / "a") for p in (tmp_path / "a").rglob("*.csv"))
    files_b = sorted(p.relative_to(tmp_path / "b") for p in (tmp_path / "b").rglob("*.csv"))
    same = files_a == files_b and all(
        (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes() for f in files_a)
    ok = same and len(files_a) >= 6 and codes[0] == codes[1]
    acceptance(12, ok, f"{len(files_a)} CSVs bitwise identical across reruns: {same} "
                       f"(exit codes {codes})")
    assert ok
