"""
Integral checks: the main identity, the remainder formula with an eigenpair,
the Lp-Poincare inequality and the two-sided remainder estimates.

Every equality is reported as a residual; the discrete identities inherit the
O(h^2) consistency error of the finite differences, so convergence under
refinement is the meaningful signal.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .constants import ConstantResult, Which
from .eigen import EigenPair, lp_integral
from .grid import (
    GrushinDomain,
    ScalarField,
    integrate,
    integrate_real,
    p_energy,
    p_grushin,
)
from .picone import cp_field, extremal_deviation

__all__ = [
    "IdentityReport",
    "BoundCheck",
    "BoundsReport",
    "PHI_FAMILIES",
    "phi_family",
    "random_smooth_field",
    "verify_main_identity",
    "verify_remainder_formula",
    "verify_poincare",
    "verify_remainder_bounds",
    "refinement_study",
]


@dataclass
class IdentityReport:
    """Both sides of an identity and their mismatch.

    ``scale`` is the sum of magnitudes of the terms entering the identity; when
    both sides vanish (attainment cases) ``scaled_residual`` is the meaningful
    relative measure, since ``rel_residual`` then compares rounding noise.
    """

    lhs: float
    rhs: float
    abs_residual: float
    rel_residual: float
    scale: float
    scaled_residual: float
    p: float
    gamma: float
    resolution: tuple[int, ...]
    imag_part: float = 0.0
    case: str = ""

    @classmethod
    def build(cls, lhs, rhs, scale, domain, p, imag_part=0.0, case=""):
        abs_res = abs(lhs - rhs)
        rel = abs_res / max(abs(lhs), abs(rhs), 1e-30)
        scaled = abs_res / scale if scale > 0 else abs_res
        return cls(float(lhs), float(rhs), float(abs_res), float(rel), float(scale),
                   float(scaled), float(p), domain.gamma, domain.resolution,
                   float(imag_part), case)


# built-in smooth, strictly positive (up to a constant phase) test weights


def _envelope(domain):
    env = np.ones(domain.shape)
    for c, (a, b) in zip(domain.coords, domain.extents):
        env = env * np.sin(np.pi * (c - a) / (b - a))
    return env


def _unit_coords(domain):
    return [(c - a) / (b - a) for c, (a, b) in zip(domain.coords, domain.extents)]


def _gaussian(domain):
    xi = _unit_coords(domain)
    centre = np.linspace(0.4, 0.6, domain.n)
    r2 = sum((x - c) ** 2 for x, c in zip(xi, centre))
    return _envelope(domain) * np.exp(-r2 / 0.25)


def _cosine(domain):
    vals = np.ones(domain.shape)
    for c, (a, b) in zip(domain.coords, domain.extents):
        vals = vals * np.cos(np.pi * (c - 0.5 * (a + b)) / (b - a))
    x = _unit_coords(domain)[0]
    return vals * (1.0 + 0.3 * np.cos(np.pi * x))


def _complex_phase(domain):
    # a constant phase: the identity equates real quantities only when
    # grad(phi)/phi is a real vector field times the same phase
    return np.exp(0.6j) * _gaussian(domain)


PHI_FAMILIES = {"gaussian": _gaussian, "cosine": _cosine, "complex": _complex_phase}


def phi_family(domain: GrushinDomain, name: str) -> ScalarField:
    try:
        builder = PHI_FAMILIES[name]
    except KeyError:
        raise ValueError(f"unknown phi family {name!r}; choose from {sorted(PHI_FAMILIES)}")
    return ScalarField(domain, builder(domain))


def random_smooth_field(domain: GrushinDomain, rng: np.random.Generator, modes: int = 3,
                        complex_valued: bool = True) -> ScalarField:
    """Random combination of low Dirichlet sine modes (zero on the boundary)."""
    vals = np.zeros(domain.shape, dtype=complex)
    unit = _unit_coords(domain)
    for idx in np.ndindex(*([modes] * domain.n)):
        js = np.array(idx) + 1
        amp = rng.normal() + (1j * rng.normal() if complex_valued else 0.0)
        mode = np.ones(domain.shape)
        for x, j in zip(unit, js):
            mode = mode * np.sin(j * np.pi * x)
        vals += amp / float(np.prod(js)) * mode
    return ScalarField(domain, vals)


def verify_main_identity(u: ScalarField, phi: ScalarField, p: float, eps=None,
                         case="") -> IdentityReport:
    """int C_p(grad u, grad u - (grad phi/phi) u) against
    int |grad u|^p + int |u|^p/(|phi|^{p-2} phi) Delta_{gamma,p} phi."""
    if not p > 1:
        raise ValueError(f"p must be > 1, got {p}")
    dom = u.domain
    lhs = integrate_real(cp_field(u, phi, p), dom)
    weight = ScalarField(dom, np.abs(u.values) ** p / (np.abs(phi.values) ** (p - 2) * phi.values))
    energy = p_energy(u, p)
    tail = integrate(weight * p_grushin(phi, p, eps))
    rhs = energy + tail.real
    scale = energy + abs(tail)
    return IdentityReport.build(lhs, rhs, scale, dom, p, imag_part=tail.imag, case=case)


def _check_pair(u, pair):
    if u.domain != pair.phi1.domain:
        raise ValueError("u and the eigenfunction live on different domains")


def verify_remainder_formula(u: ScalarField, pair: EigenPair, p: float,
                             case="") -> IdentityReport:
    """int C_p against int |grad u|^p - lambda1 int |u|^p."""
    _check_pair(u, pair)
    dom = u.domain
    lhs = integrate_real(cp_field(u, pair.phi1, p), dom)
    energy = p_energy(u, p)
    mass = pair.lambda1 * lp_integral(u, p)
    return IdentityReport.build(lhs, energy - mass, energy + mass, dom, p, case=case)


def verify_poincare(u: ScalarField, pair: EigenPair, p: float) -> float:
    """(1/lambda1) int |grad u|^p - int |u|^p; nonnegative for the discrete minimiser."""
    _check_pair(u, pair)
    return p_energy(u, p) / pair.lambda1 - lp_integral(u, p)


@dataclass
class BoundCheck:
    name: str
    constant: float
    remainder: float
    bound: float
    slack: float
    passed: bool


@dataclass
class BoundsReport:
    p: float
    remainder: float
    scale: float
    checks: list[BoundCheck] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)


def _orientation_integral(a, dom):
    return dom.cell_volume * float(np.sum(a)) / 2**dom.n


def verify_remainder_bounds(u: ScalarField, pair: EigenPair, p: float,
                            constants, tol: float = 1e-8) -> BoundsReport:
    """Evaluate the remainder estimates that apply to ``p``.

    ``constants`` maps (or lists) ConstantResult objects computed for the same p.
    p >= 2 uses c_p; 1 < p < 2 uses c_1, c_2 and c_3.
    """
    _check_pair(u, pair)
    if isinstance(constants, dict):
        constants = list(constants.values())
    by_which: dict[Which, ConstantResult] = {}
    for c in constants:
        if abs(c.p - p) > 1e-12:
            raise ValueError(f"constant {c.which.value} computed for p={c.p}, not p={p}")
        by_which[Which(c.which)] = c
    needed = [Which.CP] if p >= 2 else [Which.C1, Which.C2, Which.C3]
    missing = [w.value for w in needed if w not in by_which]
    if missing:
        raise ValueError(f"missing constants for p={p}: {missing}")

    dom = u.domain
    energy = p_energy(u, p)
    mass = pair.lambda1 * lp_integral(u, p)
    remainder = energy - mass
    scale = energy + mass
    xi, v, eta = extremal_deviation(u, pair.phi1)
    nxi = np.sqrt(np.sum(np.abs(xi) ** 2, axis=1))
    nv = np.sqrt(np.sum(np.abs(v) ** 2, axis=1))
    neta = np.sqrt(np.sum(np.abs(eta) ** 2, axis=1))
    report = BoundsReport(p, remainder, scale)
    slack = tol * scale

    def add(name, const, bound, lower):
        ok = remainder - bound >= -slack if lower else bound - remainder >= -slack
        report.checks.append(BoundCheck(name, const, remainder, bound, slack, bool(ok)))

    if p >= 2:
        c = by_which[Which.CP].value
        add("cp_lower", c, c * _orientation_integral(neta**p, dom), lower=True)
    else:
        with np.errstate(divide="ignore", invalid="ignore"):
            base = np.where(nxi + nv > 0, (nxi + nv) ** (p - 2), 0.0) * neta**2
            mixed = np.where(nv > 0, nv ** (p - 2) * neta**2, np.inf)
        weighted = _orientation_integral(base, dom)
        c1, c2, c3 = (by_which[w].value for w in (Which.C1, Which.C2, Which.C3))
        add("c1_lower", c1, c1 * weighted, lower=True)
        add("c2_upper", c2, c2 * weighted, lower=False)
        add("c3_lower", c3, c3 * _orientation_integral(np.minimum(neta**p, mixed), dom),
            lower=True)
    return report


def refinement_study(build, resolutions, p, eps=None):
    """Main-identity residuals along a refinement path.

    ``build(resolution)`` returns ``(u, phi)``; the result is a list of
    ``(h_max, IdentityReport)``.
    """
    out = []
    for res in resolutions:
        u, phi = build(res)
        report = verify_main_identity(u, phi, p, eps)
        out.append((max(u.domain.spacing), report))
    return out
