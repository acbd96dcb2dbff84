"""
Doubly nonlinear porous-medium flow u_t = Delta_{gamma,p}(u^ell) + f(u) with
zero Dirichlet data, explicit time stepping, and the parameter certificates
for finite-time blow-up and for global existence with nonincreasing
int u^{ell+1}.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.integrate import IntegrationWarning, quad

from .grid import (
    GrushinDomain,
    ScalarField,
    default_eps,
    gradient_magnitude,
    grushin_gradient,
    p_energy,
    p_grushin,
)

log = logging.getLogger(__name__)

__all__ = [
    "Zero",
    "PowerLaw",
    "Tabulated",
    "PmeProblem",
    "PmeTrace",
    "Status",
    "CertificateReport",
    "StepRejected",
    "F_antiderivative",
    "F_field",
    "initial_J",
    "check_blowup_certificate",
    "check_global_certificate",
    "stable_dt",
    "step",
    "run",
]

STRUCTURAL_SAMPLES = 1000
STRUCTURAL_RANGE = 10.0


# sources f with f(0) = 0


@dataclass(frozen=True)
class Zero:
    def __call__(self, u):
        return np.zeros_like(np.asarray(u, dtype=float))


@dataclass(frozen=True)
class PowerLaw:
    q: float
    coef: float = 1.0

    def __post_init__(self):
        if not self.q >= 1:
            raise ValueError(f"PowerLaw needs q >= 1 for a locally Lipschitz source, got {self.q}")

    def __call__(self, u):
        return self.coef * np.power(np.asarray(u, dtype=float), self.q)


@dataclass(frozen=True)
class Tabulated:
    """Piecewise-linear f through (u_i, f_i); constant beyond the last node."""

    u_values: tuple[float, ...]
    f_values: tuple[float, ...]

    def __post_init__(self):
        u = np.asarray(self.u_values, dtype=float)
        fv = np.asarray(self.f_values, dtype=float)
        if u.ndim != 1 or u.shape != fv.shape or u.size < 2:
            raise ValueError("table needs matching 1-D arrays with at least two nodes")
        if u[0] != 0.0 or fv[0] != 0.0:
            raise ValueError("table must start at (0, 0) so that f(0) = 0")
        if np.any(np.diff(u) <= 0):
            raise ValueError("table abscissae must be strictly increasing")
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(fv))):
            raise ValueError("table entries must be finite")
        object.__setattr__(self, "u_values", tuple(map(float, u)))
        object.__setattr__(self, "f_values", tuple(map(float, fv)))

    def __call__(self, u):
        return np.interp(np.asarray(u, dtype=float), self.u_values, self.f_values)


class Status(str, Enum):
    BOUNDED = "BoundedToTmax"
    BLOWUP = "BlowUpDetected"
    INCONCLUSIVE = "Inconclusive"


@dataclass
class PmeProblem:
    domain: GrushinDomain
    p: float
    ell: float
    source: Zero | PowerLaw | Tabulated
    u0: ScalarField
    cert_params: tuple[float, float, float]
    lambda1: float
    eps: float | None = None

    def __post_init__(self):
        if not self.p > 1:
            raise ValueError(f"p must be > 1, got {self.p}")
        if not self.ell >= 1:
            raise ValueError(f"ell must be >= 1, got {self.ell}")
        if self.u0.domain != self.domain:
            raise ValueError("u0 lives on a different domain")
        vals = self.u0.values
        if np.any(np.abs(vals.imag) > 0) or np.any(vals.real < 0):
            raise ValueError("u0 must be real and nonnegative")
        if not self.lambda1 > 0:
            raise ValueError("lambda1 must be positive")
        if len(self.cert_params) != 3:
            raise ValueError("cert_params is (alpha, beta, theta)")
        self.cert_params = tuple(float(c) for c in self.cert_params)

    @property
    def alpha(self):
        return self.cert_params[0]

    @property
    def beta(self):
        return self.cert_params[1]

    @property
    def theta(self):
        return self.cert_params[2]

    def regularization(self) -> float | None:
        if self.p >= 2:
            return None
        if self.eps is not None:
            return self.eps
        return default_eps(ScalarField(self.domain, self.u0.values.real ** self.ell))


@dataclass
class PmeTrace:
    times: list[float] = field(default_factory=list)
    mass: list[float] = field(default_factory=list)
    J: list[float] = field(default_factory=list)
    E: list[float] = field(default_factory=list)
    sup_u: list[float] = field(default_factory=list)
    status: Status = Status.INCONCLUSIVE
    t_detect: float | None = None
    steps: int = 0
    rejections: int = 0
    max_clamp: float = 0.0

    def rows(self):
        return zip(self.times, self.mass, self.J, self.E, self.sup_u)


@dataclass
class CertificateReport:
    kind: str
    holds: bool
    sigma: float
    M: float
    Tstar_bound: float
    J0: float
    details: dict[str, bool]
    lambda1: float
    alpha: float
    beta: float
    theta: float
    sample_range: tuple[float, float]
    samples: int

    def as_text(self) -> str:
        lines = [f"[certificate {self.kind}]", f"holds = {self.holds}"]
        for key in ("sigma", "M", "Tstar_bound", "J0", "lambda1", "alpha", "beta", "theta"):
            lines.append(f"{key} = {getattr(self, key)!r}")
        lines.append(f"sample_range = {self.sample_range[0]!r},{self.sample_range[1]!r}")
        lines.append(f"samples = {self.samples}")
        for key, ok in self.details.items():
            lines.append(f"check.{key} = {ok}")
        return "\n".join(lines) + "\n"


class StepRejected(RuntimeError):
    pass


def _prefactor(problem):
    return problem.p * problem.ell / (problem.ell + 1.0)


def F_antiderivative(v: float, problem: PmeProblem) -> float:
    """F(v) = (p ell/(ell+1)) int_0^v s^{ell-1} f(s) ds."""
    v = float(v)
    if v < 0 or not math.isfinite(v):
        raise ValueError(f"F is defined for finite v >= 0, got {v}")
    src, ell = problem.source, problem.ell
    if isinstance(src, Zero) or v == 0:
        return 0.0
    if isinstance(src, PowerLaw):
        return _prefactor(problem) * src.coef * v ** (src.q + ell) / (src.q + ell)
    # breakpoints at every knot make quad crawl on fine tables; the kinks of a
    # fine interpolant are mild enough for plain adaptive bisection
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IntegrationWarning)
        val, _ = quad(lambda s: s ** (ell - 1) * float(src(s)), 0.0, v,
                      limit=2000, epsabs=0.0, epsrel=1e-10)
    return _prefactor(problem) * val


def _segment_integral(a, b, f_a, slope, ell):
    # int_a^b s^{ell-1} (f_a + slope (s - a)) ds
    c0 = f_a - slope * a
    return c0 * (b**ell - a**ell) / ell + slope * (b ** (ell + 1) - a ** (ell + 1)) / (ell + 1)


def F_field(values, problem: PmeProblem) -> np.ndarray:
    """Vectorised F on an array; tabulated sources use the exact piecewise integral."""
    v = np.asarray(values, dtype=float)
    if np.any(v < 0):
        raise ValueError("F is defined for v >= 0")
    src, ell = problem.source, problem.ell
    if isinstance(src, Zero):
        return np.zeros_like(v)
    if isinstance(src, PowerLaw):
        return _prefactor(problem) * src.coef * v ** (src.q + ell) / (src.q + ell)
    u = np.asarray(src.u_values)
    fv = np.asarray(src.f_values)
    slopes = np.diff(fv) / np.diff(u)
    cum = np.concatenate([[0.0], np.cumsum(_segment_integral(u[:-1], u[1:], fv[:-1], slopes, ell))])
    idx = np.clip(np.searchsorted(u, v, side="right") - 1, 0, u.size - 1)
    slope_at = np.where(idx < u.size - 1, slopes[np.minimum(idx, u.size - 2)], 0.0)
    partial = _segment_integral(u[idx], v, fv[idx], slope_at, ell)
    return _prefactor(problem) * (cum[idx] + partial)


def _J(u, problem, eps=None):
    dom = problem.domain
    w = ScalarField(dom, u**problem.ell)
    energy = p_energy(w, problem.p)
    return (-energy / (problem.ell + 1.0)
            + dom.cell_volume * float(np.sum(F_field(u, problem) - problem.theta)))


def initial_J(problem: PmeProblem) -> float:
    """J0 = -(1/(ell+1)) int |grad u0^ell|^p + int (F(u0) - theta)."""
    return _J(problem.u0.values.real, problem)


def _mass(u, problem):
    return problem.domain.cell_volume * float(np.sum(u ** (problem.ell + 1)))


def _structural_samples(problem):
    top = STRUCTURAL_RANGE * float(problem.u0.values.real.max())
    s = np.linspace(0.0, top, STRUCTURAL_SAMPLES)
    a, b, th = problem.cert_params
    lhs = a * F_field(s, problem)
    rhs = s**problem.ell * problem.source(s) + b * s ** (problem.p * problem.ell) + a * th
    scale = np.abs(lhs) + np.abs(rhs) + 1.0
    return s, lhs, rhs, scale, (0.0, top)


def _report(kind, holds, details, problem, J0, sigma=math.nan, M=math.nan, T=math.nan):
    a, b, th = problem.cert_params
    return CertificateReport(kind, bool(holds), sigma, M, T, J0, details, problem.lambda1,
                             a, b, th, (0.0, STRUCTURAL_RANGE * float(problem.u0.values.real.max())),
                             STRUCTURAL_SAMPLES)


def check_blowup_certificate(problem: PmeProblem) -> CertificateReport:
    """Conditions for blow-up: alpha F <= u^ell f + beta u^{p ell} + alpha theta,
    alpha > ell + 1, 0 < beta <= lambda1 (alpha - ell - 1)/(ell + 1), J0 > 0."""
    p, ell = problem.p, problem.ell
    a, b, th = problem.cert_params
    _, lhs, rhs, scale, _ = _structural_samples(problem)
    J0 = initial_J(problem)
    details = {
        "structural": bool(np.all(lhs <= rhs + 1e-12 * scale)),
        "alpha_gt_ell_plus_1": a > ell + 1,
        "beta_positive": b > 0,
        "beta_window": b <= problem.lambda1 * (a - ell - 1) / (ell + 1),
        "theta_nonnegative": th >= 0,
        "J0_positive": J0 > 0,
    }
    holds = all(details.values())
    if not holds:
        return _report("BlowUp", False, details, problem, J0)
    sigma = math.sqrt(p * ell * a) / (ell + 1) - 1
    details["sigma_positive"] = sigma > 0
    if sigma <= 0:
        return _report("BlowUp", False, details, problem, J0, sigma)
    m0 = _mass(problem.u0.values.real, problem)
    M = (1 + sigma) * (1 + 1 / sigma) * m0**2 / (a * (ell + 1) * J0)
    return _report("BlowUp", True, details, problem, J0, sigma, M, M / (sigma * m0))


def check_global_certificate(problem: PmeProblem) -> CertificateReport:
    """Conditions for global existence with nonincreasing int u^{ell+1}:
    alpha F >= u^ell f + beta u^{p ell} + alpha theta, theta >= 0, alpha <= 0,
    beta >= lambda1 (alpha - ell - 1)/(ell + 1), J0 > 0."""
    ell = problem.ell
    a, b, th = problem.cert_params
    _, lhs, rhs, scale, _ = _structural_samples(problem)
    J0 = initial_J(problem)
    details = {
        "structural": bool(np.all(lhs >= rhs - 1e-12 * scale)),
        "theta_nonnegative": th >= 0,
        "alpha_nonpositive": a <= 0,
        "beta_window": b >= problem.lambda1 * (a - ell - 1) / (ell + 1),
        "J0_positive": J0 > 0,
    }
    return _report("Global", all(details.values()), details, problem, J0)


def stable_dt(u: np.ndarray, problem: PmeProblem, cfl: float = 0.2) -> float:
    """Explicit stability estimate plus a cap on the relative source growth per step."""
    dom, p, ell = problem.domain, problem.p, problem.ell
    h = min(dom.spacing)
    eps = problem.regularization() or 0.0
    umax = float(u.max()) if u.size else 0.0
    mag = gradient_magnitude(grushin_gradient(ScalarField(dom, u**ell)))
    grad_factor = float(np.max((mag + eps) ** (p - 2))) if p != 2 else 1.0
    if not math.isfinite(grad_factor):
        grad_factor = 1e300
    weight = max(1.0, float(np.max(dom.y_weight)) ** 2)
    coeff = max(1.0, p - 1) * ell * max(umax, 0.0) ** (ell - 1) * grad_factor * dom.n * weight
    dt = cfl * h**2 / (1.0 + coeff)
    pos = u > 0
    if np.any(pos):
        rate = float(np.max(np.abs(problem.source(u[pos])) / u[pos]))
        if rate > 0:
            dt = min(dt, 0.1 / rate)
    return dt


def _rhs(u, problem, eps):
    w = ScalarField(problem.domain, u**problem.ell)
    return p_grushin(w, problem.p, eps).values.real + problem.source(u)


def step(u: ScalarField, dt: float, problem: PmeProblem) -> ScalarField:
    """Forward Euler step with negative parts clamped to zero."""
    new, _ = _step_values(u.values.real, dt, problem, problem.regularization())
    return ScalarField(problem.domain, new)


def _step_values(u, dt, problem, eps):
    if not dt > 0:
        raise ValueError("dt must be positive")
    with np.errstate(over="ignore", invalid="ignore"):
        new = u + dt * _rhs(u, problem, eps)
    if not np.all(np.isfinite(new)):
        raise StepRejected("non-finite values after the update")
    clamp = float(-new.min()) if new.min() < 0 else 0.0
    return np.maximum(new, 0.0), clamp


def run(problem: PmeProblem, t_max: float, blowup_threshold: float | None = None,
        max_steps: int = 1_000_000, record_every: int = 1,
        certificate: CertificateReport | None = None) -> PmeTrace:
    """Integrate to ``t_max`` or until blow-up is detected.

    ``blowup_threshold`` defaults to 1e6 sup u0.  When a holding blow-up
    certificate is passed, E(t) includes its M.
    """
    if not t_max > 0:
        raise ValueError("t_max must be positive")
    u = problem.u0.values.real.copy()
    if blowup_threshold is None:
        blowup_threshold = 1e6 * float(u.max())
    eps = problem.regularization()
    M = certificate.M if certificate is not None and certificate.kind == "BlowUp" and certificate.holds else 0.0
    trace = PmeTrace()
    t, integral = 0.0, 0.0
    mass = _mass(u, problem)

    def record():
        trace.times.append(t)
        trace.mass.append(mass)
        trace.J.append(_J(u, problem, eps))
        trace.E.append(integral + M)
        trace.sup_u.append(float(u.max()))

    record()
    dt_floor = 1e-14
    while trace.steps < max_steps:
        if t >= t_max:
            trace.status = Status.BOUNDED
            break
        dt = min(stable_dt(u, problem), t_max - t)
        while True:
            try:
                new, clamp = _step_values(u, dt, problem, eps)
                break
            except StepRejected:
                trace.rejections += 1
                dt *= 0.5
                if dt < dt_floor:
                    break
        if dt < dt_floor:
            trace.status, trace.t_detect = Status.BLOWUP, t
            break
        new_mass = _mass(new, problem)
        integral += 0.5 * dt * (mass + new_mass)
        u, mass, t = new, new_mass, (t_max if t_max - t <= dt else t + dt)
        trace.max_clamp = max(trace.max_clamp, clamp)
        trace.steps += 1
        sup = float(u.max())
        if sup > blowup_threshold:
            record()
            trace.status, trace.t_detect = Status.BLOWUP, t
            break
        if trace.steps % record_every == 0 or t >= t_max:
            record()
    else:
        trace.status = Status.INCONCLUSIVE
    log.info("pme run: status=%s steps=%d t=%.6g", trace.status.value, trace.steps, t)
    return trace
