"""First Dirichlet eigenpair of -Delta_{gamma,p} by Rayleigh-quotient descent."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse.linalg as spla

from .grid import (
    GrushinDomain,
    ScalarField,
    default_eps,
    gradient_magnitude,
    grushin_gradient,
    grushin_matrix,
    p_energy,
    p_grushin,
    product_of_sines,
)

log = logging.getLogger(__name__)

__all__ = [
    "SolverConfig",
    "EigenPair",
    "NonConvergence",
    "DegenerateInput",
    "rayleigh_quotient",
    "lp_integral",
    "eigen_residual",
    "solve_first_eigenpair",
]


class NonConvergence(RuntimeError):
    def __init__(self, pair):
        super().__init__(
            f"iteration cap hit after {pair.iterations} steps (lambda1={pair.lambda1:.10g})"
        )
        self.pair = pair


class DegenerateInput(ValueError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    p: float
    max_iterations: int = 5000
    tolerance: float = 1e-12
    shrink: float = 0.5
    sufficient_decrease: float = 1e-4
    initial_guess: ScalarField | None = None
    eps_regularization: float | None = None
    random_restarts: int = 0
    seed: int = 0

    def __post_init__(self):
        if not self.p > 1:
            raise ValueError(f"p must be > 1, got {self.p}")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not 0 < self.shrink < 1:
            raise ValueError("shrink must lie in (0, 1)")


@dataclass
class EigenPair:
    lambda1: float
    phi1: ScalarField
    residual: float
    iterations: int
    converged: bool = True
    history: list | None = None

    @property
    def min_phi(self) -> float:
        return float(self.phi1.values.real.min())


def lp_integral(u: ScalarField, p: float) -> float:
    return float(u.domain.cell_volume * np.sum(np.abs(u.values) ** p))


def rayleigh_quotient(u: ScalarField, p: float) -> float:
    denom = lp_integral(u, p)
    if denom == 0:
        raise DegenerateInput("Rayleigh quotient of the zero field")
    return p_energy(u, p) / denom


def eigen_residual(phi: ScalarField, lam: float, p: float, eps=None) -> float:
    """Quadrature L2 norm of Delta_{gamma,p} phi + lam |phi|^{p-2} phi."""
    r = p_grushin(phi, p, eps).values + lam * np.abs(phi.values) ** (p - 2) * phi.values
    return float(np.sqrt(phi.domain.cell_volume * np.sum(np.abs(r) ** 2)))


def _normalize(vals, p, cell):
    return vals / (cell * np.sum(np.abs(vals) ** p)) ** (1.0 / p)


def _preconditioner(field, p, base_solve):
    """Inverse of -div(omega grad) with omega = (p-1)|grad u|^{p-2}, floored."""
    if p == 2:
        return base_solve
    mag = gradient_magnitude(grushin_gradient(field))
    floor = 1e-3 * mag.max()
    omega = (p - 1) * np.maximum(mag, floor) ** (p - 2)
    return spla.factorized(grushin_matrix(field.domain, omega).tocsc())


def _descend(domain, cfg, u0, base_solve, eps):
    p = cfg.p
    cell = domain.cell_volume
    u = _normalize(np.abs(u0.real), p, cell)
    field = ScalarField(domain, u)
    R = p_energy(field, p)
    history = [R]
    step = 1.0
    converged = False
    it = 0
    while it < cfg.max_iterations:
        it += 1
        # L2 gradient of E/N at N = 1: -p Delta_p u - p R u^{p-1}
        g = -p * p_grushin(field, p, eps).values.real - p * R * np.abs(u) ** (p - 1)
        solve = _preconditioner(field, p, base_solve)
        d = -solve(g.ravel()).reshape(domain.shape)
        slope = cell * np.sum(g * d)
        if slope >= 0:
            d, slope = -g, -cell * np.sum(g * g)
        def trial_at(alpha):
            trial = np.abs(u + alpha * d)
            norm = cell * np.sum(trial**p)
            if not norm > 0:
                return None, np.inf
            trial = trial / norm ** (1.0 / p)
            return trial, p_energy(ScalarField(domain, trial), p)

        alpha = min(2.0 * step, 1e6)
        trial, R_trial = trial_at(alpha)
        first_try = True
        while not R_trial <= R + cfg.sufficient_decrease * alpha * slope:
            first_try = False
            alpha *= cfg.shrink
            if alpha < 1e-16:
                break
            trial, R_trial = trial_at(alpha)
        if not R_trial < R:
            converged = True
            break
        # greedy: keep moving the step while the quotient still drops
        factor = 1.0 / cfg.shrink if first_try else cfg.shrink
        while 1e-16 < alpha * factor < 1e6:
            t2, R2 = trial_at(alpha * factor)
            if not R2 < R_trial:
                break
            alpha, trial, R_trial = alpha * factor, t2, R2
        tf = ScalarField(domain, trial)
        change = (R - R_trial) / R
        u, field, R, step = trial, tf, R_trial, alpha
        history.append(R)
        if change < cfg.tolerance:
            converged = True
            break
    return u, R, it, converged, history


def solve_first_eigenpair(domain: GrushinDomain, config: SolverConfig,
                          raise_on_failure: bool = False) -> EigenPair:
    """Minimise int |grad u|^p over int |u|^p = 1 with nonnegative iterates.

    The descent direction is the gradient preconditioned by the inverse of the
    discrete p = 2 Grushin operator (a Sobolev gradient); steps are accepted
    by backtracking with a sufficient-decrease test, so the Rayleigh quotient
    sequence is nonincreasing.  The returned lambda1 equals RQ(phi1).
    """
    p = config.p
    if config.initial_guess is not None:
        u0 = config.initial_guess.values
        if not np.any(np.abs(u0) > 0):
            raise DegenerateInput("initial guess is identically zero")
    else:
        u0 = product_of_sines(domain).values
    eps = config.eps_regularization
    if eps is None and p < 2:
        eps = default_eps(ScalarField(domain, _normalize(np.abs(u0), p, domain.cell_volume)))
    solve = spla.factorized(grushin_matrix(domain).tocsc())

    starts = [u0]
    rng = np.random.default_rng(config.seed)
    for _ in range(config.random_restarts):
        bump = product_of_sines(domain).values.real
        starts.append(bump * (1.0 + 0.5 * rng.random(domain.shape)))
    best = None
    for start in starts:
        out = _descend(domain, config, np.asarray(start), solve, eps)
        if best is None or out[1] < best[1]:
            best = out
    u, _, iterations, converged, history = best
    phi = ScalarField(domain, u)
    lam = rayleigh_quotient(phi, p)
    pair = EigenPair(lam, phi, eigen_residual(phi, lam, p, eps), iterations, converged, history)
    log.info("lambda1=%.12g residual=%.3g iterations=%d", lam, pair.residual, iterations)
    if not converged and raise_on_failure:
        raise NonConvergence(pair)
    return pair
