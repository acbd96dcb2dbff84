"""Pointwise C_p functional and the complex Picone-type identity."""

from __future__ import annotations

import numpy as np

from .grid import (
    GrushinDomain,
    ScalarField,
    grushin_gradient,
    gradient_magnitude,
)

__all__ = [
    "cp_eval",
    "picone_expanded",
    "cp_field",
    "rp_field",
    "picone_residual",
    "extremal_deviation",
]


def _check_p(p):
    if not p > 1:
        raise ValueError(f"p must be > 1, got {p}")


def _norm(v, axis):
    return np.sqrt(np.sum(np.abs(v) ** 2, axis=axis))


def _safe_pow(r, e):
    # r**e with the convention 0**e * 0 = 0 for negative e
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(r > 0, np.power(np.where(r > 0, r, 1.0), e), 0.0)
    return out


def cp_eval(xi, eta, p: float, axis: int = -1):
    """C_p(xi, eta) = |xi|^p - |xi-eta|^p - p |xi-eta|^{p-2} Re (xi-eta).conj(eta).

    Vectors run along ``axis``; any leading/trailing axes broadcast.
    """
    _check_p(p)
    xi = np.asarray(xi, dtype=complex)
    eta = np.asarray(eta, dtype=complex)
    v = xi - eta
    rv = _norm(v, axis)
    cross = np.sum(v * np.conj(eta), axis=axis).real
    return _norm(xi, axis) ** p - rv**p - p * _safe_pow(rv, p - 2) * cross


def picone_expanded(grad_u, u, grad_phi, phi, p: float, axis: int = -1):
    """Expanded algebraic form of C_p at xi = grad u, eta = grad u - (grad phi / phi) u.

    |grad u|^p + (p-1)|v|^p - p Re[|v|^{p-2} (u/phi)(grad phi . conj grad u)],
    with v = (grad phi / phi) u.
    """
    _check_p(p)
    grad_u = np.asarray(grad_u, dtype=complex)
    grad_phi = np.asarray(grad_phi, dtype=complex)
    ratio = np.expand_dims(np.asarray(u, dtype=complex) / np.asarray(phi, dtype=complex), axis)
    rv = _norm(grad_phi * ratio, axis)
    pair = np.sum(grad_phi * np.conj(grad_u), axis=axis)
    cross = (_safe_pow(rv, p - 2) * np.squeeze(ratio, axis) * pair).real
    return _norm(grad_u, axis) ** p + (p - 1) * rv**p - p * cross


def _require_nonvanishing(phi: ScalarField):
    if np.min(np.abs(phi.values)) == 0:
        raise ValueError("phi vanishes at an interior node")


def extremal_deviation(u: ScalarField, phi: ScalarField):
    """Return (xi, v, eta) component arrays, shape ``(2**n, n, *shape)``.

    xi = grad u, v = (grad phi / phi) u and eta = xi - v, per stencil orientation.
    """
    _require_nonvanishing(phi)
    xi = grushin_gradient(u).components
    v = grushin_gradient(phi).components * (u.values / phi.values)
    return xi, v, xi - v


def _orientation_mean(a, domain: GrushinDomain):
    return np.sum(a, axis=0) / 2**domain.n


def cp_field(u: ScalarField, phi: ScalarField, p: float) -> np.ndarray:
    """Per-node C_p(grad u, grad u - (grad phi/phi) u), averaged over stencils."""
    _check_p(p)
    xi, _, eta = extremal_deviation(u, phi)
    return _orientation_mean(cp_eval(xi, eta, p, axis=1), u.domain)


def rp_field(u: ScalarField, phi: ScalarField, p: float) -> np.ndarray:
    """Per-node R_p with the discrete gradient of |u|^p / (|phi|^{p-2} phi).

    The vector pairing is bilinear (no conjugation); the real part is taken last.
    """
    _check_p(p)
    _require_nonvanishing(phi)
    quotient = ScalarField(
        u.domain, np.abs(u.values) ** p / (np.abs(phi.values) ** (p - 2) * phi.values)
    )
    gu = grushin_gradient(u)
    gphi = grushin_gradient(phi)
    gq = grushin_gradient(quotient)
    flux = gphi.components * _safe_pow(gradient_magnitude(gphi), p - 2)[:, None]
    pairing = np.sum(gq.components * flux, axis=1).real
    r = gradient_magnitude(gu) ** p - pairing
    return _orientation_mean(r, u.domain)


def picone_residual(u: ScalarField, phi: ScalarField, p: float) -> float:
    """max over nodes and stencils of |C_p - expanded form| / local scale.

    The local scale is max(|xi|, |v|)^p (1 where both vanish), so the value is
    a relative residual of pure pointwise algebra.
    """
    _check_p(p)
    xi, v, eta = extremal_deviation(u, phi)
    gphi = grushin_gradient(phi).components
    lhs = cp_eval(xi, eta, p, axis=1)
    rhs = picone_expanded(xi, u.values[None], gphi, phi.values[None], p, axis=1)
    scale = np.maximum(_norm(xi, 1), _norm(v, 1)) ** p
    scale = np.where(scale > 0, scale, 1.0)
    return float(np.max(np.abs(lhs - rhs) / scale))
