import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from grushinlab.grid import GrushinDomain, ScalarField, integrate_real, product_of_sines
from grushinlab.identities import phi_family, random_smooth_field
from grushinlab.picone import (
    cp_eval,
    cp_field,
    extremal_deviation,
    picone_expanded,
    picone_residual,
    rp_field,
)


def complex_vectors(rng, n, dim=3, scale=1.0):
    return scale * (rng.normal(size=(n, dim)) + 1j * rng.normal(size=(n, dim)))


def test_p2_closed_form(rng):
    xi, eta = complex_vectors(rng, 1000), complex_vectors(rng, 1000)
    val = cp_eval(xi, eta, 2.0)
    expected = np.sum(np.abs(eta) ** 2, axis=-1)
    assert np.allclose(val, expected, rtol=1e-12, atol=0)


def test_vanishes_at_eta_zero(rng):
    xi = complex_vectors(rng, 100)
    for p in (1.2, 2.0, 3.5):
        assert np.max(np.abs(cp_eval(xi, np.zeros_like(xi), p))) < 1e-12 * np.max(np.abs(xi)) ** p


def test_eta_equal_xi_gives_norm(rng):
    # v = 0 and the 0^{p-2} * 0 convention keeps p < 2 finite
    xi = complex_vectors(rng, 50)
    for p in (1.3, 2.0, 4.0):
        assert np.allclose(cp_eval(xi, xi, p), np.linalg.norm(xi, axis=-1) ** p)


@settings(max_examples=200, deadline=None)
@given(p=st.floats(1.05, 6.0), seed=st.integers(0, 2**32 - 1),
       log_scale=st.floats(-3, 3))
def test_nonnegative(p, seed, log_scale):
    rng = np.random.default_rng(seed)
    xi = complex_vectors(rng, 64, scale=10**log_scale)
    eta = complex_vectors(rng, 64, scale=10 ** (log_scale + rng.uniform(-2, 2)))
    scale = np.maximum(np.linalg.norm(xi, axis=-1), np.linalg.norm(xi - eta, axis=-1)) ** p
    assert np.all(cp_eval(xi, eta, p) >= -1e-12 * scale)


def test_strictly_positive_away_from_zero(rng):
    for p in (1.2, 1.5, 2.0, 3.0, 4.7):
        xi = complex_vectors(rng, 5000)
        xi *= np.minimum(1.0, 10 / np.linalg.norm(xi, axis=-1))[:, None]
        eta = complex_vectors(rng, 5000)
        eta *= (0.1 + 3 * rng.random(5000))[:, None] / np.linalg.norm(eta, axis=-1)[:, None]
        assert np.all(cp_eval(xi, eta, p) > 0)


@pytest.mark.parametrize("p", [1.2, 1.5, 2.0, 3.0, 4.7])
def test_expanded_form_pointwise(rng, p):
    n = 2000
    grad_u, grad_phi = complex_vectors(rng, n), complex_vectors(rng, n)
    u = rng.normal(size=n) + 1j * rng.normal(size=n)
    phi = rng.normal(size=n) + 1j * rng.normal(size=n)
    eta = grad_u - grad_phi * (u / phi)[:, None]
    lhs = cp_eval(grad_u, eta, p)
    rhs = picone_expanded(grad_u, u, grad_phi, phi, p)
    scale = np.maximum(np.linalg.norm(grad_u, axis=-1),
                       np.linalg.norm(grad_phi * (u / phi)[:, None], axis=-1)) ** p
    assert np.max(np.abs(lhs - rhs) / scale) <= 1e-11


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_grid_picone_residual(rng, p):
    dom = GrushinDomain.box(gamma=1.0, extents=[(-1, 1), (0, 1)], grid=16)
    u = random_smooth_field(dom, rng)
    assert picone_residual(u, phi_family(dom, "complex"), p) <= 1e-11


def test_rp_integrates_to_cp(rng):
    # the divergence structure: both densities have the same integral up to O(h^2)
    dom = GrushinDomain.box(grid=64)
    u = random_smooth_field(dom, rng)
    phi = phi_family(dom, "cosine")
    a = integrate_real(cp_field(u, phi, 3.0), dom)
    b = integrate_real(rp_field(u, phi, 3.0), dom)
    assert b == pytest.approx(a, rel=2e-2)


def test_deviation_vanishes_for_multiples():
    dom = GrushinDomain.box(grid=12)
    phi = product_of_sines(dom)
    _, _, eta = extremal_deviation(phi * (2 - 1j), phi)
    assert np.max(np.abs(eta)) < 1e-12


def test_invalid_inputs():
    dom = GrushinDomain.box(grid=4)
    u = product_of_sines(dom)
    with pytest.raises(ValueError):
        cp_eval(np.ones(2), np.ones(2), 1.0)
    with pytest.raises(ValueError):
        cp_field(u, ScalarField.zeros(dom), 2.0)
