import math

import numpy as np
import pytest
import scipy.special
from hypothesis import given, settings, strategies as st

from sphdvr import (
    AngularBasis,
    build_couplings,
    channel_index,
    spherical_harmonic,
    z_couplings_closed_form,
)
from sphdvr.angular import angular_quadrature, coeff_a, coeff_b, coeff_c


def test_channel_index_listing():
    assert channel_index(0, 0) == 0
    assert channel_index(2, -2) == 4
    for lm in range(6):
        assert channel_index(lm, lm) == (lm + 1) ** 2 - 1
    seen = [channel_index(l, m) for l in range(5) for m in range(-l, l + 1)]
    assert seen == list(range(25))
    with pytest.raises(ValueError):
        channel_index(1, 2)


def test_basis_layouts():
    b = AngularBasis(3)
    assert b.n_channels == 16 and b.index(2, 1) == channel_index(2, 1)
    r = AngularBasis(3, m_restriction=1)
    assert r.channels == ((1, 1), (2, 1), (3, 1))
    assert r.index(3, 1) == 2
    with pytest.raises(ValueError):
        r.index(2, 0)
    with pytest.raises(ValueError):
        AngularBasis(2, m_restriction=3)


def test_coefficients():
    assert coeff_a(0, 0) == pytest.approx(1 / math.sqrt(3), abs=1e-15)
    assert coeff_c(1, 0) == pytest.approx(math.sqrt(2))
    assert coeff_a(-1, 0) == 0.0 and coeff_b(-1, 0) == 0.0
    assert coeff_b(0, 0) == pytest.approx(math.sqrt(2 / 3))


def sph_oracle(l, m, theta, phi):
    return scipy.special.sph_harm_y(l, m, theta, phi)


def test_a_matches_cos_theta_matrix_element():
    theta, phi, w = angular_quadrature(30, 61)
    for l in range(8):
        for m in (-l, l):
            ref = np.sum(w * np.conj(sph_oracle(l + 1, m, theta, phi)) * np.cos(theta)
                         * sph_oracle(l, m, theta, phi))
            assert abs(ref - coeff_a(l, m)) <= 1e-12


def test_harmonic_small_cases():
    assert spherical_harmonic(0, 0, 0.3, 1.1) == pytest.approx(1 / math.sqrt(4 * math.pi))
    th = np.linspace(0.1, 3.0, 7)
    np.testing.assert_allclose(spherical_harmonic(1, 0, th, 0.4),
                               math.sqrt(3 / (4 * math.pi)) * np.cos(th), atol=1e-15)
    with pytest.raises(ValueError):
        spherical_harmonic(1, 2, 0.1, 0.1)


@settings(max_examples=60)
@given(st.integers(0, 12), st.data(), st.floats(0, math.pi), st.floats(0, 2 * math.pi))
def test_harmonic_matches_scipy(l, data, theta, phi):
    m = data.draw(st.integers(-l, l))
    assert abs(spherical_harmonic(l, m, theta, phi) - sph_oracle(l, m, theta, phi)) <= 1e-12


@settings(max_examples=30)
@given(st.integers(0, 8), st.floats(0, math.pi), st.floats(0, 2 * math.pi))
def test_addition_theorem(l, theta, phi):
    s = sum(abs(spherical_harmonic(l, m, theta, phi)) ** 2 for m in range(-l, l + 1))
    assert s == pytest.approx((2 * l + 1) / (4 * math.pi), abs=1e-12)


def test_orthonormality_under_product_quadrature():
    l_max = 6
    theta, phi, w = angular_quadrature(l_max + 2, 2 * l_max + 3)
    basis = AngularBasis(l_max)
    Y = np.array([spherical_harmonic(l, m, theta, phi) for l, m in basis.channels])
    gram = (np.conj(Y) * w) @ Y.T
    np.testing.assert_allclose(gram, np.eye(basis.n_channels), atol=1e-12)


def test_z_examples():
    c = build_couplings(AngularBasis(1), "z")
    i0, i1 = channel_index(0, 0), channel_index(1, 0)
    assert c.alpha[i0, i1] == pytest.approx(1 / math.sqrt(3), abs=1e-15)
    assert c.beta[i0, i1] == pytest.approx(2 / math.sqrt(3), abs=1e-14)


@pytest.mark.parametrize("l_max", [0, 1, 4, 10])
def test_z_closed_form(l_max):
    basis = AngularBasis(l_max)
    c = build_couplings(basis, "z")
    a, b = z_couplings_closed_form(basis)
    assert np.max(np.abs(c.alpha - a)) <= 1e-12
    assert np.max(np.abs(c.beta - b)) <= 1e-12


@pytest.mark.parametrize("axis", ["x", "y", "z"])
@pytest.mark.parametrize("l_max", [1, 5, 10])
def test_hermiticity_and_selection_rules(axis, l_max):
    basis = AngularBasis(l_max)
    c = build_couplings(basis, axis)
    assert np.max(np.abs(c.alpha - c.alpha.conj().T)) <= 1e-12
    assert np.max(np.abs(c.beta_minus_alpha + c.beta_minus_alpha.conj().T)) <= 1e-12
    for I, (l, m) in enumerate(basis.channels):
        for J, (lp, mp) in enumerate(basis.channels):
            allowed = abs(l - lp) == 1 and (mp == m if axis == "z" else abs(mp - m) == 1)
            if not allowed:
                assert abs(c.alpha[I, J]) <= 1e-13 and abs(c.beta[I, J]) <= 1e-13


def fd_oracle_beta(axis, l_max, h=1e-5):
    """beta^K from scipy harmonics and finite-difference angular derivatives."""
    theta, phi, w = angular_quadrature(l_max + 8, 2 * l_max + 9)
    basis = AngularBasis(l_max)
    st_, ct = np.sin(theta), np.cos(theta)
    sp, cp = np.sin(phi), np.cos(phi)
    n = basis.n_channels
    out = np.zeros((n, n), dtype=complex)
    for J, (l, m) in enumerate(basis.channels):
        dth = (sph_oracle(l, m, theta + h, phi) - sph_oracle(l, m, theta - h, phi)) / (2 * h)
        dph = (sph_oracle(l, m, theta, phi + h) - sph_oracle(l, m, theta, phi - h)) / (2 * h)
        if axis == "x":
            op = -sp / st_ * dph + cp * ct * dth
        elif axis == "y":
            op = cp / st_ * dph + sp * ct * dth
        else:
            op = -st_ * dth
        for I, (lb, mb) in enumerate(basis.channels):
            out[I, J] = np.sum(w * np.conj(sph_oracle(lb, mb, theta, phi)) * op)
    return out


@pytest.mark.parametrize("axis", ["x", "y", "z"])
def test_beta_against_finite_difference_oracle(axis):
    c = build_couplings(AngularBasis(3), axis)
    np.testing.assert_allclose(c.beta, fd_oracle_beta(axis, 3), atol=1e-8)


@pytest.mark.parametrize("axis", ["x", "y"])
def test_alpha_against_scipy_quadrature(axis):
    l_max = 4
    theta, phi, w = angular_quadrature(20, 41)
    basis = AngularBasis(l_max)
    f = np.cos(phi) * np.sin(theta) if axis == "x" else np.sin(phi) * np.sin(theta)
    Y = np.array([sph_oracle(l, m, theta, phi) for l, m in basis.channels])
    ref = (np.conj(Y) * w) @ (f * Y).T
    np.testing.assert_allclose(build_couplings(basis, axis).alpha, ref, atol=1e-13)


def test_quadrature_size_is_enough():
    basis = AngularBasis(5)
    lo = build_couplings(basis, "x")
    hi = build_couplings(basis, "x", n_theta=15, n_phi=31)
    np.testing.assert_allclose(lo.alpha, hi.alpha, atol=1e-13)
    np.testing.assert_allclose(lo.beta_minus_alpha, hi.beta_minus_alpha, atol=1e-13)
    with pytest.raises(ValueError):
        build_couplings(basis, "x", n_theta=5)


def test_restricted_basis_matches_full_block():
    full = build_couplings(AngularBasis(6), "z")
    sub = build_couplings(AngularBasis(6, m_restriction=0), "z")
    idx = [channel_index(l, 0) for l in range(7)]
    np.testing.assert_allclose(sub.alpha, full.alpha[np.ix_(idx, idx)], atol=1e-15)
    np.testing.assert_allclose(sub.beta_minus_alpha, full.beta_minus_alpha[np.ix_(idx, idx)],
                               atol=1e-15)
    with pytest.raises(ValueError):
        build_couplings(AngularBasis(2, m_restriction=0), "x")


def test_matrices_read_only():
    c = build_couplings(AngularBasis(1), "z")
    with pytest.raises(ValueError):
        c.alpha[0, 0] = 1.0
