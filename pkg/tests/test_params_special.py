import mpmath
import numpy as np
import pytest
from scipy.special import roots_jacobi

from sobstab import DomainError, make_params
from sobstab.params_special import (harmonic_multiplicity, jacobi_basis, jacobi_operator,
                                    printed_multiplicity, sector_eigen, sigma, sphere_area, tau)

MATRIX = [(1, 2), (1.5, 2), (2, 3), (3.7, 2), (2, 4)]


@pytest.mark.parametrize("m,n", [(1, 3), (2, 2)])
def test_exponents_four_dimensional(m, n):
    p = make_params(m, n)
    assert p.two_star == 4 and p.gamma == 1


def test_exponent_identity_exact():
    for m, n in [(0.3, 2), (1.7, 5), (3.25, 3)]:
        p = make_params(m, n)
        assert p.gamma_exact * (p.two_star_exact - 2) == 2


@pytest.mark.parametrize("m,n", [(0, 2), (-1, 3), (1, 1), (1, 2.5), (0.5, 1)])
def test_invalid_params(m, n):
    with pytest.raises(DomainError):
        make_params(m, n)


def test_sphere_area_examples():
    assert sphere_area(2) == pytest.approx(2 * np.pi, rel=1e-14)
    assert sphere_area(1) == pytest.approx(2.0, rel=1e-14)
    # the quoted 9.2281 is a rounded figure; the exact value is 9.22882...
    assert sphere_area(2.5) == pytest.approx(9.2281, abs=1e-3)
    assert sphere_area(2.5) == pytest.approx(9.228821642162, rel=1e-12)
    with pytest.raises(DomainError):
        sphere_area(0)


def test_sphere_area_against_mpmath():
    mpmath.mp.dps = 30
    for d in np.arange(0.5, 10.01, 0.5):
        ref = 2 * mpmath.pi ** (mpmath.mpf(d) / 2) / mpmath.gamma(mpmath.mpf(d) / 2)
        assert sphere_area(float(d)) == pytest.approx(float(ref), rel=1e-12)


@pytest.mark.parametrize("a,b", [(0.0, 0.0), (0.5, -0.25), (-0.5, 0.85), (1.0, 2.0)])
def test_gauss_jacobi_matches_scipy(a, b):
    J = 12
    basis = jacobi_basis(J, a, b)
    x, w = roots_jacobi(J, a, b)
    assert np.allclose(basis.nodes, x, atol=1e-13)
    assert np.allclose(basis.weights, w, rtol=1e-11)


@pytest.mark.parametrize("m,n", MATRIX)
def test_jacobi_orthonormal_with_independent_rule(m, n):
    p = make_params(m, n)
    a, b = p.jacobi_ab
    J = 16
    basis = jacobi_basis(J, a, b)
    x, w = roots_jacobi(4 * J, a, b)
    P = basis.eval(x)
    G = P.T @ (w[:, None] * P)
    assert np.max(np.abs(G - np.eye(J))) < 1e-12
    # p_0 is the normalized constant
    assert np.allclose(P[:, 0], P[0, 0])


@pytest.mark.parametrize("m,n", MATRIX)
def test_jacobi_eigen_residual(m, n):
    p = make_params(m, n)
    a, b = p.jacobi_ab
    J = 12
    basis = jacobi_basis(J, a, b)
    v = np.linspace(-0.99, 0.99, 41)
    P, D1, D2 = (basis.eval(v, k) for k in range(3))
    res = jacobi_operator(p, P, D1, D2, v) - P * sigma(p, np.arange(J))[None, :]
    assert np.max(np.abs(res)) < 1e-8


def test_jacobi_derivatives_by_finite_difference():
    basis = jacobi_basis(8, 0.3, -0.4)
    v = np.linspace(-0.9, 0.9, 7)
    h = 1e-5
    fd = (basis.eval(v + h) - basis.eval(v - h)) / (2 * h)
    assert np.allclose(basis.eval(v, 1), fd, atol=1e-6)


def test_jacobi_invalid():
    with pytest.raises(DomainError):
        jacobi_basis(0, 0, 0)
    with pytest.raises(DomainError):
        jacobi_basis(4, -1, 0)


def test_jacobi_high_order_finite():
    basis = jacobi_basis(128, 0.5, 0.5)
    assert np.all(np.isfinite(basis.eval(np.linspace(-1, 1, 11))))


def test_sector_eigen_examples():
    p = make_params(2, 2)
    e = sector_eigen(p, 1, 0)
    assert (e.sigma_j, e.tau_l, e.mult_l) == (8, 0, 1)
    e = sector_eigen(p, 0, 0)
    assert (e.sigma_j, e.tau_l, e.mult_l) == (0, 0, 1)
    e = sector_eigen(make_params(1, 3), 0, 2)
    assert e.tau_l == 6 and e.mult_l == 5
    with pytest.raises(DomainError):
        sector_eigen(p, -1, 0)


def test_multiplicity_by_enumeration():
    # count harmonic polynomials: dim of degree-l homogeneous minus degree l-2
    from math import comb
    for n in (2, 3, 4, 5):
        for l in range(6):
            homog = comb(n + l - 1, n - 1)
            lower = comb(n + l - 3, n - 1) if l >= 2 else 0
            assert harmonic_multiplicity(n, l) == homog - lower
    assert harmonic_multiplicity(3, 1) == 3
    assert printed_multiplicity(3, 1) == 2
    assert printed_multiplicity(3, 2) == 3


def test_sigma_tau_increasing():
    for m, n in MATRIX:
        p = make_params(m, n)
        s = sigma(p, np.arange(20))
        t = tau(p, np.arange(20))
        assert np.all(s >= 0) and np.all(np.diff(s) > 0)
        assert np.all(t >= 0) and np.all(np.diff(t) > 0)
