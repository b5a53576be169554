import numpy as np
import pytest
from scipy.special import gamma as G

from sobstab import DomainError, NullField, UnsupportedField, make_params
from sobstab.acceptance import talenti_constant
from sobstab.cctools import dilate, spectral_perturbation
from sobstab.extremals import (ExtremalCoords, bliss_constant, bliss_profile, bliss_ratio, deficit,
                               distance_to_manifold, el_grid, el_residual, extremal_field)
from sobstab.fields import (GridSpec, default_grid, discretization, h1_inner, h1_norm, lp_norm,
                            sample_field)


def test_talenti_oracle_value():
    # (Gamma(N)/Gamma(N/2))^{1/N} / sqrt(pi N (N-2)) at N = 4, p = 2
    ref = (G(4) / G(2)) ** 0.25 / np.sqrt(np.pi * 8)
    assert talenti_constant(2, 4) == pytest.approx(ref, rel=1e-15)
    assert ref == pytest.approx(0.31219, abs=1e-5)


@pytest.mark.parametrize("m,n", [(1, 3), (2, 2), (0.5, 3.0)])
def test_sharp_constant_four_dimensions(m, n):
    if n != int(n):
        pytest.skip("n must be an integer")
    p = make_params(m, int(n))
    if p.dim == 4:
        assert p.C == pytest.approx(talenti_constant(2, 4), rel=1e-6)


@pytest.mark.parametrize("m,n", [(1, 3), (2, 2), (1.5, 2), (3.7, 2), (2, 4)])
def test_k0_identity(m, n):
    p = make_params(m, n)
    g, ts = p.gamma, p.two_star
    lhs = p.C ** (-ts) * (p.k0 * 2 ** (-g)) ** (ts - 2)
    assert lhs == pytest.approx(g * (g + 1), rel=1e-8)


@pytest.mark.parametrize("m,n", [(1, 3), (3.7, 2)])
def test_constants_cross_checked_on_grid(m, n):
    p = make_params(m, n)
    F = extremal_field(p, ExtremalCoords(), default_grid(p))
    assert h1_norm(F) == pytest.approx(1.0, rel=1e-9)
    assert lp_norm(F, p.two_star) == pytest.approx(p.C, rel=1e-9)


def test_extremal_field_closed_form(p22):
    grid = default_grid(p22)
    F = extremal_field(p22, ExtremalCoords(), grid)
    ref = p22.k0 * 2 ** (-p22.gamma) / np.cosh(grid.u) ** p22.gamma
    assert np.allclose(F.log_values[0], ref[:, None], rtol=1e-14, atol=0)
    with pytest.raises(DomainError):
        extremal_field(p22, ExtremalCoords(t=0.0), grid)
    with pytest.raises(DomainError):
        extremal_field(p22, ExtremalCoords(), grid, "d_y")


def test_dt_equals_du_at_unit_scale(p22):
    grid = default_grid(p22)
    a = extremal_field(p22, ExtremalCoords(), grid, "d_t")
    b = extremal_field(p22, ExtremalCoords(), grid, "d_u")
    assert np.array_equal(a.sectors, b.sectors)


def test_du_is_spectral_derivative(p22):
    from sobstab.fields import u_derivative
    grid = default_grid(p22)
    F = extremal_field(p22, ExtremalCoords(t=1.7), grid)
    Fu = extremal_field(p22, ExtremalCoords(t=1.7), grid, "d_u")
    assert np.allclose(u_derivative(F.log_values[0], grid), Fu.log_values[0], atol=1e-12)


@pytest.mark.parametrize("m,n", [(2, 2), (1, 3)])
def test_dx1_structure(m, n):
    p = make_params(m, n)
    grid = default_grid(p, Lmax=2)
    D = extremal_field(p, ExtremalCoords(), grid, "d_x1")
    assert not np.any(D.sectors[0]) and not np.any(D.sectors[2])
    # d/dx1 F(x - x0) = -d/dx0 F: compare with a centred difference in x0, sampled directly
    h = 1e-4
    plus = extremal_field(p, ExtremalCoords(x0=(h,)), grid)
    minus = extremal_field(p, ExtremalCoords(x0=(-h,)), grid)
    fd = (plus.log_values - minus.log_values) / (2 * h)
    assert np.max(np.abs(fd[1] + D.log_values[1])) < 1e-6 * np.max(np.abs(D.log_values[1]))
    # l = 1 part proportional to F'(w) sin(theta)
    d = discretization(p, grid)
    ratio = D.log_values[1] / d.sin_theta[None, :]
    assert np.allclose(ratio, ratio[:, :1], rtol=1e-10, atol=1e-300)


def test_off_axis_translation_rejected(p13):
    with pytest.raises(UnsupportedField):
        extremal_field(p13, ExtremalCoords(x0=(0.1, 0.2, 0.0)), default_grid(p13, Lmax=1))


def test_deficit_vanishes_on_random_manifold_points():
    rng = np.random.default_rng(5)
    for m, n in [(2, 2), (1, 3)]:
        p = make_params(m, n)
        # narrower window keeps the sampled translated extremals cheap; tails stay below 1e-13
        grid = default_grid(p, Lmax=8, U=15.0, Nu=257)
        for _ in range(2):
            z = complex(rng.normal(), rng.normal())
            t = float(np.exp(rng.uniform(-1, 1)))
            x0 = (float(rng.uniform(-0.25, 0.25)) / t,)
            field = extremal_field(p, ExtremalCoords(z, t, x0), grid)
            assert abs(deficit(field)) <= 1e-7 * max(1, abs(z) ** 2)
            assert distance_to_manifold(field).delta <= 1e-5 * abs(z)


def test_deficit_positive_off_manifold(p22):
    grid = default_grid(p22)
    gauss = lambda rho, r, _s: np.exp(-rho ** 2 - r ** 2)
    a = deficit(sample_field(p22, grid, gauss, zeta_independent=True))
    b = deficit(sample_field(p22, grid.refined(), gauss, zeta_independent=True))
    assert a > 1e-4
    assert a == pytest.approx(b, abs=1e-6)


def test_distance_point_on_manifold(p22):
    grid = default_grid(p22, Lmax=1)
    res = distance_to_manifold(extremal_field(p22, ExtremalCoords(3.0, 2.0), grid))
    assert res.delta <= 1e-6
    assert res.argmin.t == pytest.approx(2.0, rel=1e-6)
    assert res.argmin.z == pytest.approx(3.0, rel=1e-6)
    assert max(res.orth_residuals) < 1e-6
    assert res.delta <= h1_norm(extremal_field(p22, ExtremalCoords(3.0, 2.0), grid)) + 1e-10


def test_distance_null_field(p22):
    grid = default_grid(p22)
    with pytest.raises(NullField):
        distance_to_manifold(0 * extremal_field(p22, ExtremalCoords(), grid))


@pytest.fixture(scope="module")
def perturbation():
    p = make_params(2, 2)
    return spectral_perturbation(p, default_grid(p, Lmax=1), seed=1)


def test_distance_orthogonal_perturbation(perturbation):
    psi = perturbation.field
    p, grid = psi.params, psi.grid
    assert perturbation.orth_residual < 1e-8
    F = extremal_field(p, ExtremalCoords(), grid)
    phi = F + 0.1 * psi
    res = distance_to_manifold(phi)
    assert res.delta == pytest.approx(0.1 * h1_norm(psi), abs=1e-4)
    assert max(res.orth_residuals) < 1e-6
    # brute force: |phi - z F_t| over a (log t, z) grid around the reported optimum
    best = np.inf
    for lt in np.linspace(-0.02, 0.02, 21):
        Ft = extremal_field(p, ExtremalCoords(t=float(np.exp(lt))), grid)
        for z in np.linspace(0.98, 1.02, 21):
            best = min(best, h1_norm(phi - z * Ft))
    assert res.delta <= best + 1e-10
    assert best == pytest.approx(0.1, abs=1e-4)


def test_optimal_z_matches_scan(p22):
    grid = default_grid(p22)
    gauss = sample_field(p22, grid, lambda rho, r, _s: np.exp(-rho ** 2 - r ** 2),
                         zeta_independent=True)
    res = distance_to_manifold(gauss, x0_dims=0)
    Ft = extremal_field(p22, ExtremalCoords(t=res.argmin.t), grid)
    # the field and F_t are real, so the optimal z is real
    zs = np.linspace(res.argmin.z.real - 1e-3, res.argmin.z.real + 1e-3, 2001)
    ip = h1_inner(gauss, Ft).real
    n2 = h1_norm(gauss) ** 2
    vals = n2 - 2 * zs * ip + zs ** 2
    zbest = zs[np.argmin(vals)]
    assert abs(zbest - res.argmin.z.real) <= 1e-6
    assert abs(res.argmin.z.imag) < 1e-12
    assert np.sqrt(vals.min()) == pytest.approx(res.delta, abs=1e-8)


def test_distance_dilation_invariant(p22):
    grid = default_grid(p22)
    gauss = sample_field(p22, grid, lambda rho, r, _s: np.exp(-rho ** 2 - r ** 2),
                         zeta_independent=True)
    base = distance_to_manifold(gauss, x0_dims=0).delta
    for s in (0.5, 2.0):
        assert distance_to_manifold(dilate(gauss, s), x0_dims=0).delta == pytest.approx(base, rel=1e-6)


@pytest.mark.parametrize("m,n", [(2, 2), (1, 3), (3.7, 2)])
def test_el_residual(m, n):
    p = make_params(m, n)
    g = el_grid(p)
    coarse = el_residual(p, GridSpec(g.U, (g.Nu - 1) // 2 + 1 - ((g.Nu - 1) // 2) % 2 * 0, 4, 0, "fd4"))
    fine = el_residual(p, g)
    assert fine < 1e-6
    assert coarse / fine >= 4


def test_el_residual_detects_perturbation(p22):
    assert el_residual(p22, amplitude=1.1) > 1e-2


@pytest.mark.parametrize("p,N", [(2, 4), (1.5, 3), (3, 5.5), (2, 3)])
def test_bliss_extremal_ratio(p, N):
    ref = talenti_constant(p, N)
    for t in (0.5, 1.0, 3.0):
        F, dF = bliss_profile(p, N, t)
        assert bliss_ratio(F, p, N, dF) == pytest.approx(ref, rel=1e-6)
    assert bliss_constant(p, N) == pytest.approx(ref, rel=1e-6)


def test_bliss_homogeneity_and_numeric_derivative():
    F, dF = bliss_profile(2, 4)
    a = bliss_ratio(F, 2, 4, dF)
    assert bliss_ratio(lambda r: 5 * F(r), 2, 4, lambda r: 5 * dF(r)) == pytest.approx(a, rel=1e-12)
    assert bliss_ratio(F, 2, 4) == pytest.approx(a, rel=1e-7)


def test_bliss_gaussian_strictly_below():
    ratio = bliss_ratio(lambda r: np.exp(-r * r), 2, 4, lambda r: -2 * r * np.exp(-r * r))
    assert ratio < 0.99 * talenti_constant(2, 4)


def test_bliss_domain():
    F, dF = bliss_profile(2, 4)
    with pytest.raises(DomainError):
        bliss_ratio(F, 4, 4, dF)
