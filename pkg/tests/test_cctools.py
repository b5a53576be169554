import numpy as np
import pytest

from sobstab import (BracketError, DomainError, NormalizationError, UnsupportedField,
                     make_params)
from sobstab.cctools import (Perturbation, dilate, field_corpus, half_mass_sigma,
                             normalized, null_orthogonality, rearrange_x, spectral_perturbation,
                             stability_scan, to_slices)
from sobstab.extremals import ExtremalCoords, extremal_evaluator, extremal_field
from sobstab.fields import default_grid, h1_norm, lp_norm, sample_field


def ring(rho, r, _s):
    return np.exp(-rho ** 2 - 4 * (r - 1) ** 2)


@pytest.fixture(scope="module")
def ring_field(p22):
    f = sample_field(p22, default_grid(p22), ring, zeta_independent=True)
    return f * (1 / lp_norm(f, p22.two_star))


def test_dilate_identity_and_errors(p22, ring_field):
    same = dilate(ring_field, 1.0)
    assert np.max(np.abs(same.log_values - ring_field.log_values)) < 1e-14
    with pytest.raises(DomainError):
        dilate(ring_field, 0.0)
    with pytest.raises(DomainError):
        dilate(ring, 2.0)
    with pytest.raises(DomainError):
        dilate("field", 2.0)


def test_dilate_group_law(p22, ring_field):
    a = dilate(dilate(ring_field, 0.7), 1.9)
    b = dilate(ring_field, 0.7 * 1.9)
    assert np.max(np.abs(a.log_values - b.log_values)) < 1e-12
    f = dilate(dilate(ring, 0.7, p22), 1.9, p22)
    g = dilate(ring, 0.7 * 1.9, p22)
    rho, r = np.meshgrid(np.linspace(0.1, 3, 9), np.linspace(0.1, 3, 9))
    assert np.allclose(f(rho, r, None), g(rho, r, None), rtol=1e-14)
    sf = to_slices(ring, p22, 61, 61)
    s1, s2 = dilate(dilate(sf, 0.7), 1.9), dilate(sf, 0.7 * 1.9)
    assert np.allclose(s1.rho, s2.rho, rtol=1e-14) and np.allclose(s1.values, s2.values, rtol=1e-14)


def test_dilated_field_matches_dilated_evaluator(p22):
    grid = default_grid(p22)
    a = dilate(sample_field(p22, grid, ring, zeta_independent=True), 1.6)
    b = sample_field(p22, grid, dilate(ring, 1.6, p22), zeta_independent=True)
    # agreement is limited by trigonometric interpolation of the sampled profile
    assert np.max(np.abs(a.log_values - b.log_values)) < 1e-6 * np.max(np.abs(b.log_values))


@pytest.mark.parametrize("sigma", [0.5, 2.0, 5.0])
def test_dilation_invariance_of_norms(p22, ring_field, sigma):
    ts = p22.two_star
    g = dilate(ring_field, sigma)
    assert lp_norm(g, ts) == pytest.approx(lp_norm(ring_field, ts), rel=1e-8)
    assert h1_norm(g) == pytest.approx(h1_norm(ring_field), rel=1e-8)


def test_slice_norms_match_field(p22, ring_field):
    sf = to_slices(ring_field)
    assert sf.lp_norm(p22.two_star) == pytest.approx(1.0, rel=1e-6)


def test_rearrange_decreasing_unchanged(p22):
    F = extremal_evaluator(p22, ExtremalCoords())
    sf = to_slices(F, p22)
    rs = rearrange_x(sf)
    assert np.max(np.abs(rs.values - sf.values)) <= 1e-12 * np.max(np.abs(sf.values))


def test_rearrange_preserves_norms_and_levels(p22, ring_field):
    sf = normalized(to_slices(ring_field), p22.two_star)
    rs = rearrange_x(sf)
    for q in (2.0, p22.two_star):
        assert rs.lp_norm(q) == pytest.approx(sf.lp_norm(q), rel=1e-8)
    for eps in (0.01, 0.1, 0.5):
        assert rs.superlevel_measure(eps) == pytest.approx(sf.superlevel_measure(eps), rel=1e-8)
    # decreasing in |x| on every slice
    assert np.all(np.diff(np.abs(rs.values), axis=1) <= 0)


def test_rearrange_increases_mass_near_origin(p22, ring_field):
    sf = normalized(to_slices(ring_field), p22.two_star)
    assert rearrange_x(sf).mass_within(1.0, 4) > sf.mass_within(1.0, 4)


def test_rearrange_rejects_non_radial(p22):
    grid = default_grid(p22, Lmax=1)
    dip = sample_field(p22, grid, lambda rho, r, s: (1 + r * s) * np.exp(-rho ** 2 - r ** 2))
    with pytest.raises(UnsupportedField):
        rearrange_x(dip)


def test_dilate_commutes_with_rearrange(p22, ring_field):
    sf = to_slices(ring_field)
    a = rearrange_x(dilate(sf, 1.7))
    b = dilate(rearrange_x(sf), 1.7)
    assert np.allclose(a.values, b.values, rtol=0, atol=1e-10)
    assert np.allclose(a._xm(), b._xm(), rtol=1e-10)
    for R in (0.5, 1.0, 2.0):
        assert a.mass_within(R, 4) == pytest.approx(b.mass_within(R, 4), rel=1e-10)


def test_mass_within_whole_space(p22, ring_field):
    sf = to_slices(ring_field)
    assert sf.mass_within(1e8, 2.0) == pytest.approx(sf.lp_norm(2.0) ** 2, rel=1e-12)


def test_half_mass_fixed_point(p22):
    ts = p22.two_star
    Fn = extremal_field(p22, ExtremalCoords(z=1 / p22.C), default_grid(p22))
    c = normalized(to_slices(Fn), ts).mass_within(1.0, ts)
    res = half_mass_sigma(Fn, c)
    assert res.sigma == pytest.approx(1.0, abs=1e-6)
    assert res.mass == pytest.approx(c, abs=1e-6)


def test_half_mass_recomputation(p22, ring_field):
    ts = p22.two_star
    res = half_mass_sigma(ring_field, 0.5)
    sf = normalized(to_slices(ring_field), ts)
    again = rearrange_x(dilate(sf, res.sigma)).mass_within(1.0, ts)
    assert again == pytest.approx(0.5, abs=1e-6)
    assert res.crossings[0] == res.sigma and len(res.crossings) == 1


def test_half_mass_on_corpus_fields(p22):
    corpus = field_corpus(p22)
    picked = [f for name, f, radial in corpus if radial and name in ("gaussian_1.0", "power_1.0", "sech")]
    assert len(picked) == 3
    for f in picked:
        f = f * (1 / lp_norm(f, p22.two_star))
        res = half_mass_sigma(f, 0.5)
        assert len(res.crossings) == 1 and abs(res.mass - 0.5) < 1e-6


def test_half_mass_errors(p22, ring_field):
    with pytest.raises(NormalizationError):
        half_mass_sigma(2 * ring_field, 0.5)
    with pytest.raises(DomainError):
        half_mass_sigma(ring_field, 1.0)
    with pytest.raises(BracketError):
        half_mass_sigma(ring_field, 0.5, lo=1e-6, hi=1e-5)


def test_corpus_shape(p13):
    corpus = field_corpus(p13)
    assert len(corpus) >= 30
    names = [c[0] for c in corpus]
    assert len(set(names)) == len(names)
    for name, f, radial in corpus:
        if radial:
            assert not np.any(f.log_values[1:]), name


def test_sobolev_on_corpus(p13):
    for name, f, _ in field_corpus(p13):
        lhs = lp_norm(f, p13.two_star)
        assert lhs <= p13.C * h1_norm(f) * (1 + 1e-9), name


@pytest.fixture(scope="module")
def pert():
    p = make_params(2, 2)
    return spectral_perturbation(p, default_grid(p, Lmax=1), seed=0)


def test_spectral_perturbation(pert):
    assert isinstance(pert, Perturbation)
    assert h1_norm(pert.field) == pytest.approx(1.0, rel=1e-10)
    assert pert.orth_residual < 1e-8
    assert null_orthogonality(pert.field) == pert.orth_residual
    assert pert.gap <= pert.rayleigh < pert.field.params.C ** 2


def test_stability_scan_short(pert):
    rep = stability_scan(pert.field.params, pert, np.geomspace(0.02, 1e-3, 5))
    assert len(rep.rows) == 5
    assert abs(rep.exponent - 2) < 0.1
    assert 0.95 * rep.lower <= rep.coefficient <= 1.05 * rep.rayleigh
    assert all(r[3] > 0 and np.isfinite(r[3]) for r in rep.rows)
    assert rep.flags["beta_monotone"] and rep.flags["ratio_bounds"]
    assert set(rep.as_dict()) >= {"rows", "exponent", "coefficient", "flags"}


def test_stability_scan_requires_unit_psi(pert):
    with pytest.raises(NormalizationError):
        stability_scan(pert.field.params, 2 * pert.field, [0.01])
