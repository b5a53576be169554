"""Dilations, x-rearrangement, half-mass normalization and the deficit stability scan."""
from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Callable

import numpy as np

from .errors import BracketError, DomainError, NormalizationError, UnsupportedField
from .extremals import (ExtremalCoords, deficit, distance_to_manifold, extremal_evaluator,
                        extremal_field)
from .fields import (DiscreteField, GridSpec, coefficients, default_grid, discretization,
                     from_coefficients, h1_inner, h1_norm, lp_norm, sample_field, sector_basis,
                     u_interpolate, u_shift)
from .params_special import Params
from .taylor import taylor_constants


# dilations

@dataclass(frozen=True)
class SliceField:
    """An x-radial function sampled on rho-slices.

    Each slice i (at rho[i], carrying rho-measure rho_mass[i]) is a list of cells with
    values and |x|-volumes; cell k occupies the shell of |x|-volume between the cumulative
    sums of ``x_mass`` up to k.  Before rearrangement the cells follow the radial r grid.
    """

    params: Params
    rho: np.ndarray
    rho_mass: np.ndarray
    values: np.ndarray                  # (n_rho, n_cells)
    x_mass: np.ndarray                  # (n_cells,) or (n_rho, n_cells)

    def _xm(self) -> np.ndarray:
        return np.broadcast_to(self.x_mass, self.values.shape)

    def lp_norm(self, p: float) -> float:
        return float(np.sum(self.rho_mass[:, None] * self._xm() * np.abs(self.values) ** p)
                     ** (1 / p))

    def superlevel_measure(self, eps: float) -> float:
        mask = np.abs(self.values) > eps
        return float(np.sum(self.rho_mass[:, None] * self._xm() * mask))

    def mass_within(self, R: float, p: float) -> float:
        """Integral of |phi|^p over {rho^2 + |x|^2 <= R^2}; the straddling cell counts linearly."""
        n = self.params.n
        omega = self.params.omega_n
        xm = self._xm()
        total = 0.0
        for i in np.nonzero(self.rho < R)[0]:
            vlim = omega / n * (R * R - self.rho[i] ** 2) ** (n / 2)
            cum = np.cumsum(xm[i])
            start = cum - xm[i]
            frac = np.clip((vlim - start) / xm[i], 0.0, 1.0)
            total += self.rho_mass[i] * float(np.sum(frac * xm[i] * np.abs(self.values[i]) ** p))
        return total


def slice_grid(params: Params, n_rho: int = 241, n_r: int = 241, span: float = 12.0):
    """Log-uniform rho and r nodes with trapezoid masses omega rho^m da and omega r^n db."""
    a = np.linspace(-span, span, n_rho)
    b = np.linspace(-span, span, n_r)
    rho, r = np.exp(a), np.exp(b)
    rho_mass = params.omega_m * rho ** params.m * (a[1] - a[0])
    x_mass = params.omega_n * r ** params.n * (b[1] - b[0])
    return rho, rho_mass, r, x_mass


def to_slices(obj, params: Params | None = None, n_rho: int = 241, n_r: int = 241,
              span: float = 12.0) -> SliceField:
    """Sample an x-radial DiscreteField or a closed form f(rho, r, s) on slice nodes."""
    if isinstance(obj, DiscreteField):
        params = obj.params
        check_x_radial(obj)
        evaluate = _sector0_evaluator(obj)
    else:
        if params is None:
            raise DomainError("params are required for a closed-form evaluator")
        evaluate = obj
    rho, rho_mass, r, x_mass = slice_grid(params, n_rho, n_r, span)
    R, Rr = np.meshgrid(rho, r, indexing="ij")
    with np.errstate(under="ignore", over="ignore"):
        vals = np.asarray(evaluate(R, Rr, None), dtype=complex)
    return SliceField(params, rho, rho_mass, vals, x_mass)


def normalized(sf: SliceField, p: float) -> SliceField:
    return SliceField(sf.params, sf.rho, sf.rho_mass, sf.values / sf.lp_norm(p), sf.x_mass)


def check_x_radial(field: DiscreteField, tol: float = 1e-10):
    mass = field.sector_mass()
    if len(mass) > 1 and mass[1:].max() > tol * max(mass[0], 1e-300):
        raise UnsupportedField("field carries l > 0 harmonics; rearrangement needs an x-radial field")


def _sector0_evaluator(field: DiscreteField) -> Callable:
    """phi(rho, r) from the l = 0 coefficients: trigonometric interpolation in u, Jacobi sum in v."""
    params, grid = field.params, field.grid
    c = coefficients(field)[0]
    basis, scale = sector_basis(params, 0, grid.Nv)

    def f(rho, r, _s):
        w2 = rho ** 2 + r ** 2
        u = 0.5 * np.log(w2)
        v = (rho ** 2 - r ** 2) / w2
        cu = u_interpolate(c, grid, u.ravel())
        q = scale * basis.eval(v.ravel())
        xi = np.sum(cu * q, axis=1).reshape(u.shape)
        return xi * np.exp(-params.gamma * u)

    return f


def dilate(obj, sigma: float, params: Params | None = None):
    """phi^sigma(rho, x) = sigma^gamma phi(sigma rho, sigma x).

    Fields are translated by ln(sigma) in u (Fourier shift on the periodic window);
    evaluators are wrapped; slice fields have their nodes and masses rescaled.
    """
    if not sigma > 0:
        raise DomainError(f"sigma must be positive, got {sigma}")
    if isinstance(obj, DiscreteField):
        return obj.with_values(u_shift(obj.log_values, np.log(sigma), obj.grid, axis=1), "log")
    if isinstance(obj, SliceField):
        p = obj.params
        return SliceField(p, obj.rho / sigma, obj.rho_mass * sigma ** (-p.m),
                          obj.values * sigma ** p.gamma, obj.x_mass * sigma ** (-float(p.n)))
    if callable(obj):
        if params is None:
            raise DomainError("params are required to dilate an evaluator")
        g = params.gamma
        return lambda rho, r, s: sigma ** g * obj(sigma * rho, sigma * r, s)
    raise DomainError(f"cannot dilate object of type {type(obj).__name__}")


# rearrangement

def rearrange_x(obj) -> SliceField:
    """Symmetric decreasing rearrangement in x on every rho-slice.

    The (value, |x|-volume) cells of each slice are sorted by decreasing modulus and
    stacked outward, so every superlevel set keeps its measure on every slice.
    """
    sf = obj if isinstance(obj, SliceField) else to_slices(obj)
    xm = sf._xm()
    mag = np.abs(sf.values)
    order = np.argsort(-mag, axis=1, kind="stable")
    vals = np.take_along_axis(mag, order, axis=1)
    masses = np.take_along_axis(xm, order, axis=1)
    return SliceField(sf.params, sf.rho.copy(), sf.rho_mass.copy(), vals.astype(complex), masses)


# half-mass normalization

@dataclass
class HalfMassResult:
    sigma: float
    mass: float
    crossings: list
    iterations: int


def half_mass_sigma(obj, c: float, p: float | None = None, lo: float = 1e-6, hi: float = 1e6,
                    tol: float = 1e-8, max_iter: int = 200) -> HalfMassResult:
    """sigma with |chi_{w <= 1} (phi^sigma)*|_{2*}^{2*} = c.

    Brackets on a geometric sigma grid of ratio 2, bisects the first sign change and
    lists every crossing found.
    """
    if not 0 < c < 1:
        raise DomainError("c must lie in (0, 1)")
    sf = obj if isinstance(obj, SliceField) else to_slices(obj)
    p = sf.params.two_star if p is None else p
    nrm = lp_norm(obj, p) if isinstance(obj, DiscreteField) else sf.lp_norm(p)
    if abs(nrm - 1) > 1e-8:
        raise NormalizationError(f"field must have unit L^{p} norm, got {nrm!r}")
    # the slice quadrature differs slightly from the field's; renormalize on the slices
    sf = normalized(sf, p)

    def excess(s):
        return rearrange_x(dilate(sf, s)).mass_within(1.0, p) - c

    grid = [lo]
    while grid[-1] * 2 <= hi:
        grid.append(grid[-1] * 2)
    vals = [excess(s) for s in grid]
    brackets = [(grid[i], grid[i + 1]) for i in range(len(grid) - 1)
                if np.sign(vals[i]) != np.sign(vals[i + 1]) or vals[i] == 0]
    if not brackets:
        raise BracketError(f"no crossing of mass {c} for sigma in [{lo}, {hi}]")
    crossings = []
    first_iters = 0
    for k, (a, b) in enumerate(brackets):
        fa = excess(a)
        it = 0
        while b - a > tol * max(a, 1e-300) and it < max_iter:
            mid = np.sqrt(a * b)
            fm = excess(mid)
            if fm == 0:
                a = b = mid
                break
            if np.sign(fm) == np.sign(fa):
                a, fa = mid, fm
            else:
                b = mid
            it += 1
        crossings.append(float(np.sqrt(a * b)))
        if k == 0:
            first_iters = it
    s = crossings[0]
    return HalfMassResult(s, excess(s) + c, crossings, first_iters)


# corpus of test fields

def field_corpus(params: Params, grid: GridSpec | None = None, seed: int = 0) -> list:
    """About three dozen smooth fields (name, DiscreteField), x-radial ones flagged.

    Returns tuples (name, field, x_radial).
    """
    grid = default_grid(params, Lmax=2) if grid is None else grid
    rng = np.random.default_rng(seed)
    g = params.gamma
    out = []

    def add(name, f, radial=True):
        field = sample_field(params, grid, f, zeta_independent=radial)
        out.append((name, field, radial))

    for t in (0.5, 1.0, 2.0):
        out.append((f"extremal_t{t}", extremal_field(params, ExtremalCoords(1.0, t), grid), True))
    for a in (0.1, 0.3):
        out.append((f"extremal_shift{a}",
                    extremal_field(params, ExtremalCoords(1.0, 1.0, (a,)), grid), False))
    for s in (0.5, 1.0, 2.0):
        add(f"gaussian_{s}", lambda rho, r, _s, s=s: np.exp(-(rho ** 2 + r ** 2) / s))
    for q in (0.6, 1.0, 2.0):
        a = g / 2 + q
        add(f"power_{q}", lambda rho, r, _s, a=a: (1 + rho ** 2 + r ** 2) ** (-a))
    for k in (2.0, 0.5):
        add(f"aniso_{k}", lambda rho, r, _s, k=k: np.exp(-rho ** 2 - k * r ** 2))
    add("ring", lambda rho, r, _s: (rho ** 2 + r ** 2) * np.exp(-(rho ** 2 + r ** 2)))
    add("sech", lambda rho, r, _s: 1 / np.cosh(rho ** 2 + 2 * r ** 2))
    add("phase", lambda rho, r, _s: np.exp(1j * r - rho ** 2 - r ** 2))
    add("two_bumps", lambda rho, r, _s: np.exp(-4 * ((np.sqrt(rho ** 2 + r ** 2) - 1.5) ** 2))
        * np.exp(-0.1 * (rho ** 2 + r ** 2)))
    add("x_shifted", lambda rho, r, s: np.exp(-(rho ** 2 + r ** 2 - 2 * 0.5 * r * s + 0.25)), False)
    add("dipole", lambda rho, r, s: r * s * np.exp(-(rho ** 2 + r ** 2)), False)
    for i in range(8):
        amp = rng.uniform(-1, 1, 3) + 1j * rng.uniform(-1, 1, 3) * (i % 2)
        wid = rng.uniform(0.3, 3, 3)
        cen = rng.uniform(0, 1.5, 3)

        def f(rho, r, _s, amp=amp, wid=wid, cen=cen):
            w2 = rho ** 2 + r ** 2
            return sum(a * np.exp(-(w2 - c) ** 2 / w) for a, w, c in zip(amp, wid, cen)) \
                * np.exp(-0.2 * w2)
        add(f"random_{i}", f)
    F = extremal_field(params, ExtremalCoords(), grid)
    for eps in (0.05, 0.2):
        bump = sample_field(params, grid, lambda rho, r, _s: np.exp(-(rho ** 2 + r ** 2)),
                            zeta_independent=True)
        out.append((f"perturbed_{eps}", F + eps * bump, True))
    out.append(("perturbed_dipole", F + 0.1 * sample_field(
        params, grid, lambda rho, r, s: r * s * np.exp(-rho ** 2 - r ** 2)), False))
    for t in (0.25, 4.0):
        out.append((f"scaled_gaussian_{t}", dilate(sample_field(
            params, grid, lambda rho, r, _s: np.exp(-rho ** 2 - r ** 2), zeta_independent=True),
            t), True))
    return out


# stability scan

@dataclass
class StabilityReport:
    rows: list                     # (eps, deficit, delta, ratio)
    exponent: float
    coefficient: float
    lower: float                   # smallest eigenvalue above the null cluster
    rayleigh: float                # <(C^2 I - S) psi, psi>
    beta_ratios: list              # deficit / delta^1.5 on the schedule
    flags: dict = dc_field(default_factory=dict)

    def as_dict(self) -> dict:
        return {"rows": [list(map(float, r)) for r in self.rows], "exponent": self.exponent,
                "coefficient": self.coefficient, "lower": self.lower, "rayleigh": self.rayleigh,
                "beta_ratios": self.beta_ratios, "flags": self.flags}


@dataclass
class Perturbation:
    field: DiscreteField
    rayleigh: float
    gap: float
    orth_residual: float


def spectral_perturbation(params: Params, grid: GridSpec | None = None, seed: int = 0,
                          n_modes: int = 4) -> Perturbation:
    """A random unit-H1 mix of non-null Re and Im eigenvectors in the l = 0 sector."""
    from .spectral import NULL_TOL, assemble_sector, eigensolve, spectral_report

    grid = default_grid(params, Lmax=1) if grid is None else grid
    rng = np.random.default_rng(seed)
    C2 = params.C ** 2
    parts = {}
    for part in ("Re", "Im"):
        op = assemble_sector(params, 1.0, 0, part, "A", grid)
        res = eigensolve(op, n_modes + 3)
        keep = [i for i, v in enumerate(res.values) if v >= NULL_TOL * C2][:n_modes]
        w = rng.standard_normal(len(keep))
        coef = sum(wk * res.coefficient_array(i) for wk, i in zip(w, keep))
        parts[part] = (op, coef)
    re_op, re_c = parts["Re"]
    im_op, im_c = parts["Im"]
    num = re_op.form(re_c) + im_op.form(im_c)
    den = re_op.form(re_c, "M") + im_op.form(im_c, "M")
    coefs = [np.zeros((grid.Nu, grid.Nv), dtype=complex) for _ in range(grid.Lmax + 1)]
    coefs[0] = (re_c + 1j * im_c) / np.sqrt(den)
    psi = from_coefficients(params, grid, coefs)
    rep_gap = spectral_report(params, 1.0, grid).gap
    return Perturbation(psi, num / den, rep_gap, null_orthogonality(psi))


def null_orthogonality(psi: DiscreteField) -> float:
    """Largest |<psi, v>| over the null directions F, iF, dF/du and dF/dx1 (unit-normalized)."""
    params, grid = psi.params, psi.grid
    F = extremal_field(params, ExtremalCoords(), grid)
    ip = h1_inner(psi, F) / h1_norm(F)
    out = max(abs(ip.real), abs(ip.imag))
    real_modes = [extremal_field(params, ExtremalCoords(), grid, "d_u")]
    if grid.Lmax >= 1:
        real_modes.append(extremal_field(params, ExtremalCoords(), grid, "d_x1"))
    for m in real_modes:
        out = max(out, abs((h1_inner(psi, m) / h1_norm(m)).real))
    return out


def default_schedule(count: int = 12) -> np.ndarray:
    return np.geomspace(0.2, 1e-3, count)


def stability_scan(params: Params, psi: DiscreteField | Perturbation,
                   eps_schedule=None, beta: float = 1.5) -> StabilityReport:
    """Deficit and distance along F + eps psi, with a power-law fit on the small-eps tail."""
    pert = psi if isinstance(psi, Perturbation) else None
    psi = pert.field if pert else psi
    grid = psi.grid
    eps_schedule = default_schedule() if eps_schedule is None else np.asarray(eps_schedule)
    nrm = h1_norm(psi)
    if abs(nrm - 1) > 1e-8:
        raise NormalizationError(f"psi must have unit H1 norm, got {nrm!r}")
    F = extremal_field(params, ExtremalCoords(), grid)
    rows = []
    for eps in eps_schedule:
        phi = F + float(eps) * psi
        dfc = deficit(phi)
        delta = distance_to_manifold(phi).delta
        rows.append((float(eps), dfc, delta, dfc / delta ** 2 if delta > 0 else np.inf))
    rows.sort(key=lambda r: -r[0])
    tail = rows[-max(3, len(rows) // 3):]
    ld = np.log([r[2] for r in tail])
    lf = np.log([r[1] for r in tail])
    exponent = float(np.polyfit(ld, lf, 1)[0])
    coefficient = float(np.exp(np.mean(np.log([r[3] for r in tail]))))
    beta_ratios = [r[1] / r[2] ** beta for r in rows]
    lower = pert.gap if pert else np.nan
    rayleigh = pert.rayleigh if pert else np.nan
    tail_beta = beta_ratios[-max(3, len(rows) // 3):]
    flags = {
        "exponent": abs(exponent - 2) <= 0.1,
        "coefficient": bool(0.95 * lower <= coefficient <= 1.05 * rayleigh) if pert else None,
        "beta_monotone": bool(np.all(np.diff(tail_beta) < 0)),
    }
    if pert:
        kb = taylor_constants(params.two_star) if params.two_star > 2 else None
        bounded = []
        for eps, dfc, delta, ratio in rows:
            if delta <= 0.1 and kb is not None:
                cq = rayleigh + kb.kappa * params.C ** 2 / 4 * delta ** (kb.beta - 2)
                bounded.append(lower / 2 <= ratio <= 2 * cq)
        flags["ratio_bounds"] = bool(all(bounded))
    return StabilityReport(rows, exponent, coefficient, lower, rayleigh, beta_ratios, flags)
