"""The acceptance suite: one check per criterion, shared by the tests and ``verify-all``.

Every check is deterministic given its seed and returns a CriterionResult whose
``details`` are plain JSON-ready values.
"""
from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field as dc_field
from fractions import Fraction
from math import gamma as G, pi

import numpy as np

from .cctools import (dilate, field_corpus, half_mass_sigma, normalized, rearrange_x,
                      spectral_perturbation, stability_scan, to_slices)
from .errors import WindowWarning
from .extremals import (ExtremalCoords, deficit, distance_to_manifold, el_grid, el_residual,
                        extremal_evaluator, extremal_field)
from .fields import (GridSpec, coefficients, default_grid, discretization, h1_norm, lp_norm,
                     sample_field)
from .params_special import make_params
from .spectral import (NULL_TOL, apply_Y, assemble_sector, eigensolve, null_subspace_angle,
                       nullmode_residuals, poschl_teller_spectrum, sector_spectra,
                       spectral_report, t_invariance_check, trace_divergence_ratios, trace_sum,
                       y_mode)
from .taylor import convexity_trials, taylor_constants, taylor_trials


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    details: dict = dc_field(default_factory=dict)
    seconds: float = 0.0

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] criterion {self.number}: {self.name}"


def talenti_constant(p: float, N: float) -> float:
    """Closed-form best constant S with |f|_{p*} <= S |grad f|_p in R^N."""
    lead = pi ** -0.5 * N ** (-1 / p) * ((p - 1) / (N - p)) ** (1 - 1 / p)
    ratio = G(1 + N / 2) * G(N) / (G(N / p) * G(1 + N - N / p))
    return lead * ratio ** (1 / N)


def _b(x) -> bool:
    return bool(x)


# 1

def check_exponents(seed: int = 0) -> CriterionResult:
    rng = np.random.default_rng(seed)
    rows, ok = [], True
    for _ in range(20):
        m = float(rng.uniform(0.05, 12.0))
        n = int(rng.integers(2, 12))
        p = make_params(m, n)
        exact = p.gamma_exact * (p.two_star_exact - 2) == 2
        s = Fraction(m) + n
        formulas = (p.two_star_exact == 2 * s / (s - 2) and p.gamma_exact == (s - 2) / 2
                    and abs(p.two_star - 2 * (m + n) / (m + n - 2)) <= 1e-14 * p.two_star
                    and abs(p.gamma - (m + n - 2) / 2) <= 1e-14 * max(1, p.gamma))
        ok &= exact and formulas
        rows.append({"m": m, "n": n, "two_star": p.two_star, "gamma": p.gamma,
                     "identity_exact": bool(exact)})
    return CriterionResult(1, "exponent identities", _b(ok), {"cases": rows})


# 2

def check_sharp_constant() -> CriterionResult:
    oracle = talenti_constant(2.0, 4.0)
    rows, ok = [], True
    for m, n in ((1, 3), (2, 2)):
        p = make_params(m, n)
        C, k0 = p.C, p.k0
        rel = abs(C - oracle) / oracle
        ts = p.two_star
        ident = C ** (-ts) * (k0 * 2 ** (-p.gamma)) ** (ts - 2)
        target = p.gamma * (p.gamma + 1)
        ok &= rel < 1e-6 and abs(ident - target) < 1e-8
        rows.append({"m": m, "n": n, "C": C, "k0": k0, "rel_err": rel,
                     "identity_err": abs(ident - target)})
    return CriterionResult(2, "sharp constant against the closed form", _b(ok),
                           {"oracle": oracle, "cases": rows})


# 3

def check_sobolev(seed: int = 0, pairs=((2, 2), (1, 3))) -> CriterionResult:
    rng = np.random.default_rng(seed)
    details = {}
    ok = True
    worst = np.inf
    count = 0
    for m, n in pairs:
        p = make_params(m, n)
        for name, f, _ in field_corpus(p, seed=seed):
            d = deficit(f) / max(h1_norm(f) ** 2, 1e-300)
            worst = min(worst, d)
            count += 1
    details["corpus_size"] = count
    details["corpus_min_relative_deficit"] = worst
    ok &= count >= 30 and worst >= -1e-8

    p = make_params(2, 2)
    grid = default_grid(p, Lmax=8)
    manifold = []
    for _ in range(10):
        t = float(np.exp(rng.uniform(-0.7, 0.7)))
        z = complex(rng.uniform(0.5, 2) * np.exp(1j * rng.uniform(0, 2 * np.pi)))
        a = float(rng.uniform(-0.25, 0.25)) / t
        f = extremal_field(p, ExtremalCoords(z, t, (a,)), grid)
        manifold.append(deficit(f))
    details["manifold_max_deficit"] = float(max(manifold))
    ok &= max(manifold) <= 1e-7

    el = []
    for m, n in pairs:
        q = make_params(m, n)
        g = el_grid(q)
        r1 = el_residual(q, g)
        r2 = el_residual(q, g.refined(2))
        el.append({"m": m, "n": n, "residual": r1, "refined": r2, "ratio": r1 / r2})
        ok &= r1 < 1e-6 and r1 / r2 >= 4
    details["euler_lagrange"] = el
    return CriterionResult(3, "Sobolev inequality and equality cases", _b(ok), details)


# 4

def check_taylor(seed: int = 0, trials: int = 10_000) -> CriterionResult:
    consts = {p: taylor_constants(p) for p in (3, 4, 6)}
    exact_ok = (consts[3].exact.get("2<p<=4") == Fraction(224, 15)
                and consts[4].exact.get("p>=4") == 52 and consts[4].exact.get("2<p<=4") == 28
                and consts[4].kappa == 28.0 and consts[4].beta == 3.0
                and consts[6].exact.get("p>=4") == Fraction(460, 3))
    res = taylor_trials(trials, seed)
    ok = exact_ok and res["failures"] == 0
    det = {"constants": {str(p): {"beta": c.beta, "kappa": c.kappa, "branches": c.branches}
                         for p, c in consts.items()},
           "constants_exact": bool(exact_ok), "trials": res["trials"],
           "failures": res["failures"], "worst_margin": res["worst_margin"]}
    if res["offender"] is not None:
        det["offender"] = res["offender"]
    return CriterionResult(4, "remainder bound of the second-order expansion", _b(ok), det)


# 5

def check_convexity(seed: int = 0, pairs: int = 10_000) -> CriterionResult:
    high = convexity_trials(pairs, seed, ps=(2.5, 3.0, 4.0, 7.0))
    low = convexity_trials(pairs, seed + 1, ps=(1.2, 1.5, 1.8, 2.0))
    stats = {"p>=2 " + k: v for k, v in high.items()}
    stats.update({"p<=2 " + k: v for k, v in low.items() if k.endswith("_low")})
    ok = all(v["violations"] == 0 and v["count"] >= pairs for v in stats.values())
    return CriterionResult(5, "duality-map continuity and uniform convexity", _b(ok), stats)


# 6

def check_spectral(m: float = 2, n: int = 2) -> CriterionResult:
    p = make_params(m, n)
    C2 = p.C ** 2
    grid = default_grid(p, Lmax=1)
    spectra = sector_spectra(p, 1.0, grid, k=8)
    F = coefficients(extremal_field(p, ExtremalCoords(), grid))
    Fu = coefficients(extremal_field(p, ExtremalCoords(), grid, "d_u"))
    re0, im0 = spectra[(0, "Re")], spectra[(0, "Im")]
    n_re = int(np.sum(re0.values < NULL_TOL * C2))
    n_im = int(np.sum(im0.values < NULL_TOL * C2))
    ang_re = null_subspace_angle(re0, [F[0], Fu[0]])
    ang_im = null_subspace_angle(im0, [F[0]])
    res = nullmode_residuals(p, 1.0, grid)
    vmax = max(float(r.values.max()) for r in spectra.values())
    rep = spectral_report(p, 1.0, grid)
    rep2 = spectral_report(p, 1.0, grid.refined(2))
    tdiff = t_invariance_check(p, 1.0, 2.0, k=8, grid=grid)
    ok = (n_re == 2 and n_im == 1 and ang_re < 1e-3 and ang_im < 1e-3
          and res["Fx1_re_l1"] < 1e-6 and vmax <= C2 + 1e-6 and rep.gap > 0
          and abs(rep.gap - rep2.gap) < 1e-4 and tdiff < 1e-6)
    return CriterionResult(6, "spectral structure at the extremal", _b(ok), {
        "m": m, "n": n, "C2": C2, "null_re_l0": n_re, "null_im_l0": n_im,
        "angle_re": ang_re, "angle_im": ang_im, "residuals": res, "max_eigenvalue": vmax,
        "gap": rep.gap, "gap_refined": rep2.gap, "gap_closed_form": 2 * C2 / (p.gamma + 3),
        "null_dimension": rep.null_dimension,
        "null_dimension_weighted": rep.null_dimension_weighted, "t_discrepancy": tdiff})


# 7

def check_closed_forms(pairs=((2, 2), (1, 3), (3.7, 2))) -> CriterionResult:
    rows, ok = [], True
    for m, n in pairs:
        p = make_params(m, n)
        C2 = p.C ** 2
        grid = default_grid(p)
        d = discretization(p, grid)
        g = y_mode(p, d.v)
        y_err = float(np.abs(apply_Y(p, g, grid) - 2 * p.dim * C2 * g).max())
        # the same identity through the Galerkin matrix of the Jacobi operator
        yop = assemble_sector(p, variant="Y", grid=grid)
        K, M = yop.block(0)
        from .params_special import jacobi_basis
        a, b = p.jacobi_ab
        basis = jacobi_basis(grid.Nv, a, b)
        c = np.linalg.solve(2.0 ** (p.dim / 4) * basis.eval(d.v), g)
        gal_err = float(np.abs(K @ c - 2 * p.dim * C2 * (M @ c)).max())
        pt = poschl_teller_spectrum(p)
        X = eigensolve(assemble_sector(p, 1.0, 0, "Re", "X", grid), len(pt))
        x_err = float(np.max(np.abs(X.values - [e["eigenvalue"] for e in pt])))
        has_zero = any(e["zero_mode"] and abs(e["eigenvalue"]) < 1e-12 for e in pt)
        ground = pt[0]["eigenvalue"]
        ok &= (y_err < 1e-7 and gal_err < 1e-7 and x_err < 1e-5 and has_zero
               and ground < 0 and abs(ground + C2 * (2 * p.gamma + 1)) < 1e-12)
        rows.append({"m": m, "n": n, "Y_error": y_err, "Y_galerkin_error": gal_err,
                     "X_error": x_err, "bound_states": [e["eigenvalue"] for e in pt],
                     "X_discrete": X.values.tolist()})
    return CriterionResult(7, "closed-form spectral anchors", _b(ok), {"cases": rows})


# 8

def check_trace() -> CriterionResult:
    rows, ok = [], True
    for n in (2, 3):
        p = make_params(2, n)
        for d in range(1, 7):
            if d <= (n + 1) / 2:
                continue
            r = trace_sum(p, d)
            ok &= r.converged
            rows.append({"n": n, "d": d, "partial": r.partial, "tail": r.tail_bound,
                         "converged": r.converged})
    p = make_params(2, 2)
    ratios = trace_divergence_ratios(p, 1, cap=16, doublings=5)
    div = trace_sum(p, 1)
    ok &= all(r > 0.99 for r in ratios) and not div.converged
    return CriterionResult(8, "trace sums", _b(ok), {"convergent": rows,
                                                    "divergent_ratios": ratios})


# 9

def check_stability(m: float = 2, n: int = 2, seed: int = 0) -> CriterionResult:
    p = make_params(m, n)
    pert = spectral_perturbation(p, seed=seed)
    rep = stability_scan(p, pert)
    ok = (pert.orth_residual < 1e-8 and rep.flags["exponent"] and rep.flags["coefficient"]
          and rep.flags["beta_monotone"] and rep.beta_ratios[-1] < rep.beta_ratios[0])
    d = rep.as_dict()
    d["orth_residual"] = pert.orth_residual
    return CriterionResult(9, "quadratic stability law", _b(ok), d)


# 10

def check_toolkit(m: float = 2, n: int = 2) -> CriterionResult:
    p = make_params(m, n)
    grid = default_grid(p)
    ts = p.two_star
    g = sample_field(p, grid, lambda rho, r, _s: np.exp(-rho ** 2 - 4 * (r - 1) ** 2),
                     zeta_independent=True)
    g = g * (1 / lp_norm(g, ts))
    det, ok = {}, True
    dil = []
    for s in (0.5, 1.7):
        gs = dilate(g, s)
        dil.append({"sigma": s, "h1": abs(h1_norm(gs) - h1_norm(g)),
                    "lp": abs(lp_norm(gs, ts) - lp_norm(g, ts)),
                    "delta": abs(distance_to_manifold(gs).delta - distance_to_manifold(g).delta)})
    ok &= all(max(r["h1"], r["lp"], r["delta"]) < 1e-6 for r in dil)
    det["dilation"] = dil

    sf = normalized(to_slices(g), ts)
    rs = rearrange_x(sf)
    norms = {str(q): abs(rs.lp_norm(q) - sf.lp_norm(q)) for q in (2.0, ts)}
    levels = {str(e): abs(rs.superlevel_measure(e) - sf.superlevel_measure(e))
              for e in (0.01, 0.1, 0.5)}
    ok &= max(norms.values()) < 1e-8 and max(levels.values()) < 1e-8
    det["rearrangement_norms"], det["rearrangement_levels"] = norms, levels

    Fn = extremal_field(p, ExtremalCoords(z=1 / p.C), grid)
    fsl = normalized(to_slices(Fn), ts)
    c_fix = fsl.mass_within(1.0, ts)
    fixed = half_mass_sigma(Fn, c_fix)
    half = half_mass_sigma(g, 0.5)
    recomputed = rearrange_x(dilate(sf, half.sigma)).mass_within(1.0, ts)
    ok &= abs(fixed.sigma - 1) < 1e-6 and abs(recomputed - 0.5) < 1e-6
    det["half_mass"] = {"fixed_point_sigma": fixed.sigma, "sigma": half.sigma,
                        "recomputed_mass": recomputed, "crossings": half.crossings}
    return CriterionResult(10, "concentration toolkit", _b(ok), det)


CHECKS = {1: check_exponents, 2: check_sharp_constant, 3: check_sobolev, 4: check_taylor,
          5: check_convexity, 6: check_spectral, 7: check_closed_forms, 8: check_trace,
          9: check_stability, 10: check_toolkit}
SEEDED = {1, 3, 4, 5, 9}


def run_criterion(number: int, seed: int = 0) -> CriterionResult:
    fn = CHECKS[number]
    start = time.perf_counter()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", WindowWarning)
        res = fn(seed=seed) if number in SEEDED else fn()
    res.seconds = time.perf_counter() - start
    return res


def run_all(seed: int = 0, numbers=None) -> list[CriterionResult]:
    return [run_criterion(k, seed) for k in (numbers or sorted(CHECKS))]
