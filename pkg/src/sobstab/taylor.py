"""Second-order expansion of |f + eps psi|_p^2 with an explicit remainder bound.

Everything here works on a finite weighted measure space so that all integrals are
exact finite sums.
"""
from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from fractions import Fraction
from math import isqrt

import numpy as np

from .errors import DomainError, NormalizationError, NullField


@dataclass(frozen=True)
class WeightedSpace:
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1 or w.size < 1 or not np.all(np.isfinite(w)) or np.any(w <= 0):
            raise DomainError("weights must be a nonempty vector of positive finite reals")
        object.__setattr__(self, "weights", w)

    @property
    def dimension(self) -> int:
        return self.weights.size

    def integral(self, g) -> complex:
        return np.sum(self.weights * g)

    def norm(self, g, p: float) -> float:
        return float(np.sum(self.weights * np.abs(g) ** p) ** (1 / p))


def uniform_space(dim: int) -> WeightedSpace:
    return WeightedSpace(np.ones(dim))


def duality_map(f, p: float, space: WeightedSpace) -> np.ndarray:
    """D_p(f) = |f|_p^{1-p} |f|^{p-2} conj(f)."""
    f = np.asarray(f)
    nrm = space.norm(f, p)
    if nrm == 0:
        raise NullField("duality map of the zero function")
    a = np.abs(f)
    with np.errstate(divide="ignore", invalid="ignore"):
        mag = np.where(a > 0, a ** (p - 2), 0.0)
    return nrm ** (1 - p) * mag * np.conj(f)


def dual_exponent(p: float) -> float:
    return p / (p - 1)


# constants of the remainder bound

def _root_exact(x: Fraction, e: Fraction):
    """x**e as a Fraction when it is rational, else None."""
    if e.denominator == 1:
        return x ** e.numerator
    k = e.denominator

    def iroot(v: int):
        r = round(v ** (1 / k))
        for c in (r - 1, r, r + 1):
            if c >= 0 and c ** k == v:
                return c
        return None

    y = x ** e.numerator
    num, den = iroot(y.numerator), iroot(y.denominator)
    return None if num is None or den is None else Fraction(num, den)


def _kappa_high(p):
    if isinstance(p, float):
        return 4 / 3 * (5 * p * p - 12 * p + 7)
    return Fraction(4, 3) * (5 * p * p - 12 * p + 7)


def _kappa_low(p):
    """Second branch; exact Fraction when the power is rational, float otherwise."""
    pre = 16 * (p - 1) / (p * (p + 2))
    base = 3 * p / (p - 2)
    power = None
    if isinstance(p, Fraction):
        power = _root_exact(base, p / 2 - 1)
    if power is None:
        return float(pre) * (4 * float(p - 2) + float(base) ** float(p / 2 - 1))
    return pre * (4 * (p - 2) + power)


@dataclass(frozen=True)
class TaylorConstants:
    p: float
    beta: float
    kappa: float
    branches: dict = dc_field(default_factory=dict)
    exact: dict = dc_field(default_factory=dict)

    def __iter__(self):
        return iter((self.beta, self.kappa))


def taylor_constants(p: float) -> TaylorConstants:
    """(beta_p, kappa_p); at p = 4 both branch values are kept and the smaller returned."""
    if not p > 2:
        raise DomainError(f"the remainder bound needs p > 2, got {p}")
    # exact arithmetic only for simple rationals such as 3, 4, 5/2
    pf = Fraction(p).limit_denominator(1000)
    if float(pf) != float(p):
        pf = float(p)
    branches, exact = {}, {}
    if p >= 4:
        k = _kappa_high(pf)
        branches["p>=4"] = float(k)
        if isinstance(k, Fraction):
            exact["p>=4"] = k
    if p <= 4:
        k = _kappa_low(pf)
        branches["2<p<=4"] = float(k)
        if isinstance(k, Fraction):
            exact["2<p<=4"] = k
    beta = 3.0 if p >= 4 else 1 + p / 2
    return TaylorConstants(float(p), beta, min(branches.values()), branches, exact)


# the curve P and the operator L

def _check_unit(g, p, space, what):
    nrm = space.norm(g, p)
    if abs(nrm - 1) > 1e-10:
        raise NormalizationError(f"{what} must have unit L^{p} norm, got {nrm!r}")


def apply_L(f, p: float, xi, eta, space: WeightedSpace):
    """(L^Re xi, L^Im eta) at a real f with |f|_p = 1."""
    f = np.asarray(f, dtype=float)
    _check_unit(f, p, space, "f")
    fp2 = np.abs(f) ** (p - 2)
    pair = space.integral(f * fp2 * xi)
    lre = -(p - 2) * pair * f * fp2 + (p - 1) * fp2 * xi
    lim = fp2 * eta
    return lre, lim


def L_form(f, p, psi, space, psi2=None) -> float:
    """<L psi, psi2> on L^2 + L^2 (real pairing of the real and imaginary parts)."""
    psi2 = psi if psi2 is None else psi2
    lre, lim = apply_L(f, p, np.real(psi), np.imag(psi), space)
    return float(space.integral(lre * np.real(psi2)).real + space.integral(lim * np.imag(psi2)).real)


def P_curve(f, psi, p, eps, space) -> np.ndarray:
    """P(eps) = |f + eps psi|_p^2, evaluated directly."""
    eps = np.atleast_1d(np.asarray(eps, dtype=float))
    g = f[None, :] + eps[:, None] * psi[None, :]
    return np.sum(space.weights * np.abs(g) ** p, axis=1) ** (2 / p)


def quadratic_model(f, psi, p, eps, space):
    eps = np.atleast_1d(np.asarray(eps, dtype=float))
    lin = 2 * float(space.integral(f * np.abs(f) ** (p - 2) * np.real(psi)).real)
    quad2 = L_form(f, p, psi, space)
    return 1 + lin * eps + quad2 * eps ** 2


@dataclass
class TaylorReport:
    p: float
    eps_list: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray
    margins: np.ndarray
    passed: bool
    beta: float
    kappa: float

    @property
    def pass_(self) -> bool:
        return self.passed


def remainder_check(f, psi, p: float, eps_list, space: WeightedSpace) -> TaylorReport:
    f = np.asarray(f, dtype=float)
    psi = np.asarray(psi, dtype=complex)
    _check_unit(f, p, space, "f")
    _check_unit(psi, p, space, "psi")
    eps = np.asarray(eps_list, dtype=float)
    if np.any(np.abs(eps) > 1):
        raise DomainError("eps must lie in [-1, 1]")
    beta, kappa = taylor_constants(p)
    lhs = np.abs(P_curve(f, psi, p, eps, space) - quadratic_model(f, psi, p, eps, space))
    rhs = kappa * np.abs(eps) ** beta
    margins = rhs - lhs
    return TaylorReport(p, eps, lhs, rhs, margins, bool(np.all(margins >= -1e-12)), beta, kappa)


# uniform convexity and Hoelder continuity of the duality map

def convexity_checks(h1, h2, p: float, space: WeightedSpace) -> dict:
    """Margins (right side minus left side) of the applicable inequalities.

    Keys: 'holder' (duality-map continuity, branch by p) and 'convexity'
    (the triangle-deficit bound for 0 < |h1| <= |h2|; arguments are swapped if needed).
    """
    h1, h2 = np.asarray(h1, dtype=complex), np.asarray(h2, dtype=complex)
    n1, n2 = space.norm(h1, p), space.norm(h2, p)
    if n1 == 0 or n2 == 0:
        raise NullField("convexity checks need nonzero functions")
    out = {}
    pd = dual_exponent(p)
    dd = space.norm(duality_map(h1, p, space) - duality_map(h2, p, space), pd)
    rel = space.norm(h1 - h2, p) / (n1 + n2)
    if p >= 2:
        out["holder"] = 4 * (p - 1) * rel - dd
    if p <= 2:
        out["holder_low"] = 2 * (pd * rel) ** (p - 1) - dd
    if n1 > n2:
        h1, h2, n1, n2 = h2, h1, n2, n1
    diff = space.norm(h1 / n1 - h2 / n2, p)
    lhs = space.norm(h1 + h2, p)
    if p <= 2:
        out["convexity_low"] = n1 + n2 - (p - 1) * n1 / 4 * diff ** 2 - lhs
    if p >= 2:
        out["convexity"] = n1 + n2 - n1 / (p * 2 ** (p - 1)) * diff ** p - lhs
    return out


# randomized suites

def _random_vector(rng, dim, kind, complex_=False):
    if kind == 0:
        x = rng.standard_normal(dim)
    elif kind == 1:
        x = rng.standard_normal(dim) * (rng.random(dim) < 0.3)
    elif kind == 2:
        x = rng.standard_cauchy(dim)
    else:
        x = np.zeros(dim)
        x[rng.integers(dim)] = 1.0
        x += 1e-3 * rng.standard_normal(dim)
    if complex_:
        y = _random_vector(rng, dim, rng.integers(3)) if rng.random() < 0.8 else np.zeros(dim)
        x = x + 1j * y
    if not np.any(x):
        x[0] = 1.0
    return x


def taylor_trials(n_trials: int = 10_000, seed: int = 0, max_dim: int = 64,
                  p_range=(2.0, 8.0)) -> dict:
    """Randomized check of the remainder bound; P is computed directly, not by expansion."""
    rng = np.random.default_rng(seed)
    worst, fails, offender = np.inf, 0, None
    for trial in range(n_trials):
        dim = int(rng.integers(1, max_dim + 1))
        space = WeightedSpace(rng.uniform(0.05, 2.0, dim))
        p = float(p_range[1] - (p_range[1] - p_range[0]) * rng.random())
        if trial % 50 == 0:
            p = float(rng.choice([3.0, 4.0, 6.0, 8.0, 2.0 + 1e-3]))
        f = np.real(_random_vector(rng, dim, int(rng.integers(4))))
        f /= space.norm(f, p)
        mode = rng.random()
        if mode < 0.1:
            psi = f * (1 if rng.random() < 0.5 else -1) + 0j
        elif mode < 0.2:
            psi = f + 1e-2 * _random_vector(rng, dim, 0, True)
        else:
            psi = _random_vector(rng, dim, int(rng.integers(4)), True)
        psi = psi / space.norm(psi, p)
        eps = np.concatenate([rng.uniform(-1, 1, 6), [1.0, -1.0, 0.5, -0.5, 1e-3]])
        rep = remainder_check(f, psi, p, eps, space)
        m = float(rep.margins.min())
        if m < worst:
            worst = m
        if not rep.passed:
            fails += 1
            if offender is None:
                offender = {"p": p, "f": f.tolist(), "psi_re": psi.real.tolist(),
                            "psi_im": psi.imag.tolist(), "weights": space.weights.tolist(),
                            "eps": eps.tolist()}
    return {"trials": n_trials, "failures": fails, "worst_margin": worst, "offender": offender}


def convexity_trials(n_pairs: int = 10_000, seed: int = 0, ps=(2.5, 3.0, 4.0, 7.0),
                     max_dim: int = 32) -> dict:
    """Randomized check of every convexity/Hoelder inequality applicable at each p."""
    rng = np.random.default_rng(seed)
    stats = {}
    for i in range(n_pairs):
        p = float(ps[i % len(ps)])
        dim = int(rng.integers(1, max_dim + 1))
        space = WeightedSpace(rng.uniform(0.05, 2.0, dim))
        h1 = _random_vector(rng, dim, int(rng.integers(4)), True)
        mode = rng.random()
        if mode < 0.15:
            h2 = h1 * rng.uniform(0.1, 10) * np.exp(1j * rng.uniform(0, 0.1))
        elif mode < 0.3:
            h2 = h1 + rng.uniform(1e-4, 1e-1) * _random_vector(rng, dim, 0, True)
        elif mode < 0.4:
            h2 = -h1 * rng.uniform(0.5, 2) + 1e-2 * _random_vector(rng, dim, 0, True)
        else:
            h2 = _random_vector(rng, dim, int(rng.integers(4)), True) * rng.uniform(0.1, 10)
        for key, val in convexity_checks(h1, h2, p, space).items():
            s = stats.setdefault(key, {"count": 0, "violations": 0, "worst_margin": np.inf})
            s["count"] += 1
            tol = 1e-12 * (1 + space.norm(h1, p) + space.norm(h2, p))
            if val < -tol:
                s["violations"] += 1
            s["worst_margin"] = min(s["worst_margin"], float(val))
    return stats


def derivative_checks(f, psi, p: float, space: WeightedSpace, step: float = 1e-5,
                      step2: float | None = None) -> dict:
    """Compare P'(0) and P''(0) from the closed forms with central differences of P.

    By default the second-difference step stays below the distance to the nearest zero
    of f, where |f|^{p-2} is not smooth.
    """
    f = np.asarray(f, dtype=float)
    psi = np.asarray(psi, dtype=complex)
    if step2 is None:
        nz = np.abs(f[f != 0])
        reach = 0.25 * nz.min() / max(np.abs(psi).max(), 1e-300) if nz.size else 1e-3
        step2 = float(np.clip(reach, 1e-4, 1e-3))
    d1 = 2 * float(space.integral(f * np.abs(f) ** (p - 2) * np.real(psi)).real)
    d2 = 2 * L_form(f, p, psi, space)
    pm = P_curve(f, psi, p, [-step, step], space)
    fd1 = (pm[1] - pm[0]) / (2 * step)
    q = P_curve(f, psi, p, [-2 * step2, -step2, 0.0, step2, 2 * step2], space)
    fd2 = (-q[0] + 16 * q[1] - 30 * q[2] + 16 * q[3] - q[4]) / (12 * step2 ** 2)
    return {"first": d1, "first_fd": fd1, "first_err": abs(d1 - fd1),
            "second": d2, "second_fd": fd2, "second_err": abs(d2 - fd2)}
