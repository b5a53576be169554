"""Parameters, generalized sphere areas, orthonormal Jacobi polynomials and sector eigendata."""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from math import comb, gamma as gamma_fn, lgamma, pi, sqrt

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.special import beta as beta_fn

from .errors import DomainError


@dataclass(frozen=True)
class Params:
    """Dimension pair (m, n) with the derived exponents.

    ``k0`` and ``C`` are filled lazily by the extremals module and cached per (m, n).
    """

    m: float
    n: int

    @cached_property
    def gamma_exact(self) -> Fraction:
        return (Fraction(self.m) + self.n - 2) / 2

    @cached_property
    def two_star_exact(self) -> Fraction:
        s = Fraction(self.m) + self.n
        return 2 * s / (s - 2)

    @property
    def gamma(self) -> float:
        return float(self.gamma_exact)

    @property
    def two_star(self) -> float:
        return float(self.two_star_exact)

    @property
    def dim(self) -> float:
        return self.m + self.n

    @property
    def omega_m(self) -> float:
        return sphere_area(self.m)

    @property
    def omega_n(self) -> float:
        return sphere_area(self.n)

    @property
    def angular_mass(self) -> float:
        # integral of cos^{m-1} sin^{n-1} over [0, pi/2]
        return 0.5 * float(beta_fn(self.m / 2, self.n / 2))

    @property
    def jacobi_ab(self) -> tuple[float, float]:
        """Exponents of (1-v) and (1+v) in the angular weight, v = cos(2 theta)."""
        return (self.n - 2) / 2, (self.m - 2) / 2

    @property
    def k0(self) -> float:
        from .extremals import normalize_extremal
        return normalize_extremal(self)[0]

    @property
    def C(self) -> float:
        from .extremals import normalize_extremal
        return normalize_extremal(self)[1]

    def as_dict(self) -> dict:
        return {"m": self.m, "n": self.n, "two_star": self.two_star, "gamma": self.gamma}


def make_params(m: float, n: int) -> Params:
    if isinstance(n, bool) or int(n) != n:
        raise DomainError(f"n must be an integer, got {n!r}")
    n = int(n)
    m = float(m)
    if not np.isfinite(m) or m <= 0:
        raise DomainError(f"m must be positive, got {m}")
    if n < 2:
        raise DomainError(f"n must be at least 2, got {n}")
    if m + n <= 2:
        raise DomainError("m + n must exceed 2")
    return Params(m, n)


def sphere_area(d: float) -> float:
    """2 pi^{d/2} / Gamma(d/2), the area of the unit sphere in dimension d."""
    if not d > 0:
        raise DomainError(f"sphere_area needs d > 0, got {d}")
    if d < 300:
        return 2 * pi ** (d / 2) / gamma_fn(d / 2)
    return float(2 * np.exp(d / 2 * np.log(pi) - lgamma(d / 2)))


def jacobi_recurrence(J: int, a: float, b: float) -> tuple[np.ndarray, np.ndarray]:
    """Monic recurrence coefficients (alpha_k, beta_k), k < J, for weight (1-x)^a (1+x)^b."""
    k = np.arange(J, dtype=float)
    s = a + b
    alpha = np.empty(J)
    beta = np.empty(J)
    with np.errstate(divide="ignore", invalid="ignore"):
        alpha[:] = (b * b - a * a) / ((2 * k + s) * (2 * k + s + 2))
        num = 4 * k * (k + a) * (k + b) * (k + s)
        den = (2 * k + s) ** 2 * (2 * k + s + 1) * (2 * k + s - 1)
        beta[:] = num / den
    alpha[0] = (b - a) / (s + 2)
    beta[0] = 2 ** (s + 1) * np.exp(lgamma(a + 1) + lgamma(b + 1) - lgamma(s + 2))
    if J > 1:
        beta[1] = 4 * (1 + a) * (1 + b) / ((2 + s) ** 2 * (3 + s))
    return alpha, beta


@dataclass(frozen=True)
class JacobiBasis:
    """Orthonormal Jacobi polynomials p_0..p_{J-1} with the J-point Gauss rule."""

    J: int
    a: float
    b: float
    alpha: np.ndarray
    beta: np.ndarray
    nodes: np.ndarray
    weights: np.ndarray

    def eval(self, x, deriv: int = 0, J: int | None = None) -> np.ndarray:
        """Values (or derivatives up to order 2) of p_0..p_{J-1}; shape (len(x), J)."""
        J = self.J if J is None else J
        x = np.atleast_1d(np.asarray(x, dtype=float))
        alpha, beta = jacobi_recurrence(max(J, 1) + 1, self.a, self.b)
        sb = np.sqrt(beta)
        P = np.zeros((x.size, J))
        D1 = np.zeros_like(P)
        D2 = np.zeros_like(P)
        P[:, 0] = 1 / sb[0]
        for k in range(J - 1):
            prev = P[:, k - 1] if k > 0 else 0.0
            P[:, k + 1] = ((x - alpha[k]) * P[:, k] - (sb[k] * prev if k > 0 else 0.0)) / sb[k + 1]
            if deriv >= 1:
                d1prev = D1[:, k - 1] if k > 0 else 0.0
                D1[:, k + 1] = (P[:, k] + (x - alpha[k]) * D1[:, k]
                                - (sb[k] * d1prev if k > 0 else 0.0)) / sb[k + 1]
            if deriv >= 2:
                d2prev = D2[:, k - 1] if k > 0 else 0.0
                D2[:, k + 1] = (2 * D1[:, k] + (x - alpha[k]) * D2[:, k]
                                - (sb[k] * d2prev if k > 0 else 0.0)) / sb[k + 1]
        return (P, D1, D2)[deriv]

    @property
    def mass(self) -> float:
        """Integral of the weight over [-1, 1]."""
        return float(self.beta[0])


def gauss_jacobi(J: int, a: float, b: float) -> tuple[np.ndarray, np.ndarray]:
    """Golub-Welsch nodes and weights for weight (1-x)^a (1+x)^b."""
    alpha, beta = jacobi_recurrence(J, a, b)
    if J == 1:
        return np.array([alpha[0]]), np.array([beta[0]])
    x, V = eigh_tridiagonal(alpha, np.sqrt(beta[1:]))
    w = beta[0] * V[0] ** 2
    return x, w


def jacobi_basis(J: int, a: float, b: float) -> JacobiBasis:
    if int(J) != J or J < 1:
        raise DomainError(f"J must be a positive integer, got {J}")
    if not (a > -1 and b > -1):
        raise DomainError(f"Jacobi exponents must exceed -1, got a={a}, b={b}")
    J = int(J)
    alpha, beta = jacobi_recurrence(J, a, b)
    x, w = gauss_jacobi(J, a, b)
    return JacobiBasis(J, float(a), float(b), alpha, beta, x, w)


def jacobi_operator(params: Params, values: np.ndarray, d1: np.ndarray, d2: np.ndarray,
                    v: np.ndarray) -> np.ndarray:
    """Apply -4(1-v^2) d^2/dv^2 - 4((m-n)/2 - (m+n)/2 v) d/dv given derivative samples."""
    m, n = params.m, params.n
    v = np.asarray(v)[:, None] if np.ndim(d1) == 2 else np.asarray(v)
    return -4 * (1 - v * v) * d2 - 4 * ((m - n) / 2 - (m + n) / 2 * v) * d1


@dataclass(frozen=True)
class SectorEigen:
    j: int
    l: int
    sigma_j: float
    tau_l: float
    mult_l: int


def harmonic_multiplicity(n: int, l: int) -> int:
    """Dimension of degree-l spherical harmonics on S^{n-1}."""
    lower = comb(n + l - 3, l - 2) if l >= 2 else 0
    return comb(n + l - 1, l) - lower


def printed_multiplicity(n: int, l: int) -> int:
    """The alternative binomial expression C(n+l-1, l) - C(n+l-2, l-1), kept for reports."""
    lower = comb(n + l - 2, l - 1) if l >= 1 else 0
    return comb(n + l - 1, l) - lower


def sigma(params: Params, j):
    return 4 * j * (j + params.dim / 2 - 1)


def tau(params: Params, l):
    return l * (l + params.n - 2)


def sector_eigen(params: Params, j: int, l: int) -> SectorEigen:
    if j < 0 or l < 0:
        raise DomainError("sector indices must be nonnegative")
    return SectorEigen(int(j), int(l), float(sigma(params, j)), float(tau(params, l)),
                       harmonic_multiplicity(params.n, l))


def zonal_harmonics(n: int, L: int, s) -> np.ndarray:
    """Zonal degree-l harmonics Y_l(s), s = cos(angle to the x1 axis), l = 0..L.

    Normalized to unit mean square over the sphere S^{n-1}; shape (len(s), L+1).
    """
    az = (n - 3) / 2
    basis = jacobi_basis(max(L + 1, 1), az, az)
    return sqrt(basis.mass) * basis.eval(s, J=L + 1)


def zonal_quadrature(n: int, N: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes s and probability weights for zonal integrals over S^{n-1}."""
    az = (n - 3) / 2
    s, w = gauss_jacobi(N, az, az)
    return s, w / w.sum()
