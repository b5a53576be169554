"""Cylindrically symmetric complex fields on a (u, v) tensor grid with harmonic sectors.

A field phi(rho, x) is stored through log coordinates: w = |(rho, x)| = e^u,
v = cos(2 theta) with rho = w cos(theta), |x| = w sin(theta), and xi = w^gamma phi.
The angular dependence in x is expanded in zonal harmonics about the x1 axis,
sector l holding the nodal values of xi_l(u, v) on the u-grid times the
Gauss-Jacobi v-nodes.
"""
from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass, field as dc_field, replace
from functools import lru_cache
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import DomainError, EvalError, GridMismatch, WindowWarning
from .params_special import (Params, jacobi_basis, make_params, zonal_harmonics,
                             zonal_quadrature)


@dataclass(frozen=True)
class GridSpec:
    U: float
    Nu: int
    Nv: int
    Lmax: int = 0
    deriv: str = "fourier"

    def __post_init__(self):
        if not self.U > 0:
            raise DomainError("U must be positive")
        if self.Nu < 16 or self.Nv < 4 or self.Lmax < 0:
            raise DomainError(f"invalid grid sizes {self.Nu}, {self.Nv}, {self.Lmax}")
        if self.deriv not in ("fourier", "fd4"):
            raise DomainError(f"unknown derivative scheme {self.deriv!r}")

    @property
    def h(self) -> float:
        return 2 * self.U / self.Nu

    @property
    def u(self) -> np.ndarray:
        return -self.U + (np.arange(self.Nu) + 0.5) * self.h

    @property
    def Nz(self) -> int:
        """Zonal quadrature size used for sector projection and non-quadratic integrals."""
        return max(16, 3 * self.Lmax + 8)

    def refined(self, factor: int = 2) -> "GridSpec":
        nu = factor * self.Nu
        if self.Nu % 2 == 1:
            nu += 1 - nu % 2
        return replace(self, Nu=nu, Nv=factor * self.Nv)

    def as_dict(self) -> dict:
        return {"U": self.U, "Nu": self.Nu, "Nv": self.Nv, "Lmax": self.Lmax, "deriv": self.deriv}


def default_window(params: Params) -> float:
    return max(30 / params.gamma, 20.0)


def default_grid(params: Params, Lmax: int = 0, Nu: int | None = None, Nv: int = 24,
                 U: float | None = None) -> GridSpec:
    """Default grid: window max(30/gamma, 20) and spacing at most 0.12 in u."""
    U = default_window(params) if U is None else U
    if Nu is None:
        Nu = max(257, int(np.ceil(2 * U / 0.12)))
        Nu += 1 - Nu % 2
    return GridSpec(U, Nu, Nv, Lmax)


# u-direction operators on the periodic window

def _wavenumbers(N: int, h: float) -> np.ndarray:
    k = 2 * np.pi * np.fft.fftfreq(N, h)
    if N % 2 == 0:
        k[N // 2] = 0.0
    return k


def u_derivative(values: np.ndarray, grid: GridSpec, axis: int = 0) -> np.ndarray:
    if grid.deriv == "fd4":
        h = grid.h
        r = lambda s: np.roll(values, s, axis=axis)
        return (-r(-2) + 8 * r(-1) - 8 * r(1) + r(2)) / (12 * h)
    k = _wavenumbers(grid.Nu, grid.h)
    shape = [1] * values.ndim
    shape[axis] = -1
    out = np.fft.ifft(1j * k.reshape(shape) * np.fft.fft(values, axis=axis), axis=axis)
    return out if np.iscomplexobj(values) else out.real


def u_derivative_matrix(grid: GridSpec) -> np.ndarray:
    return u_derivative(np.eye(grid.Nu), grid, axis=0)


def u_shift(values: np.ndarray, shift: float, grid: GridSpec, axis: int = 0) -> np.ndarray:
    """Values of the trigonometric interpolant at u + shift."""
    N = grid.Nu
    k = 2 * np.pi * np.fft.fftfreq(N, grid.h)
    phase = np.exp(1j * k * shift)
    if N % 2 == 0:
        phase[N // 2] = np.cos(k[N // 2] * shift)
    shape = [1] * values.ndim
    shape[axis] = -1
    out = np.fft.ifft(phase.reshape(shape) * np.fft.fft(values, axis=axis), axis=axis)
    return out if np.iscomplexobj(values) else out.real


def u_interpolate(values: np.ndarray, grid: GridSpec, u_new: np.ndarray) -> np.ndarray:
    """Trigonometric interpolation along axis 0 at arbitrary points (zero outside the window)."""
    N = grid.Nu
    coef = np.fft.fft(values, axis=0) / N
    k = 2 * np.pi * np.fft.fftfreq(N, grid.h)
    if N % 2 == 0:
        coef[N // 2] *= 0.5
        k = np.concatenate([k, [-k[N // 2]]])
        coef = np.concatenate([coef, coef[N // 2:N // 2 + 1]], axis=0)
    u_new = np.asarray(u_new, dtype=float)
    out = np.zeros((u_new.size,) + values.shape[1:], dtype=complex)
    inside = np.abs(u_new) <= grid.U
    idx = np.nonzero(inside)[0]
    for start in range(0, idx.size, 4096):
        sel = idx[start:start + 4096]
        E = np.exp(1j * np.outer(u_new[sel] - grid.u[0], k))
        out[sel] = np.tensordot(E, coef, axes=(1, 0))
    return out if np.iscomplexobj(values) else out.real


@dataclass(frozen=True)
class Discretization:
    """Quadrature nodes and sector transforms shared by all fields on one grid."""

    params: Params
    grid: GridSpec
    v: np.ndarray
    vweights: np.ndarray          # weights of cos^{m-1} sin^{n-1} dtheta at the v-nodes
    sin_theta: np.ndarray
    cos_theta: np.ndarray
    transforms: tuple             # nodal xi_l -> coefficients against the sector-l basis
    inverses: tuple               # coefficients -> nodal xi_l
    mu: tuple                     # angular eigenvalues per sector basis function
    zeta: np.ndarray
    zweights: np.ndarray
    Y: np.ndarray                 # zonal harmonics at zeta nodes, shape (Nz, Lmax+1)


def sector_basis(params: Params, l: int, J: int):
    """Orthonormal angular basis of sector l: sin(theta)^l q_j(v), j < J.

    q_j are Jacobi polynomials for exponents (a + l, b) scaled so that the basis is
    orthonormal against cos^{m-1} sin^{n-1} dtheta.  Returns (JacobiBasis, scale).
    """
    a, b = params.jacobi_ab
    basis = jacobi_basis(J, a + l, b)
    scale = 2.0 ** ((params.dim / 2 + l) / 2)
    return basis, scale


def angular_eigenvalues(params: Params, l: int, J: int) -> np.ndarray:
    """(2j+l)(2j+l+2 gamma): the angular part of A on sin^l q_j in sector l."""
    k = 2 * np.arange(J) + l
    return k * (k + 2 * params.gamma)


@lru_cache(maxsize=64)
def discretization(params: Params, grid: GridSpec) -> Discretization:
    a, b = params.jacobi_ab
    base = jacobi_basis(grid.Nv, a, b)
    v = base.nodes
    vw = base.weights * 2.0 ** (-params.dim / 2)
    s = np.sqrt((1 - v) / 2)
    c = np.sqrt((1 + v) / 2)
    transforms, inverses, mus = [], [], []
    for l in range(grid.Lmax + 1):
        bl, scale = sector_basis(params, l, grid.Nv)
        V = scale * bl.eval(v)                    # q_j at nodes
        inv = (s ** l)[:, None] * V               # coefficients -> nodal xi
        T = np.linalg.solve(V, np.diag(s ** (-float(l))))
        transforms.append(T)
        inverses.append(inv)
        mus.append(angular_eigenvalues(params, l, grid.Nv))
    zeta, zw = zonal_quadrature(params.n, grid.Nz)
    Y = zonal_harmonics(params.n, grid.Lmax, zeta)
    return Discretization(params, grid, v, vw, s, c, tuple(transforms), tuple(inverses),
                          tuple(mus), zeta, zw, Y)


@dataclass(frozen=True, eq=False)
class DiscreteField:
    params: Params
    grid: GridSpec
    sectors: np.ndarray = dc_field(repr=False)   # shape (Lmax+1, Nu, Nv), complex
    coord: str = "log"

    def __post_init__(self):
        shape = (self.grid.Lmax + 1, self.grid.Nu, self.grid.Nv)
        if self.sectors.shape != shape:
            raise GridMismatch(f"sector array shape {self.sectors.shape} != {shape}")
        if self.coord not in ("log", "phys"):
            raise DomainError(f"unknown coordinate flag {self.coord!r}")
        self.sectors.setflags(write=False)

    def _factor(self) -> np.ndarray:
        return np.exp(self.params.gamma * self.grid.u)[None, :, None]

    def to_log(self) -> "DiscreteField":
        if self.coord == "log":
            return self
        return DiscreteField(self.params, self.grid, self.sectors * self._factor(), "log")

    def to_phys(self) -> "DiscreteField":
        if self.coord == "phys":
            return self
        return DiscreteField(self.params, self.grid, self.sectors / self._factor(), "phys")

    @property
    def log_values(self) -> np.ndarray:
        return self.to_log().sectors

    def with_values(self, sectors: np.ndarray, coord: str | None = None) -> "DiscreteField":
        return DiscreteField(self.params, self.grid, np.array(sectors, dtype=complex),
                             coord or self.coord)

    def __add__(self, other: "DiscreteField") -> "DiscreteField":
        _check_same(self, other)
        return DiscreteField(self.params, self.grid, self.log_values + other.log_values, "log")

    def __sub__(self, other: "DiscreteField") -> "DiscreteField":
        return self + (-1.0) * other

    def __mul__(self, c) -> "DiscreteField":
        return DiscreteField(self.params, self.grid, c * self.sectors, self.coord)

    __rmul__ = __mul__

    def conj(self) -> "DiscreteField":
        return DiscreteField(self.params, self.grid, np.conj(self.sectors), self.coord)

    def with_lmax(self, L: int) -> "DiscreteField":
        """Pad or truncate the harmonic sectors."""
        grid = replace(self.grid, Lmax=L)
        out = np.zeros((L + 1, grid.Nu, grid.Nv), dtype=complex)
        k = min(L, self.grid.Lmax) + 1
        out[:k] = self.sectors[:k]
        return DiscreteField(self.params, grid, out, self.coord)

    def sector_mass(self) -> np.ndarray:
        """Max abs value per sector (log coordinates)."""
        return np.abs(self.log_values).reshape(self.grid.Lmax + 1, -1).max(axis=1)


def _check_same(f1: DiscreteField, f2: DiscreteField):
    if f1.params != f2.params or f1.grid != f2.grid:
        raise GridMismatch("fields live on different parameters or grids")


def zeros(params: Params, grid: GridSpec) -> DiscreteField:
    return DiscreteField(params, grid, np.zeros((grid.Lmax + 1, grid.Nu, grid.Nv), complex))


def grid_points(params: Params, grid: GridSpec):
    """Physical (rho, r) at the (u, v) nodes, each of shape (Nu, Nv)."""
    d = discretization(params, grid)
    w = np.exp(grid.u)[:, None]
    return w * d.cos_theta[None, :], w * d.sin_theta[None, :]


def sample_field(params: Params, grid: GridSpec, f: Callable, zeta_independent: bool = False,
                 coord: str = "log") -> DiscreteField:
    """Sample f(rho, r, s) -> phi, with r = |x| and s the cosine of the angle of x to the x1 axis.

    Sector l receives the projection of f onto the normalized zonal harmonic Y_l.
    With ``zeta_independent`` only l = 0 is filled and f is called with s = None.
    """
    d = discretization(params, grid)
    rho, r = grid_points(params, grid)
    sectors = np.zeros((grid.Lmax + 1, grid.Nu, grid.Nv), dtype=complex)

    def checked(vals):
        vals = np.broadcast_to(np.asarray(vals), rho.shape)
        if not np.all(np.isfinite(vals)):
            raise EvalError("evaluator returned non-finite values")
        return vals

    with np.errstate(over="ignore", invalid="ignore", under="ignore"):
        if zeta_independent:
            sectors[0] = checked(f(rho, r, None))
        else:
            vals = np.stack([checked(f(rho, r, np.full_like(rho, s))) for s in d.zeta])
            proj = (d.zweights[:, None] * d.Y).T
            sectors[:] = (proj @ vals.reshape(len(d.zeta), -1)).reshape(sectors.shape)
    field = DiscreteField(params, grid, sectors, "phys")
    return field.to_log() if coord == "log" else field


def from_log_values(params: Params, grid: GridSpec, sectors) -> DiscreteField:
    arr = np.zeros((grid.Lmax + 1, grid.Nu, grid.Nv), dtype=complex)
    sectors = np.asarray(sectors, dtype=complex)
    if sectors.ndim == 1:
        arr[0] = sectors[:, None]
    elif sectors.ndim == 2:
        arr[0] = sectors
    else:
        arr[:sectors.shape[0]] = sectors
    return DiscreteField(params, grid, arr, "log")


def coefficients(field: DiscreteField) -> list[np.ndarray]:
    """Per-sector coefficient arrays c_l[u, j] against the orthonormal angular basis."""
    d = discretization(field.params, field.grid)
    xi = field.log_values
    return [xi[l] @ d.transforms[l].T for l in range(field.grid.Lmax + 1)]


def from_coefficients(params: Params, grid: GridSpec, coefs) -> DiscreteField:
    d = discretization(params, grid)
    sectors = np.zeros((grid.Lmax + 1, grid.Nu, grid.Nv), dtype=complex)
    for l, c in enumerate(coefs):
        sectors[l] = c @ d.inverses[l].T
    return DiscreteField(params, grid, sectors, "log")


def pointwise_values(field: DiscreteField) -> np.ndarray:
    """Log-coordinate values xi at (u, v, zeta) quadrature points, shape (Nu, Nv, Nz).

    For fields with only the l = 0 sector populated the zeta axis has length one.
    """
    xi = field.log_values
    if field.grid.Lmax == 0 or not np.any(xi[1:]):
        return xi[0][:, :, None]
    d = discretization(field.params, field.grid)
    return np.einsum("luv,ql->uvq", xi, d.Y)


def _zonal_weights(field: DiscreteField, nz: int) -> np.ndarray:
    if nz == 1:
        return np.ones(1)
    return discretization(field.params, field.grid).zweights


def lp_norm(field: DiscreteField, p: float) -> float:
    """Weighted L^p norm with measure omega_m rho^{m-1} drho dx."""
    if not p >= 1:
        raise DomainError(f"p must be at least 1, got {p}")
    params, grid = field.params, field.grid
    d = discretization(params, grid)
    vals = np.abs(pointwise_values(field)) ** p
    zw = _zonal_weights(field, vals.shape[2])
    profile = np.einsum("uvq,v,q->u", vals, d.vweights, zw)
    profile = profile * np.exp((params.dim - p * params.gamma) * grid.u)
    peak = profile.max()
    if peak > 0 and max(profile[0], profile[-1]) > 1e-10 * peak:
        warnings.warn(f"L^{p} integrand at window edge is {max(profile[0], profile[-1]) / peak:.1e}"
                      " of its peak", WindowWarning, stacklevel=2)
    total = params.omega_m * params.omega_n * grid.h * np.sum(profile)
    return float(total ** (1 / p))


def derivative_symbol(grid: GridSpec) -> np.ndarray:
    """Fourier symbol (divided by i) of the discrete u-derivative."""
    k = _wavenumbers(grid.Nu, grid.h)
    if grid.deriv == "fd4":
        kf = 2 * np.pi * np.fft.fftfreq(grid.Nu, grid.h)
        return (8 * np.sin(kf * grid.h) - np.sin(2 * kf * grid.h)) / (6 * grid.h)
    return k


class H1Pairing:
    """Caches the spectral data of a fixed field for repeated H1 inner products."""

    def __init__(self, field: DiscreteField):
        self.field = field
        self.params, self.grid = field.params, field.grid
        self.disc = discretization(self.params, self.grid)
        self.coefs = coefficients(field)
        self.hats = [np.fft.fft(c, axis=0) for c in self.coefs]
        self.sym2 = derivative_symbol(self.grid)[:, None] ** 2
        self.scale = self.params.omega_m * self.params.omega_n * self.grid.h

    def inner(self, other: DiscreteField, coefs=None) -> complex:
        """<other, field>."""
        _check_same(other, self.field)
        coefs = coefficients(other) if coefs is None else coefs
        g2 = self.params.gamma ** 2
        total = 0j
        for l, (c, chat) in enumerate(zip(coefs, self.hats)):
            if not np.any(c):
                continue
            total += np.sum((g2 + self.disc.mu[l])[None, :] * c * np.conj(self.coefs[l]))
            total += np.sum(self.sym2 * np.fft.fft(c, axis=0) * np.conj(chat)) / self.grid.Nu
        return complex(self.scale * total)


def h1_inner(f1: DiscreteField, f2: DiscreteField) -> complex:
    """Homogeneous H^1 inner product, linear in the first argument."""
    _check_same(f1, f2)
    return H1Pairing(f2).inner(f1)


def h1_norm(field: DiscreteField) -> float:
    return float(np.sqrt(max(h1_inner(field, field).real, 0.0)))


def l2_inner_log(f1: DiscreteField, f2: DiscreteField) -> complex:
    """Integral of xi_1 conj(xi_2) du dtheta-weight dOmega (no derivatives)."""
    _check_same(f1, f2)
    c1, c2 = coefficients(f1), coefficients(f2)
    tot = sum(np.sum(a * np.conj(b)) for a, b in zip(c1, c2))
    return complex(f1.params.omega_m * f1.params.omega_n * f1.grid.h * tot)


def _interval_integral(lo, hi, D):
    """Integral of exp(D u) over [lo, hi] (hi >= lo elementwise)."""
    hi = np.maximum(hi, lo)
    if D == 0:
        return hi - lo
    return (np.exp(D * hi) - np.exp(D * lo)) / D


def superlevel_measure(field: DiscreteField, eps: float, rho_max: float = np.inf,
                       w_max: float = np.inf) -> float:
    """Measure of {|phi| > eps, rho <= rho_max, w <= w_max}.

    |phi| is interpolated linearly in u between nodes along each (v, zeta) ray, and the
    radial weight w^{m+n} du is integrated exactly over the selected sub-intervals.
    """
    if not eps > 0:
        raise DomainError("eps must be positive")
    params, grid = field.params, field.grid
    d = discretization(params, grid)
    u = grid.u
    h = grid.h
    D = params.dim
    phys = np.abs(pointwise_values(field)) * np.exp(-params.gamma * u)[:, None, None]
    zw = _zonal_weights(field, phys.shape[2])
    with np.errstate(divide="ignore"):
        ucut_v = np.minimum(np.log(rho_max) - np.log(d.cos_theta), np.log(w_max))
    total = 0.0
    lo_edge, hi_edge = u[0] - h / 2, u[-1] + h / 2
    for k in range(grid.Nv):
        cut = ucut_v[k]
        g = phys[:, k, :]                       # (Nu, nz)
        a, b = g[:-1], g[1:]
        # sub-interval of each segment where the linear interpolant exceeds eps
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            tc = np.where(a != b, (eps - a) / (b - a), np.inf)
        t0 = np.where(a > eps, 0.0, np.where(b > eps, np.clip(tc, 0, 1), 1.0))
        t1 = np.where(a > eps, np.where(b > eps, 1.0, np.clip(tc, 0, 1)), np.where(b > eps, 1.0, 0.0))
        lo = u[:-1, None] + h * t0
        hi = np.minimum(u[:-1, None] + h * t1, cut)
        seg = _interval_integral(lo, np.maximum(hi, lo), D)
        # half cells beyond the end nodes carry the end values
        first = np.where(g[0] > eps, _interval_integral(lo_edge, min(u[0], cut), D), 0.0)
        last = np.where(g[-1] > eps, _interval_integral(u[-1], min(hi_edge, cut), D), 0.0)
        per_z = seg.sum(axis=0) + first + last
        total += d.vweights[k] * float(np.dot(per_z, zw))
    return float(params.omega_m * params.omega_n * total)


# field files

def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_field(field: DiscreteField, path) -> Path:
    """Write a JSON manifest plus one CSV per sector next to it."""
    path = Path(path)
    if path.suffix != ".json":
        path = path.with_suffix(".json")
    path.parent.mkdir(parents=True, exist_ok=True)
    g = field.grid
    manifest = {"m": field.params.m, "n": field.params.n, "U": g.U, "Nu": g.Nu, "Nv": g.Nv,
                "Lmax": g.Lmax, "coord": field.coord, "deriv": g.deriv,
                "sectors": [f"{path.stem}.l{l}.csv" for l in range(g.Lmax + 1)]}
    path.write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    for l, name in enumerate(manifest["sectors"]):
        with open(path.parent / name, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            for row in field.sectors[l]:
                w.writerow([f"{_fmt(z.real)},{_fmt(z.imag)}" for z in row])
    return path


def read_field(path) -> DiscreteField:
    path = Path(path)
    man = json.loads(path.read_text())
    params = make_params(man["m"], man["n"])
    grid = GridSpec(float(man["U"]), int(man["Nu"]), int(man["Nv"]), int(man["Lmax"]),
                    man.get("deriv", "fourier"))
    names = man.get("sectors") or [f"{path.stem}.l{l}.csv" for l in range(grid.Lmax + 1)]
    sectors = np.zeros((grid.Lmax + 1, grid.Nu, grid.Nv), dtype=complex)
    for l, name in enumerate(names):
        with open(path.parent / name, newline="") as fh:
            rows = list(csv.reader(fh))
        if len(rows) != grid.Nu or any(len(r) != grid.Nv for r in rows):
            raise GridMismatch(f"sector file {name} does not match the manifest grid")
        for i, row in enumerate(rows):
            for j, cell in enumerate(row):
                re, im = cell.split(",")
                sectors[l, i, j] = complex(float(re), float(im))
    return DiscreteField(params, grid, sectors, man["coord"])
