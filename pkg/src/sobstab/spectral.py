"""Sector-wise Galerkin discretization of C^2 A - L at the extremal and its spectra.

In log coordinates every potential depends on u alone, so inside a sector l the
problem splits further into one u-block per angular basis function j.
"""
from __future__ import annotations

import warnings
from functools import lru_cache
from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy.linalg import LinAlgError, circulant, eigh, subspace_angles
from scipy.special import beta as beta_fn, betainc

from .errors import DomainError, NumericalError, WindowWarning
from .extremals import ExtremalCoords, extremal_field, extremal_profile
from .fields import (DiscreteField, GridSpec, angular_eigenvalues, coefficients, default_grid,
                     derivative_symbol, discretization, sector_basis)
from .params_special import (Params, harmonic_multiplicity, jacobi_basis, jacobi_operator,
                             sigma, tau)

VARIANTS = ("A", "Ahat", "X", "Y", "Z")
NULL_TOL = 1e-6


@dataclass
class SectorOperator:
    """Block-diagonal pair (K, M); block j acts on the u-profile of angular function j.

    u-blocks are generated on demand from the shared stiffness, potential and angular
    eigenvalues.  For variants Y and Z there is one explicit angular block.
    """

    params: Params
    grid: GridSpec
    l: int
    part: str
    variant: str
    t: float
    basis: str
    center: float = 0.0
    explicit: list | None = dc_field(default=None, repr=False)     # [(K, M)] for Y, Z, X
    stiffness: np.ndarray | None = dc_field(default=None, repr=False)
    potential: np.ndarray | None = dc_field(default=None, repr=False)
    mu: np.ndarray | None = None
    rank_one: np.ndarray | None = dc_field(default=None, repr=False)
    floors: np.ndarray | None = None   # per-block lower bounds of the Rayleigh quotient

    @property
    def n_blocks(self) -> int:
        return len(self.explicit) if self.explicit is not None else len(self.mu)

    def block(self, j: int):
        if self.explicit is not None:
            return self.explicit[j]
        p = self.params
        w = p.omega_m * p.omega_n * self.grid.h
        M = w * self.stiffness
        M[np.diag_indices_from(M)] += w * (p.gamma ** 2 + self.mu[j])
        K = p.C ** 2 * M
        K[np.diag_indices_from(K)] -= w * self.potential
        if j == 0 and self.rank_one is not None:
            ts = p.two_star
            K += (ts - 2) * p.C ** (2 - 2 * ts) * np.outer(self.rank_one, self.rank_one)
        return K, M

    @property
    def blocks(self):
        return [self.block(j) for j in range(self.n_blocks)]

    def matrices(self):
        """Sparse block-diagonal K and M."""
        from scipy.sparse import block_diag
        bl = self.blocks
        return (block_diag([k for k, _ in bl], format="csr"),
                block_diag([m for _, m in bl], format="csr"))

    def solve_mass(self, j: int, rhs: np.ndarray) -> np.ndarray:
        """M_j^{-1} rhs; u-blocks are circulant, so this is a division in Fourier space."""
        if self.explicit is not None:
            return np.linalg.solve(self.explicit[j][1], rhs)
        p = self.params
        w = p.omega_m * p.omega_n * self.grid.h
        sym = w * (_stiffness_symbol(self.grid) + p.gamma ** 2 + self.mu[j])
        out = np.fft.ifft(np.fft.fft(rhs) / sym)
        return out if np.iscomplexobj(rhs) else out.real

    def _map(self, coefs: np.ndarray, which: int) -> np.ndarray:
        out = np.zeros_like(coefs, dtype=complex)
        for j in range(self.n_blocks):
            if np.any(coefs[:, j]):
                out[:, j] = self.block(j)[which] @ coefs[:, j]
        return out

    def apply(self, coefs: np.ndarray) -> np.ndarray:
        """K applied to a coefficient array of shape (Nu, n_blocks)."""
        return self._map(coefs, 0)

    def mass(self, coefs: np.ndarray) -> np.ndarray:
        return self._map(coefs, 1)

    def form(self, coefs, which: str = "K") -> float:
        app = self.apply(coefs) if which == "K" else self.mass(coefs)
        return float(np.real(np.vdot(coefs, app)))

    def symmetry_defect(self) -> float:
        return max(max(np.abs(K - K.T).max(), np.abs(M - M.T).max()) for K, M in self.blocks)


def _potential(params: Params, u: np.ndarray, t: float, part: str) -> np.ndarray:
    C = params.C
    p = params.two_star
    xi = extremal_profile(params, u, t)
    V = C ** (2 - p) * xi ** (p - 2)
    return (p - 1) * V if part == "Re" else V


@lru_cache(maxsize=16)
def _stiffness_symbol(grid: GridSpec) -> np.ndarray:
    return derivative_symbol(grid) ** 2


def _stiffness(grid: GridSpec) -> np.ndarray:
    """D^T D for the periodic derivative; circulant with symbol |d(k)|^2."""
    col = np.fft.ifft(_stiffness_symbol(grid)).real
    return circulant(col)


def _window_center(t: float, recenter: bool) -> float:
    return -np.log(t) if recenter else 0.0


def assemble_sector(params: Params, t: float = 1.0, l: int = 0, part: str = "Re",
                    variant: str = "A", grid: GridSpec | None = None,
                    recenter: bool = True) -> SectorOperator:
    """Galerkin matrices for sector l.

    Variant A uses the basis sin^l q_j, on which the angular part of A is diagonal.
    Variant Ahat uses plain Jacobi polynomials, with angular eigenvalues sigma_j + tau_l.
    X is the u-only radial block (no angular term, identity mass).  Y and Z are the
    angular factors C^2 (Jacobi operator) and C^2 tau_l csc^2, assembled by quadrature.
    With ``recenter`` the u-window is centred on the bump at u = -ln t.
    """
    if variant not in VARIANTS:
        raise DomainError(f"unknown operator variant {variant!r}")
    if part not in ("Re", "Im"):
        raise DomainError(f"part must be Re or Im, got {part!r}")
    if not t > 0:
        raise DomainError("t must be positive")
    grid = default_grid(params, Lmax=max(l, 0)) if grid is None else grid
    if l < 0 or l > grid.Lmax:
        raise DomainError(f"sector {l} outside 0..{grid.Lmax}")
    C2 = params.C ** 2
    if variant == "Y":
        return _assemble_Y(params, grid, t)
    if variant == "Z":
        return _assemble_Z(params, grid, l, t)

    center = _window_center(t, recenter)
    u = grid.u + center
    V = _potential(params, u, t, part)
    S = _stiffness(grid)
    w = params.omega_m * params.omega_n * grid.h
    I = np.eye(grid.Nu)
    g2 = params.gamma ** 2

    if variant == "X":
        K = w * (C2 * (g2 * I + S) - np.diag(V))
        return SectorOperator(params, grid, 0, part, "X", t, "u-grid", center, [(K, w * I)])

    if variant == "A":
        mu = angular_eigenvalues(params, l, grid.Nv)
        basis = f"u-grid x sin^{l} Jacobi({params.jacobi_ab[0] + l}, {params.jacobi_ab[1]})"
    else:
        mu = sigma(params, np.arange(grid.Nv)) + tau(params, l)
        basis = f"u-grid x Jacobi{params.jacobi_ab}"
    mu = np.asarray(mu, dtype=float)
    rank_one = None
    if part == "Re" and l == 0:
        # projection part of L^Re; j = 0 is the constant angular function
        p = params.two_star
        rank_one = w * np.sqrt(params.angular_mass) * extremal_profile(params, u, t) ** (p - 1)
    # M_j >= w (gamma^2 + mu_j) and the rank-one part is positive, so block j has no
    # eigenvalue below C^2 - max V / (gamma^2 + mu_j)
    floors = C2 - V.max() / (g2 + mu)
    return SectorOperator(params, grid, l, part, variant, t, basis, center, None, S, V, mu,
                          rank_one, floors)


def _fine_rule(params: Params, l: int, J: int):
    a, b = params.jacobi_ab
    fine = jacobi_basis(2 * J + l + 8, a, b)
    return fine.nodes, fine.weights * 2.0 ** (-params.dim / 2)


def _assemble_Y(params: Params, grid: GridSpec, t: float) -> SectorOperator:
    a, b = params.jacobi_ab
    J = grid.Nv
    basis = jacobi_basis(J, a, b)
    v, wq = _fine_rule(params, 0, J)
    scale = 2.0 ** (params.dim / 4)       # orthonormal against the theta measure
    P, D1, D2 = (scale * basis.eval(v, k) for k in (0, 1, 2))
    YP = params.C ** 2 * jacobi_operator(params, P, D1, D2, v)
    K = P.T @ (wq[:, None] * YP)
    M = P.T @ (wq[:, None] * P)
    return SectorOperator(params, grid, 0, "Re", "Y", t, f"Jacobi{params.jacobi_ab}",
                          explicit=[(0.5 * (K + K.T), M)])


def _assemble_Z(params: Params, grid: GridSpec, l: int, t: float) -> SectorOperator:
    J = grid.Nv
    bl, scale = sector_basis(params, l, J)
    v, wq = _fine_rule(params, l, J)
    s2 = (1 - v) / 2
    Phi = scale * bl.eval(v) * (s2 ** (l / 2))[:, None]
    M = Phi.T @ (wq[:, None] * Phi)
    # csc^2 = 1 / sin^2 = 2 / (1 - v); for l >= 1 the product with sin^{2l} is polynomial
    csc2 = np.where(s2 > 0, 1 / s2, 0.0) if l else np.zeros_like(v)
    K = params.C ** 2 * tau(params, l) * Phi.T @ (wq[:, None] * csc2[:, None] * Phi)
    return SectorOperator(params, grid, l, "Re", "Z", t,
                          f"sin^{l} Jacobi({params.jacobi_ab[0] + l}, {params.jacobi_ab[1]})",
                          explicit=[(K, M)])


def angular_forms(params: Params, l: int, coefs: np.ndarray) -> tuple[float, float]:
    """Angular quadratic forms of A and Ahat for sin^l sum_j c_j q_j, by direct quadrature.

    A: |d_theta xi|^2 + tau_l csc^2 |xi|^2;  Ahat: |d_theta xi|^2 + tau_l |xi|^2, both
    integrated against cos^{m-1} sin^{n-1} dtheta; |d_theta xi|^2 = 4 (1 - v^2) |xi_v|^2.
    """
    coefs = np.asarray(coefs)
    J = coefs.size
    bl, scale = sector_basis(params, l, J)
    v, wq = _fine_rule(params, l, J)
    s2 = (1 - v) / 2
    q = scale * bl.eval(v) @ coefs
    dq = scale * bl.eval(v, 1) @ coefs
    sl = s2 ** (l / 2)
    xi = sl * q
    # d/dv s2^{l/2} = -(l/4) s2^{l/2 - 1}
    dsl = -(l / 4) * s2 ** (l / 2 - 1) if l else np.zeros_like(v)
    xv = dsl * q + sl * dq
    grad = 4 * (1 - v * v) * np.abs(xv) ** 2
    tl = tau(params, l)
    a_form = float(np.sum(wq * (grad + tl / s2 * np.abs(xi) ** 2)))
    ahat_form = float(np.sum(wq * (grad + tl * np.abs(xi) ** 2)))
    return a_form, ahat_form


def apply_Y(params: Params, values: np.ndarray, grid: GridSpec | None = None) -> np.ndarray:
    """C^2 times the Jacobi operator, applied spectrally to values at the v-nodes."""
    grid = default_grid(params) if grid is None else grid
    a, b = params.jacobi_ab
    basis = jacobi_basis(grid.Nv, a, b)
    V = basis.eval(basis.nodes)
    c = np.linalg.solve(V, values)
    return params.C ** 2 * (V @ (sigma(params, np.arange(grid.Nv)) * c))


def y_mode(params: Params, v) -> np.ndarray:
    """(n - m)/(m + n) + v: the first non-constant zonal eigenfunction of Y."""
    return (params.n - params.m) / params.dim + np.asarray(v)


# eigensolves

@dataclass
class EigenResult:
    values: np.ndarray
    block_index: np.ndarray           # angular index j of each eigenpair
    vectors: list                     # u-profiles, M_j-orthonormal
    op: SectorOperator = dc_field(repr=False)

    def coefficient_array(self, i: int) -> np.ndarray:
        out = np.zeros((self.op.grid.Nu, self.op.n_blocks), dtype=complex)
        out[:, self.block_index[i]] = self.vectors[i]
        return out

    def field(self, i: int) -> DiscreteField:
        """Eigenvector i as a field (sector l only); requires an A-variant operator."""
        from .fields import from_coefficients
        if self.op.variant != "A":
            raise DomainError("fields can only be built from variant-A eigenvectors")
        g = self.op.grid
        coefs = [np.zeros((g.Nu, g.Nv), dtype=complex) for _ in range(g.Lmax + 1)]
        coefs[self.op.l] = self.coefficient_array(i)
        return from_coefficients(self.op.params, g, coefs)


def eigensolve(op: SectorOperator, k: int) -> EigenResult:
    """k smallest generalized eigenpairs of K x = lambda M x, merged across blocks."""
    size = op.block(0)[0].shape[0]
    total = size * op.n_blocks
    if not 1 <= k <= total:
        raise DomainError(f"k must be in 1..{total}")
    vals, idx, vecs = [], [], []
    for j in range(op.n_blocks):
        if op.floors is not None and len(vals) >= k and op.floors[j] > np.sort(vals)[k - 1]:
            continue
        K, M = op.block(j)
        kk = min(k, K.shape[0])
        try:
            w, X = eigh(K, M, subset_by_index=[0, kk - 1])
        except (LinAlgError, ValueError) as exc:
            raise NumericalError(f"generalized eigensolve failed in block {j}: {exc}") from exc
        vals.extend(w)
        idx.extend([j] * kk)
        vecs.extend(X.T)
    order = np.argsort(vals, kind="stable")[:k]
    return EigenResult(np.asarray(vals)[order], np.asarray(idx)[order],
                       [vecs[i] for i in order], op)


def _dual_residual(op: SectorOperator, coefs: np.ndarray) -> float:
    """|K v|_{M^-1} / |v|_M: the scale-free residual of a candidate null vector."""
    num = den = 0.0
    for j in range(op.n_blocks):
        c = coefs[:, j]
        if not np.any(c):
            continue
        K, M = op.block(j)
        r = K @ c
        num += float(np.real(np.vdot(r, op.solve_mass(j, r))))
        den += float(np.real(np.vdot(c, M @ c)))
    return float(np.sqrt(num / den)) if den > 0 else np.inf


def nullmode_residuals(params: Params, t: float = 1.0, grid: GridSpec | None = None) -> dict:
    """Residuals of F, dF/du (Re, l=0), F (Im, l=0) and dF/dx1 (Re, l=1)."""
    grid = default_grid(params, Lmax=1) if grid is None else grid
    if grid.Lmax < 1:
        grid = GridSpec(grid.U, grid.Nu, grid.Nv, 1, grid.deriv)
    coords = ExtremalCoords(t=t)
    # the operators are built on a window centred at -ln t, so sample the modes there
    sample = ExtremalCoords(t=1.0)
    F = coefficients(extremal_field(params, sample, grid))
    Fu = coefficients(extremal_field(params, sample, grid, "d_u"))
    Fx = coefficients(extremal_field(params, sample, grid, "d_x1"))
    re0 = assemble_sector(params, coords.t, 0, "Re", "A", grid)
    im0 = assemble_sector(params, coords.t, 0, "Im", "A", grid)
    re1 = assemble_sector(params, coords.t, 1, "Re", "A", grid)
    return {"F_re": _dual_residual(re0, F[0]),
            "Fu_re": _dual_residual(re0, Fu[0]),
            "F_im": _dual_residual(im0, F[0]),
            "Fx1_re_l1": _dual_residual(re1, Fx[1])}


def random_residual(params: Params, seed: int = 0, grid: GridSpec | None = None) -> float:
    grid = default_grid(params) if grid is None else grid
    op = assemble_sector(params, 1.0, 0, "Re", "A", grid)
    rng = np.random.default_rng(seed)
    c = rng.standard_normal((grid.Nu, grid.Nv))
    return _dual_residual(op, c / np.sqrt(op.form(c, "M")))


def null_subspace_angle(res: EigenResult, modes: list) -> float:
    """Largest principal angle between the null eigenvectors and span(modes), in the M inner product."""
    op = res.op
    null = [i for i, v in enumerate(res.values) if v < NULL_TOL * op.params.C ** 2]
    if not null:
        return np.pi / 2
    # both sets live in angular block 0 for the l = 0 modes considered here
    M = op.block(0)[1]
    R = np.linalg.cholesky(M).T
    E = np.column_stack([res.vectors[i] if res.block_index[i] == 0 else np.zeros(op.grid.Nu)
                         for i in null])
    Q = np.column_stack([m[:, 0] for m in modes])
    return float(np.max(subspace_angles(R @ E, R @ np.real(Q))))


# closed forms

def poschl_teller_spectrum(params: Params) -> list[dict]:
    """Bound states C^2 (gamma^2 - (gamma + 1 - k)^2) of the radial block X."""
    g, C2 = params.gamma, params.C ** 2
    out = []
    k = 0
    while g + 1 - k > 0:
        out.append({"k": k, "eigenvalue": C2 * (g * g - (g + 1 - k) ** 2),
                    "zero_mode": k == 1, "eigenfunction": "dF/du" if k == 1 else None})
        k += 1
    return out


# trace sums

@dataclass
class TraceResult:
    d: int
    caps: tuple
    partial: float
    tail_bound: float
    converged: bool

    def __iter__(self):
        return iter((self.partial, self.tail_bound, self.converged))


def _trace_partial(params: Params, d: float, j_cap: int, l_cap: int) -> float:
    sj = sigma(params, np.arange(j_cap + 1, dtype=float))
    total = 0.0
    step = max(1, 2 ** 22 // (j_cap + 1))
    for start in range(0, l_cap + 1, step):
        l = np.arange(start, min(l_cap + 1, start + step))
        mult = np.array([harmonic_multiplicity(params.n, int(x)) for x in l], dtype=float)
        lam = params.gamma ** 2 + tau(params, l.astype(float))[:, None] + sj[None, :]
        total += float(np.sum(mult[:, None] * lam ** (-float(d))))
    return total


def _j_tail(A: np.ndarray, d: float, c: float) -> np.ndarray:
    """Integral over x > c of (A + 4x^2)^{-d}, via the incomplete beta function."""
    z = A / (A + 4 * c * c)
    return A ** (0.5 - d) / 4 * beta_fn(d - 0.5, 0.5) * betainc(d - 0.5, 0.5, z)


def trace_sum(params: Params, d: int, j_cap: int = 1024, l_cap: int = 1024) -> TraceResult:
    """Sum of mult_l (gamma^2 + tau_l + sigma_j)^{-d} over j <= j_cap, l <= l_cap, plus a tail bound.

    The bound uses tau_l >= l^2, sigma_j >= 4 j^2 and mult_l <= 2 (l + 1)^{n-2}; it is
    infinite when those majorants stop being summable (d <= n/2).
    """
    if d < 1:
        raise DomainError("d must be at least 1")
    if j_cap < 16 or l_cap < 16:
        raise DomainError("caps must be at least 16")
    n, g2 = params.n, params.gamma ** 2
    partial = _trace_partial(params, d, j_cap, l_cap)
    # j > j_cap for every l <= l_cap
    l = np.arange(l_cap + 1)
    mult = np.array([harmonic_multiplicity(n, int(x)) for x in l], dtype=float)
    tail = float(np.sum(mult * _j_tail(g2 + tau(params, l).astype(float), d, j_cap)))
    # l > l_cap, all j: sum_j (A + 4 j^2)^{-d} <= A^{-d} + A^{1/2-d} B(1/2, d-1/2)/4 with A >= l^2,
    # then sum over l of 2 (2l)^{n-2} [l^{-2d} + K l^{1-2d}] bounded by its integral from l_cap
    e1, e2 = n - 2 - 2 * d, n - 1 - 2 * d
    if e2 >= -1:
        return TraceResult(d, (j_cap, l_cap), partial, np.inf, False)
    K = beta_fn(0.5, d - 0.5) / 4
    pref = 2 * 2.0 ** (n - 2)
    tail += pref * (l_cap ** (e1 + 1) / -(e1 + 1) + K * l_cap ** (e2 + 1) / -(e2 + 1))
    return TraceResult(d, (j_cap, l_cap), partial, tail, bool(tail < 1e-6 * partial))


def trace_divergence_ratios(params: Params, d: int, cap: int = 16, doublings: int = 5) -> list[float]:
    """(S(4c) - S(2c)) / (S(2c) - S(c)) along successive cap doublings.

    Ratios near 1 mean every doubling adds the same amount, i.e. logarithmic growth.
    """
    sums = [_trace_partial(params, d, cap * 2 ** i, cap * 2 ** i) for i in range(doublings + 1)]
    inc = np.diff(sums)
    return [float(inc[i + 1] / inc[i]) for i in range(len(inc) - 1)]


# reports

@dataclass
class SpectralReport:
    params: Params
    t: float
    grid: GridSpec
    sectors: list                 # [{"l", "part", "eigenvalues"}]
    null_dimension: int           # null eigenvalues counted once per sector
    null_dimension_weighted: int  # counted with spherical-harmonic multiplicity
    gap: float
    residuals: dict

    def as_dict(self) -> dict:
        return {"params": self.params.as_dict(), "t": self.t, "grid": self.grid.as_dict(),
                "sectors": self.sectors, "null_dimension": self.null_dimension,
                "null_dimension_weighted": self.null_dimension_weighted, "gap": self.gap,
                "residuals": self.residuals}


def sector_spectra(params: Params, t: float = 1.0, grid: GridSpec | None = None, k: int = 8,
                   recenter: bool = True) -> dict:
    grid = default_grid(params, Lmax=1) if grid is None else grid
    out = {}
    for l in range(grid.Lmax + 1):
        for part in ("Re", "Im"):
            op = assemble_sector(params, t, l, part, "A", grid, recenter)
            out[(l, part)] = eigensolve(op, k)
    return out


def spectral_report(params: Params, t: float = 1.0, grid: GridSpec | None = None,
                    k: int = 8) -> SpectralReport:
    grid = default_grid(params, Lmax=1) if grid is None else grid
    spectra = sector_spectra(params, t, grid, k)
    C2 = params.C ** 2
    sectors, null, nullw, above = [], 0, 0, []
    for (l, part), res in spectra.items():
        vals = res.values[res.values < C2]
        nz = int(np.sum(vals < NULL_TOL * C2))
        null += nz
        nullw += nz * harmonic_multiplicity(params.n, l)
        above.extend(vals[vals >= NULL_TOL * C2])
        sectors.append({"l": l, "part": part, "eigenvalues": vals.tolist(), "null": nz})
    gap = float(min(above)) if above else float("nan")
    return SpectralReport(params, t, grid, sectors, null, nullw, gap,
                          nullmode_residuals(params, t, grid))


def t_invariance_check(params: Params, t1: float, t2: float, k: int = 8,
                       grid: GridSpec | None = None, recenter: bool = True) -> float:
    """Largest eigenvalue discrepancy between the spectra at t1 and t2 over all sectors."""
    if not (t1 > 0 and t2 > 0):
        raise DomainError("t must be positive")
    grid = default_grid(params, Lmax=1) if grid is None else grid
    for t in (t1, t2):
        offset = 0.0 if recenter else abs(np.log(t))
        if grid.U - abs(offset) < 5 / params.gamma:
            warnings.warn(f"bump centre {offset:.3g} lies within 5 decay lengths of the window edge",
                          WindowWarning, stacklevel=2)
    s1 = sector_spectra(params, t1, grid, k, recenter)
    s2 = sector_spectra(params, t2, grid, k, recenter)
    return float(max(np.max(np.abs(s1[key].values - s2[key].values)) for key in s1))
