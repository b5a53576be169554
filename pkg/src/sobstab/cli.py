"""Command-line front end.

Every command writes a versioned JSON report (or CSV rows for the scan commands)
with the parameters, grid, seed and a SHA-256 hash of the inputs embedded.
Exit codes: 0 success, 1 acceptance failure, 2 bad arguments, 3 non-convergence.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field as dc_field
from pathlib import Path

import numpy as np

from .errors import (BracketError, ConvergenceError, DomainError, EvalError, GridMismatch,
                     NormalizationError, NullField, NumericalError, UnsupportedField)

SCHEMA = 1
COMMANDS = ("constants", "deficit", "distance", "bliss", "taylor", "spectrum", "trace",
            "ccscan", "stability", "verify-all")


# serialization

def _render(obj, indent: int = 0) -> str:
    pad, inner = " " * indent, " " * (indent + 1)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{inner}{json.dumps(str(k))}: {_render(v, indent + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple)) for v in obj):
            return "[" + ", ".join(_render(v) for v in obj) + "]"
        return "[\n" + ",\n".join(inner + _render(v, indent + 1) for v in obj) + "\n" + pad + "]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x) or math.isinf(x):
            return json.dumps(str(x))            # JSON has no literal for these
        return format(x, ".17g")
    if isinstance(obj, (complex, np.complexfloating)):
        return _render({"re": obj.real, "im": obj.imag}, indent)
    return json.dumps(str(obj))


def dumps(obj) -> str:
    return _render(obj) + "\n"


def content_hash(config: dict, extra: bytes = b"") -> str:
    h = hashlib.sha256(json.dumps(config, sort_keys=True, default=str).encode())
    h.update(extra)
    return h.hexdigest()


# configuration

@dataclass
class RunConfig:
    command: str
    m: float = 2.0
    n: int = 2
    t: float = 1.0
    U: float | None = None
    Nu: int | None = None
    Nv: int = 24
    Lmax: int | None = None
    seed: int = 0
    output: str | None = None
    format: str = "json"
    options: dict = dc_field(default_factory=dict)

    def params(self):
        from .params_special import make_params
        return make_params(self.m, self.n)

    def grid(self, Lmax_default: int = 0):
        from .fields import default_grid
        L = Lmax_default if self.Lmax is None else self.Lmax
        return default_grid(self.params(), Lmax=L, Nu=self.Nu, Nv=self.Nv, U=self.U)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--m", type=float, default=2.0, help="radial dimension m > 0 (default 2)")
    common.add_argument("--n", type=int, default=2, help="x dimension n >= 2 (default 2)")
    common.add_argument("--t", type=float, default=1.0, help="extremal scale t > 0 (default 1)")
    common.add_argument("--U", type=float, help="u-window half width (default max(30/gamma, 20))")
    common.add_argument("--Nu", type=int, help="u nodes (default: spacing <= 0.12, at least 257)")
    common.add_argument("--Nv", type=int, default=24, help="Jacobi order (default 24)")
    common.add_argument("--lmax", type=int, dest="Lmax", help="highest harmonic sector")
    common.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    common.add_argument("--output", "-o", help="output path (default stdout)")
    common.add_argument("--format", choices=("json", "csv"), default="json")

    parser = argparse.ArgumentParser(prog="sobstab",
                                     description="Sharp Sobolev stability toolkit.")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("constants", parents=[common], help="exponents, C and k0")
    for name in ("deficit", "distance"):
        sp = sub.add_parser(name, parents=[common], help=f"{name} of a field")
        sp.add_argument("--field", help="field manifest (.json) written by write_field")
        sp.add_argument("--profile", choices=("extremal", "gaussian", "perturbed"),
                        default="perturbed", help="built-in field when --field is absent")
        sp.add_argument("--eps", type=float, default=0.1, help="perturbation size for 'perturbed'")
    sp = sub.add_parser("bliss", parents=[common], help="radial p-Sobolev ratio vs closed form")
    sp.add_argument("--p", type=float, default=2.0)
    sp.add_argument("--N", type=float, default=4.0)
    sp = sub.add_parser("taylor", parents=[common], help="remainder-bound constants and trials")
    sp.add_argument("--p", type=float, default=4.0)
    sp.add_argument("--trials", type=int, default=1000)
    sp.add_argument("--dim", type=int, default=64)
    sp = sub.add_parser("spectrum", parents=[common], help="sector spectra at the extremal")
    sp.add_argument("--k", type=int, default=8)
    sp.add_argument("--variant", choices=("A", "Ahat", "X", "Y", "Z"), default="A")
    sp = sub.add_parser("trace", parents=[common], help="trace sum with tail bound")
    sp.add_argument("--d", type=int, default=2)
    sp.add_argument("--caps", type=int, default=1024)
    sp = sub.add_parser("ccscan", parents=[common], help="half-mass dilation scan")
    sp.add_argument("--c", type=float, default=0.5)
    sp.add_argument("--field", help="x-radial field manifest; default a unit Gaussian ring")
    sp = sub.add_parser("stability", parents=[common], help="deficit vs distance scan")
    sp.add_argument("--points", type=int, default=12)
    sub.add_parser("verify-all", parents=[common], help="run the acceptance suite")
    return parser


def parse_config(argv) -> RunConfig:
    ns = vars(build_parser().parse_args(argv))
    base = {k: ns.pop(k) for k in ("command", "m", "n", "t", "U", "Nu", "Nv", "Lmax", "seed",
                                   "output", "format")}
    return RunConfig(**base, options=ns)


# commands

def _field_from(cfg: RunConfig, Lmax_default: int = 0):
    from .extremals import ExtremalCoords, extremal_field
    from .fields import read_field, sample_field
    path = cfg.options.get("field")
    if path:
        return read_field(path), Path(path).read_bytes()
    p = cfg.params()
    grid = cfg.grid(Lmax_default)
    prof = cfg.options.get("profile", "gaussian")
    F = extremal_field(p, ExtremalCoords(1.0, cfg.t), grid)
    if prof == "extremal":
        return F, b""
    bump = sample_field(p, grid, lambda rho, r, _s: np.exp(-rho ** 2 - 2 * r ** 2),
                        zeta_independent=True)
    if prof == "gaussian":
        return bump, b""
    return F + cfg.options.get("eps", 0.1) * bump, b""


def cmd_constants(cfg):
    p = cfg.params()
    return {"params": p.as_dict(), "C": p.C, "k0": p.k0, "omega_m": p.omega_m,
            "omega_n": p.omega_n}, None


def cmd_deficit(cfg):
    from .extremals import deficit
    from .fields import h1_norm, lp_norm
    f, raw = _field_from(cfg)
    p = f.params
    return {"deficit": deficit(f), "h1_norm": h1_norm(f), "lp_norm": lp_norm(f, p.two_star),
            "grid": f.grid.as_dict(), "params": p.as_dict()}, raw


def cmd_distance(cfg):
    from .extremals import distance_to_manifold
    f, raw = _field_from(cfg)
    r = distance_to_manifold(f)
    return {"delta": r.delta, "z": r.argmin.z, "t": r.argmin.t, "x0": list(r.argmin.x0),
            "orth_residuals": list(r.orth_residuals), "converged": r.converged,
            "grid": f.grid.as_dict(), "params": f.params.as_dict()}, raw


def cmd_bliss(cfg):
    from .acceptance import talenti_constant
    from .extremals import bliss_constant
    p, N = cfg.options["p"], cfg.options["N"]
    if not 1 < p < N:
        raise DomainError("need 1 < p < N")
    return {"p": p, "N": N, "ratio": bliss_constant(p, N),
            "closed_form": talenti_constant(p, N)}, None


def cmd_taylor(cfg):
    from .taylor import WeightedSpace, remainder_check, taylor_constants, taylor_trials
    p = cfg.options["p"]
    c = taylor_constants(p)
    rng = np.random.default_rng(cfg.seed)
    dim = cfg.options["dim"]
    if dim < 1:
        raise DomainError("--dim must be positive")
    space = WeightedSpace(rng.uniform(0.1, 2.0, dim))
    f = rng.standard_normal(dim)
    f /= space.norm(f, p)
    psi = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    psi /= space.norm(psi, p)
    rep = remainder_check(f, psi, p, np.linspace(-1, 1, 21), space)
    trials = taylor_trials(cfg.options["trials"], cfg.seed, max_dim=dim, p_range=(2.0, max(p, 2.0 + 1e-9)))
    return {"p": p, "beta": c.beta, "kappa": c.kappa, "kappa_branches": c.branches,
            "kappa_exact": {k: str(v) for k, v in c.exact.items()},
            "report": {"eps": rep.eps_list.tolist(), "lhs": rep.lhs.tolist(),
                       "rhs": rep.rhs.tolist(), "margins": rep.margins.tolist(),
                       "pass": rep.passed},
            "trials": trials}, None


def cmd_spectrum(cfg):
    from .params_special import harmonic_multiplicity
    from .spectral import assemble_sector, eigensolve, spectral_report
    p = cfg.params()
    k, variant = cfg.options["k"], cfg.options["variant"]
    if variant == "A":
        rep = spectral_report(p, cfg.t, cfg.grid(1), k)
        return rep.as_dict(), None
    grid = cfg.grid(1)
    out = []
    sectors = [0] if variant in ("X", "Y") else range(grid.Lmax + 1)
    for l in sectors:
        for part in (("Re",) if variant in ("Y", "Z") else ("Re", "Im")):
            op = assemble_sector(p, cfg.t, l, part, variant, grid)
            res = eigensolve(op, min(k, op.n_blocks * op.block(0)[0].shape[0]))
            out.append({"l": l, "part": part, "eigenvalues": res.values.tolist(),
                        "multiplicity": harmonic_multiplicity(p.n, l)})
    return {"params": p.as_dict(), "variant": variant, "grid": grid.as_dict(),
            "sectors": out}, None


def cmd_trace(cfg):
    from .spectral import trace_divergence_ratios, trace_sum
    p = cfg.params()
    d, caps = cfg.options["d"], cfg.options["caps"]
    r = trace_sum(p, d, caps, caps)
    return {"params": p.as_dict(), "d": d, "caps": caps, "partial": r.partial,
            "tail_bound": r.tail_bound, "converged": r.converged,
            "doubling_ratios": trace_divergence_ratios(p, d, 16, 5)}, None


def cmd_ccscan(cfg):
    from .cctools import dilate, half_mass_sigma, normalized, rearrange_x, to_slices
    from .fields import lp_norm, read_field, sample_field
    p = cfg.params()
    raw = b""
    if cfg.options.get("field"):
        f = read_field(cfg.options["field"])
        raw = Path(cfg.options["field"]).read_bytes()
        p = f.params
    else:
        f = sample_field(p, cfg.grid(0), lambda rho, r, _s: np.exp(-rho ** 2 - 4 * (r - 1) ** 2),
                         zeta_independent=True)
    f = f * (1 / lp_norm(f, p.two_star))
    res = half_mass_sigma(f, cfg.options["c"])
    sf = normalized(to_slices(f), p.two_star)
    sigmas = np.geomspace(1e-2, 1e2, 41)
    rows = [(s, rearrange_x(dilate(sf, s)).mass_within(1.0, p.two_star)) for s in sigmas]
    summary = {"params": p.as_dict(), "c": cfg.options["c"], "sigma": res.sigma,
               "mass": res.mass, "crossings": res.crossings, "iterations": res.iterations}
    return summary, raw, (["sigma", "mass_within_unit_ball"], rows)


def cmd_stability(cfg):
    from .cctools import default_schedule, spectral_perturbation, stability_scan
    p = cfg.params()
    grid = cfg.grid(1)
    pert = spectral_perturbation(p, grid, cfg.seed)
    rep = stability_scan(p, pert, default_schedule(cfg.options["points"]))
    summary = rep.as_dict()
    summary.pop("rows")
    summary.update({"params": p.as_dict(), "orth_residual": pert.orth_residual})
    return summary, None, (["eps", "deficit", "delta", "ratio"], rep.rows)


def _run_one(args):
    number, seed = args
    from .acceptance import run_criterion
    r = run_criterion(number, seed)
    return {"number": r.number, "name": r.name, "passed": r.passed, "details": r.details}, \
        r.seconds


def workers() -> int:
    try:
        return max(1, int(os.environ.get("SSL_NUM_WORKERS", "1")))
    except ValueError:
        return 1


def cmd_verify_all(cfg):
    from .acceptance import CHECKS
    jobs = [(k, cfg.seed) for k in sorted(CHECKS)]
    nw = min(workers(), len(jobs))
    if nw > 1:
        with ProcessPoolExecutor(max_workers=nw) as pool:
            results = list(pool.map(_run_one, jobs))
    else:
        results = [_run_one(j) for j in jobs]
    for rec, secs in results:
        print(f"[{'PASS' if rec['passed'] else 'FAIL'}] criterion {rec['number']}: {rec['name']}"
              f" ({secs:.1f} s)", file=sys.stderr)
    crits = [rec for rec, _ in results]
    return {"criteria": crits, "all_passed": all(c["passed"] for c in crits)}, None


HANDLERS = {"constants": cmd_constants, "deficit": cmd_deficit, "distance": cmd_distance,
            "bliss": cmd_bliss, "taylor": cmd_taylor, "spectrum": cmd_spectrum,
            "trace": cmd_trace, "ccscan": cmd_ccscan, "stability": cmd_stability,
            "verify-all": cmd_verify_all}


def _write(text: str, path: str | None):
    if path:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([format(float(x), ".17g") for x in r])
    return buf.getvalue()


def execute(cfg: RunConfig) -> tuple[dict, int]:
    out = HANDLERS[cfg.command](cfg)
    result, raw = out[0], out[1]
    table = out[2] if len(out) > 2 else None
    config = asdict(cfg)
    config.pop("output")
    report = {"schema": SCHEMA, "command": cfg.command, "config": config,
              "params": cfg.params().as_dict(), "seed": cfg.seed,
              "input_hash": content_hash(config, raw or b"")}
    if cfg.command not in ("constants", "bliss", "taylor", "trace"):
        grid_default = 0 if cfg.command in ("deficit", "distance", "ccscan") else 1
        report["grid"] = cfg.grid(grid_default).as_dict()
    report["result"] = result
    if table is not None:
        report["table"] = {"columns": table[0], "rows": [list(r) for r in table[1]]}
    code = 0
    if cfg.command == "verify-all" and not result["all_passed"]:
        code = 1
    return report, code


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        cfg = parse_config(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else 2
    try:
        report, code = execute(cfg)
    except (DomainError, GridMismatch, NormalizationError, NullField, UnsupportedField,
            EvalError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ConvergenceError, NumericalError, BracketError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    if cfg.format == "csv" and "table" in report:
        table = report.pop("table")
        _write(_csv_text(table["columns"], table["rows"]), cfg.output)
        summary = dumps(report)
        if cfg.output:
            Path(cfg.output + ".summary.json").write_text(summary)
        else:
            sys.stderr.write(summary)
    else:
        _write(dumps(report), cfg.output)
    return code


if __name__ == "__main__":
    sys.exit(main())
