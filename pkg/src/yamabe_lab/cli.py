"""Command-line experiment runner.

    yamabe-lab SUBCOMMAND [--config PATH] [--set KEY=VAL ...] [--out DIR] [--seed U64]

Subcommands: minimize, spectrum, reduce, exponent, superquadratic, bifurcate, loja.
Every run writes summary.json and, where applicable, samples.csv,
spectrum.csv or bifurcation.csv into the output directory.  All files carry
the full configuration and the package version.

Exit codes: 0 success, 1 invalid configuration or usage (nothing written),
2 numerical failure (summary.json holds the diagnostics).
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import math
import sys
import typing
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import stats

from . import __version__
from .hessian import HessianError, constant_base_eigenvalues, hessian_spectrum
from .manifold import DomainError, Manifold
from .polynomial import Polynomial
from .reduction import LyapunovSchmidt, NewtonOptions, ReductionError, classify_integrability, taylor_of_q
from .solver import SolverError, SolverOptions, continuation, find_minimizers
from .spectral import Field
from .stability import (
    StabilityError,
    fit_exponent,
    kernel_lift_direction,
    lojasiewicz_check,
    random_tangent_directions,
    sample_deficit_distance,
    samples_csv,
    superquadratic_family,
)

SUBCOMMANDS = ("minimize", "spectrum", "reduce", "exponent", "superquadratic", "bifurcate", "loja")
NUMERICAL_ERRORS = (SolverError, ReductionError, HessianError, StabilityError, np.linalg.LinAlgError)


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    """Flat experiment configuration; every key can be set from a file or --set."""

    n: int = 3
    L: float = 1.0
    L_min: float = 0.8
    L_max: float = 1.2
    L_steps: int = 41
    N: int = 256
    base: str = "constant"  # constant | minimizer
    solver_tol: float = 1e-10
    newton_tol: float = 5e-11
    kernel_tol: float = 1e-7
    fit_tol: float = 1e-7
    radius: float = 0.1
    j_max: int = 6
    window_lo: float = 1e-3
    window_hi: float = 5e-2
    radii_count: int = 12
    directions: int = 5
    starts: int = 2
    t_min: float = 0.005
    t_max: float = 0.05
    t_count: int = 10
    loja_radius: float = 0.1
    loja_density: int = 101
    loja_poly: str = "fitted"  # fitted | radial2 | radial4
    branches: bool = True
    seed: int = 0
    out: str = "out"

    def validate(self) -> None:
        if self.n < 3:
            raise ConfigError(f"n must be >= 3, got {self.n}")
        for key in ("L", "L_min", "L_max"):
            val = getattr(self, key)
            if not (val > 0 and math.isfinite(val)):
                raise ConfigError(f"{key} must be positive, got {val}")
        if self.L_max <= self.L_min or self.L_steps < 2:
            raise ConfigError("bifurcation range needs L_min < L_max and L_steps >= 2")
        if self.N < 8 or self.N % 2 or self.N > 2048:
            raise ConfigError(f"N must be even and in [8, 2048], got {self.N}")
        for key in ("solver_tol", "newton_tol", "kernel_tol", "fit_tol", "radius", "window_lo",
                    "window_hi", "t_min", "t_max", "loja_radius"):
            val = getattr(self, key)
            if not (val > 0 and math.isfinite(val)):
                raise ConfigError(f"{key} must be positive, got {val}")
        if self.window_hi <= self.window_lo or self.t_max <= self.t_min:
            raise ConfigError("windows need lo < hi")
        if self.t_max > self.radius:
            raise ConfigError("t_max must not exceed the trust radius")
        for key in ("j_max", "radii_count", "directions", "t_count", "loja_density"):
            if getattr(self, key) < 2:
                raise ConfigError(f"{key} must be >= 2")
        if self.starts < 0:
            raise ConfigError("starts must be >= 0")
        if self.base not in ("constant", "minimizer"):
            raise ConfigError(f"base must be 'constant' or 'minimizer', got {self.base!r}")
        if self.loja_poly not in ("fitted", "radial2", "radial4"):
            raise ConfigError(f"unknown loja_poly {self.loja_poly!r}")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


def _convert(key: str, raw: str, typ) -> typing.Any:
    raw = raw.strip()
    try:
        if typ is bool:
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if typ is int:
            return int(raw, 0)
        if typ is float:
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"cannot read {key} = {raw!r} as {typ.__name__}") from None


def _apply(cfg: ExperimentConfig, key: str, raw: str) -> None:
    hints = typing.get_type_hints(ExperimentConfig)
    if key not in hints:
        raise ConfigError(f"unknown config key {key!r}")
    setattr(cfg, key, _convert(key, raw, hints[key]))


def read_config_file(path: str | Path, cfg: ExperimentConfig | None = None) -> ExperimentConfig:
    """Parse `key = value` lines; blank lines and '#' comments are ignored."""
    cfg = cfg or ExperimentConfig()
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from None
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, val = line.split("=", 1)
        _apply(cfg, key.strip(), val)
    return cfg


def build_config(config: str | None, sets: list[str], out: str | None, seed: int | None) -> ExperimentConfig:
    cfg = read_config_file(config) if config else ExperimentConfig()
    for item in sets or []:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VAL, got {item!r}")
        key, val = item.split("=", 1)
        _apply(cfg, key.strip(), val)
    if out is not None:
        cfg.out = out
    if seed is not None:
        cfg.seed = seed
    cfg.validate()
    return cfg


# ----------------------------------------------------------------------------
# output helpers


def _header(cfg: ExperimentConfig) -> str:
    lines = [f"# yamabe_lab {__version__}"]
    lines += [f"# {k}={v}" for k, v in cfg.as_dict().items()]
    return "\n".join(lines) + "\n"


def _csv(cfg: ExperimentConfig, header: list[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(x) for x in row])
    return _header(cfg) + buf.getvalue()


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.17g}"
    if x is None:
        return ""
    return str(x)


def _summary(cfg: ExperimentConfig, command: str, body: dict) -> str:
    doc = {"version": __version__, "command": command, "config": cfg.as_dict(), **body}
    return json.dumps(_jsonable(doc), indent=2) + "\n"


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


# ----------------------------------------------------------------------------
# subcommands; each returns (summary body, {filename: text})


def _setup(cfg: ExperimentConfig, L: float | None = None):
    man = Manifold(cfg.n, cfg.L if L is None else L)
    return man, man.grid(cfg.N), SolverOptions(tol=cfg.solver_tol, kernel_tol=cfg.kernel_tol)


def _base(cfg, man, grid, opts) -> tuple[Field, dict]:
    if cfg.base == "constant":
        return man.constant(grid), {"base": "constant"}
    search = find_minimizers(man, grid, opts, starts=cfg.starts, seed=cfg.seed)
    if not search.minimizers:
        raise SolverError("no verified minimizer found")
    return search.minimizers[0].u, {"base": "minimizer", "minimizer_search": search.to_json()}


def _reduction(cfg, man, v) -> LyapunovSchmidt:
    return LyapunovSchmidt(man, v, kernel_tol=cfg.kernel_tol, radius=cfg.radius,
                           newton=NewtonOptions(tol=cfg.newton_tol))


def cmd_minimize(cfg):
    man, grid, opts = _setup(cfg)
    search = find_minimizers(man, grid, opts, starts=cfg.starts, seed=cfg.seed)
    return {"manifold": man.as_dict(), **search.to_json()}, {}


def cmd_spectrum(cfg):
    man, grid, opts = _setup(cfg)
    v, info = _base(cfg, man, grid, opts)
    spec = hessian_spectrum(man, v, cfg.kernel_tol)
    closed = constant_base_eigenvalues(man, cfg.N) if cfg.base == "constant" else None
    rows = [(i, lam, None if closed is None else closed[i]) for i, lam in enumerate(spec.eigenvalues)]
    body = {"manifold": man.as_dict(), **info, **spec.to_json()}
    body["eigenvalues"] = [float(x) for x in spec.eigenvalues[:10]]
    return body, {"spectrum.csv": _csv(cfg, ["index", "eigenvalue", "closed_form"], rows)}


def cmd_reduce(cfg):
    man, grid, opts = _setup(cfg)
    v, info = _base(cfg, man, grid, opts)
    ls = _reduction(cfg, man, v)
    model = taylor_of_q(ls, j_max=cfg.j_max, fit_tol=cfg.fit_tol, seed=cfg.seed)
    body = {"manifold": man.as_dict(), **info, **model.to_json(),
            "integrability": classify_integrability(model)}
    return body, {}


def cmd_exponent(cfg):
    man, grid, opts = _setup(cfg)
    search = find_minimizers(man, grid, opts, starts=cfg.starts, seed=cfg.seed)
    if not search.minimizers:
        raise SolverError("no verified minimizer found")
    v = search.minimizers[0].u
    spec = search.minimizers[0].spectrum
    radii = np.geomspace(cfg.window_lo, cfg.window_hi, cfg.radii_count)
    kernel = spec.kernel_matrix if spec is not None else np.zeros((cfg.N, 0))
    # the circle orbit direction is a symmetry, not a degeneracy of the minimizer set
    sym = spec is not None and search.minimizers[0].branch == "nonconstant"
    degenerate = kernel.shape[1] > 0 and not sym
    dirs = random_tangent_directions(man, v, cfg.directions, seed=cfg.seed,
                                     exclude=kernel if kernel.size else None)
    tag = "normal" if degenerate else "random"
    directions = {f"{tag}{i}": d for i, d in enumerate(dirs)}
    if degenerate:
        ls = _reduction(cfg, man, v)
        model = taylor_of_q(ls, j_max=cfg.j_max, fit_tol=cfg.fit_tol, seed=cfg.seed)
        e = model.ASp_maximizer if model.ASp_maximizer is not None else np.eye(ls.dim)[0]
        directions["kernel"] = kernel_lift_direction(ls, e)
    samples = sample_deficit_distance(man, search.minimizers, directions, radii, search.Y_ref)
    window = (cfg.window_lo, cfg.window_hi)
    fit = fit_exponent(samples, window)
    body = {"manifold": man.as_dict(), "Y_ref": search.Y_ref, **fit.to_json(),
            "minimizer_count": len(search.minimizers),
            "minimizer_set_note": "distance is measured to the verified minimizers found by the solver"}
    if degenerate:
        groups = {}
        for name, pick in (("normal", lambda s: s.label != "kernel"), ("kernel", lambda s: s.label == "kernel")):
            try:
                groups[name] = fit_exponent([s for s in samples if pick(s)], window).to_json()
            except StabilityError as exc:
                groups[name] = {"error": str(exc)}
        body["by_direction"] = groups
    return body, {"samples.csv": _header(cfg) + samples_csv(samples)}


def cmd_superquadratic(cfg):
    man, grid, opts = _setup(cfg)
    v, info = _base(cfg, man, grid, opts)
    ls = _reduction(cfg, man, v)
    model = taylor_of_q(ls, j_max=cfg.j_max, fit_tol=cfg.fit_tol, seed=cfg.seed)
    t_values = np.geomspace(cfg.t_min, cfg.t_max, cfg.t_count)
    fam = superquadratic_family(man, v, model, t_values)
    gammas = sorted(fam[0].ratios)
    rows = [["kernel", m.t, m.distance, m.deficit] + [m.ratios[g] for g in gammas] for m in fam]
    reg = stats.linregress(np.log([m.distance for m in fam]), np.log([m.deficit for m in fam]))
    ratios = {}
    for g in gammas:
        seq = [m.ratios[g] for m in fam]  # ascending t
        ratios[str(g)] = {
            "decreasing_as_t_decreases": bool(np.all(np.diff(seq) > 0)),
            "smallest_over_largest_t": seq[0] / seq[-1],
        }
    body = {"manifold": man.as_dict(), **info, "p": model.p, "ASp_holds": model.ASp_holds,
            "slope": float(reg.slope), "r2": float(reg.rvalue**2), "ratios": ratios,
            "distance_over_t": [m.distance / m.t for m in fam]}
    header = ["label", "radius", "distance", "deficit"] + [f"ratio_gamma_{g}" for g in gammas]
    return body, {"samples.csv": _csv(cfg, header, rows)}


def cmd_bifurcate(cfg):
    opts = SolverOptions(tol=cfg.solver_tol, kernel_tol=cfg.kernel_tol)
    Ls = np.linspace(cfg.L_min, cfg.L_max, cfg.L_steps)
    diag = continuation(cfg.n, Ls, N=cfg.N, opts=opts, branches=cfg.branches, seed=cfg.seed)
    rows = []
    for r in diag.rows:
        ev = list(r.eigenvalues) + [None] * (2 - len(r.eigenvalues))
        rows.append([r.L, ev[0], ev[1], r.q_constant, r.q_nonconstant, r.note])
    header = ["L", "lambda_0", "lambda_1", "q_constant", "q_nonconstant", "note"]
    body = {"crossing_L": diag.crossing, "critical_length": diag.critical_length,
            "rows": len(diag.rows)}
    return body, {"bifurcation.csv": _csv(cfg, header, rows)}


def cmd_loja(cfg):
    if cfg.loja_poly == "radial2":
        poly, info = Polynomial.radial(2, 2), {"polynomial": "|x|^2"}
    elif cfg.loja_poly == "radial4":
        poly, info = Polynomial.radial(2, 4), {"polynomial": "|x|^4"}
    else:
        man, grid, opts = _setup(cfg)
        v, info = _base(cfg, man, grid, opts)
        model = taylor_of_q(_reduction(cfg, man, v), j_max=cfg.j_max, fit_tol=cfg.fit_tol, seed=cfg.seed)
        if model.polynomial is None:
            raise ReductionError("the base is nondegenerate; there is no reduced polynomial")
        poly = model.polynomial
        info = {**info, "polynomial": "fitted", "p": model.p}
    res = lojasiewicz_check(poly, cfg.loja_radius, cfg.loja_density)
    return {**info, **res.to_json()}, {}


COMMANDS = {
    "minimize": cmd_minimize,
    "spectrum": cmd_spectrum,
    "reduce": cmd_reduce,
    "exponent": cmd_exponent,
    "superquadratic": cmd_superquadratic,
    "bifurcate": cmd_bifurcate,
    "loja": cmd_loja,
}


def run(command: str, cfg: ExperimentConfig) -> tuple[int, dict[str, str]]:
    """Execute one subcommand; returns the exit code and the files to write."""
    try:
        body, files = COMMANDS[command](cfg)
    except NUMERICAL_ERRORS as exc:
        body = {"status": "numerical_failure", "error": type(exc).__name__, "message": str(exc)}
        return 2, {"summary.json": _summary(cfg, command, body)}
    except DomainError as exc:
        body = {"status": "numerical_failure", "error": "DomainError", "message": str(exc)}
        return 2, {"summary.json": _summary(cfg, command, body)}
    body = {"status": "ok", **body}
    return 0, {"summary.json": _summary(cfg, command, body), **files}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="yamabe-lab", description="Yamabe energy experiments on S^1(L) x S^{n-1}.")
    p.add_argument("command", choices=SUBCOMMANDS)
    p.add_argument("--config", help="flat key = value configuration file")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VAL", help="override one config key")
    p.add_argument("--out", help="output directory")
    p.add_argument("--seed", type=int, help="RNG seed (unsigned 64-bit)")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = build_config(args.config, args.set, args.out, args.seed)
    except ConfigError as exc:
        print(f"yamabe-lab: invalid configuration: {exc}", file=sys.stderr)
        return 1
    code, files = run(args.command, cfg)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    for name, text in files.items():
        (out / name).write_text(text)
    status = "ok" if code == 0 else "numerical failure"
    print(f"{args.command}: {status}; wrote {', '.join(sorted(files))} to {out}")
    return code


if __name__ == "__main__":
    sys.exit(main())
