"""Command-line entry point: ``tms21 <command> [flags]``.

Configuration is resolved as built-in defaults < ``--config`` file < flags.
A config file is flat ``key=value`` text; lines of the form ``# key=value``
are accepted too, so any CSV written here can be fed back with ``--config``.
JSON outputs are accepted as config files through their ``config`` object.

Exit codes: 0 pass, 1 check failure, 2 usage error, 3 numeric or IO failure.
"""
from __future__ import annotations

import argparse
import datetime as _dt
import json
import math
import os
import re
import sys
from typing import Iterable, Optional

import numpy as np

from . import __version__
from .errors import DomainError, NumericError

COMMANDS = ("thresholds", "scan", "zeromode", "asymptotics", "schur", "forms")
_HELP = {
    "thresholds": "critical mass ratios and s(m)",
    "scan": "smallest singular value over a mass sweep (CSV)",
    "zeromode": "near-null vectors at one mass",
    "asymptotics": "large-momentum slope and intercept fits",
    "schur": "Schur-test row and column bounds",
    "forms": "extension quadratic forms and boundary residuals",
}

# key -> (type, default); per-command overrides below
_KEYS = {
    "m": (float, None),
    "lambda": (float, 1.0),
    "alpha": (float, 0.0),
    "ell": (str, None),
    "grid_panels": (int, 0),
    "grid_nodes": (int, 12),
    "rmax": (float, 1e4),
    "rmin": (float, 1e-4),
    "m_from": (float, None),
    "m_to": (float, 0.2),
    "m_points": (int, 21),
    "R_list": (str, "50,100,200,400,800"),
    "p1": (float, 1.0),
    "beta": (str, "inf,inf,inf"),
    "q": (str, "0,0,0"),
    "tail": (str, "auto"),
    "seed": (int, 20240607),
    "mc_samples": (int, 0),
    "format": (str, None),
    "tolerance": (float, None),
}

_COMMAND_DEFAULTS = {
    "thresholds": dict(format="json", tolerance=1e-10),
    "scan": dict(format="csv", ell="1"),
    "zeromode": dict(format="json", m=0.095, ell="1"),
    "asymptotics": dict(format="csv", m=1.0, ell="1", tolerance=1e-3),
    "schur": dict(format="csv", ell="1,2,3", tolerance=1e-2),
    "forms": dict(format="csv", m=0.095, ell="1", tolerance=1e-6),
}

C_TOL_FLOOR = 1e-10
_LINE = re.compile(r"^\s*#?\s*([A-Za-z_][A-Za-z0-9_]*)\s*=\s*(.*?)\s*$")


# ---------------------------------------------------------------------------
# configuration


def _coerce(key: str, value):
    typ = _KEYS[key][0]
    if value is None or value == "" or value == "None":
        return None
    try:
        return typ(value)
    except (TypeError, ValueError) as exc:
        raise DomainError(f"bad value for {key}: {value!r}") from exc


def read_config(path: str) -> dict:
    """Flat ``key=value`` pairs from a config file, CSV header or JSON output."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    stripped = text.lstrip()
    if stripped.startswith("{"):
        data = json.loads(text)
        raw = data.get("config", data)
    else:
        raw = {}
        for line in text.splitlines():
            mt = _LINE.match(line)
            if mt:
                raw[mt.group(1)] = mt.group(2)
    return {k: _coerce(k, v) for k, v in raw.items() if k in _KEYS}


def resolve_config(command: str, file_cfg: dict, flags: dict) -> dict:
    cfg = {k: d for k, (_, d) in _KEYS.items()}
    cfg.update(_COMMAND_DEFAULTS[command])
    cfg.update({k: v for k, v in file_cfg.items()})
    cfg.update(flags)
    for k in ("m", "rmax", "rmin", "m_to", "p1"):
        if cfg[k] is not None and not cfg[k] > 0:
            raise DomainError(f"{k} must be positive")
    if cfg["lambda"] is None or not cfg["lambda"] > 0:
        raise DomainError("lambda must be positive")
    if cfg["format"] not in ("csv", "json"):
        raise DomainError("format must be csv or json")
    return cfg


def _floats(text: str) -> list:
    try:
        return [float(x) for x in str(text).split(",") if x.strip()]
    except ValueError as exc:
        raise DomainError(f"expected a comma-separated list of numbers, got {text!r}") from exc


def _complexes(text: str) -> list:
    try:
        return [complex(x.replace(" ", "")) for x in str(text).split(",") if x.strip()]
    except ValueError as exc:
        raise DomainError(f"expected a comma-separated list of complex numbers, got {text!r}") from exc


def _ells(text: str) -> list:
    try:
        return [int(x) for x in str(text).split(",") if x.strip()]
    except ValueError as exc:
        raise DomainError(f"ell must be integers, got {text!r}") from exc


def _one_ell(cfg) -> int:
    ells = _ells(cfg["ell"])
    if len(ells) != 1:
        raise DomainError("this command takes a single ell")
    return ells[0]


def _grid(cfg, measure="Hminus12"):
    from .numerics import build_grid, scaled_grid
    if cfg["grid_panels"]:
        return build_grid(cfg["grid_panels"], cfg["grid_nodes"], cfg["rmin"], cfg["rmax"], measure)
    return scaled_grid(cfg["rmax"], measure, cfg["grid_nodes"], r_min=cfg["rmin"])


def _spec(cfg, m=None, ell=None):
    from .kernels import KernelSpec
    return KernelSpec.from_mass(cfg["m"] if m is None else m, cfg["lambda"], cfg["alpha"],
                                _one_ell(cfg) if ell is None else ell)


def _tail_arg(cfg):
    t = cfg["tail"]
    return t if t in ("auto", "none") else float(t)


# ---------------------------------------------------------------------------
# output


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (complex, np.complexfloating)):
        return repr(complex(v))
    return str(v)


def _jsonable(v):
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.bool_,)):
        return bool(v)
    if isinstance(v, (complex, np.complexfloating)):
        return [float(v.real), float(v.imag)]
    if isinstance(v, float) and not math.isfinite(v):
        return repr(v)
    return v


class Emitter:
    """Writes the header (version and resolved config) then rows or a JSON document."""

    def __init__(self, command: str, cfg: dict, out: Optional[str], stamp: bool):
        self.command, self.cfg, self.stamp = command, cfg, stamp
        self.fh = open(out, "w", encoding="utf-8", newline="") if out else sys.stdout
        self._own = bool(out)

    def close(self):
        if self._own:
            self.fh.close()
        else:
            self.fh.flush()

    def _meta(self) -> list:
        lines = [f"# tms21 {__version__}", f"# command={self.command}"]
        lines += [f"# {k}={_fmt(self.cfg[k])}" for k in sorted(self.cfg)]
        if self.stamp:
            lines.append(f"# timestamp={_dt.datetime.now(_dt.timezone.utc).isoformat()}")
        return lines

    def header(self, columns: Iterable[str]):
        self.fh.write("\n".join(self._meta()) + "\n")
        self.fh.write(",".join(columns) + "\n")

    def row(self, values: Iterable):
        self.fh.write(",".join(_fmt(v) for v in values) + "\n")
        self.fh.flush()

    def document(self, result: dict):
        doc = {"version": __version__, "command": self.command,
               "config": _jsonable(self.cfg), "result": _jsonable(result)}
        if self.stamp:
            doc["timestamp"] = _dt.datetime.now(_dt.timezone.utc).isoformat()
        self.fh.write(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _emit_table(em: Emitter, cfg, columns, rows):
    if cfg["format"] == "csv":
        em.header(columns)
        for r in rows:
            em.row(r)
    else:
        em.document({"rows": [dict(zip(columns, r)) for r in rows]})


# ---------------------------------------------------------------------------
# commands


def cmd_thresholds(cfg, em: Emitter) -> bool:
    from .params import thresholds
    tol = cfg["tolerance"]
    rep = thresholds(lambda_tol=tol, c_tol=max(tol, C_TOL_FLOOR))
    d = rep.as_dict()
    if cfg["format"] == "json":
        em.document(d)
    else:
        em.header(["quantity", "value", "residual", "iterations"])
        for k in ("m_star", "m_of_zero", "m_minlos", "m_star_star"):
            em.row([k, d[k], d["residuals"][k], d["iterations"][k]])
    return True


def _sweep_masses(cfg) -> list:
    from .zeromode import default_mass_sweep
    if cfg["m_from"] is None:
        ms = default_mass_sweep(cfg["m_points"], cfg["m_to"])
        cfg["m_from"] = float(ms[0])
    return [float(x) for x in np.geomspace(cfg["m_from"], cfg["m_to"], cfg["m_points"])]


SCAN_COLUMNS = ["m", "ell", "sigma_min", "tail_exponent_fit", "s_of_m", "grid_id", "r_max",
                "sigma_next", "fit_r2"]


def cmd_scan(cfg, em: Emitter) -> bool:
    from .zeromode import scan_mass
    ell = _one_ell(cfg)
    ms = _sweep_masses(cfg)
    grid = _grid(cfg)
    template = _spec(cfg, m=ms[0], ell=ell)
    rows = []
    if cfg["format"] == "csv":
        em.header(SCAN_COLUMNS)
    for m in ms:
        rec = scan_mass(ell, [m], template, grid, _tail_arg(cfg))[0]
        r = [rec.m, rec.ell, rec.sigma_min, rec.tail_exponent_fit, rec.s_of_m, rec.grid_id,
             rec.r_max, rec.sigma_next, rec.fit_quality]
        if cfg["format"] == "csv":
            em.row(r)
        rows.append(dict(zip(SCAN_COLUMNS, r)))
    if cfg["format"] == "json":
        em.document({"rows": rows})
    return True


def cmd_zeromode(cfg, em: Emitter) -> bool:
    from .operators import bottom
    from .zeromode import auto_tail, fit_tail, smallest_singular
    spec = _spec(cfg)
    grid = _grid(cfg)
    probe = smallest_singular(spec, grid, _tail_arg(cfg))
    try:
        fit = fit_tail(probe.vector)
    except DomainError:
        fit = None
    floor = 1e-3 * bottom(spec.replace(m=0.2), _grid(cfg, "L2"))
    radial = int(probe.sigma_min < floor) + int(probe.sigma_next < floor)
    summary = {
        "m": cfg["m"], "ell": spec.ell, "sigma_min": probe.sigma_min, "sigma_next": probe.sigma_next,
        "tail_s": probe.tail_s, "s_of_m": auto_tail(spec),
        "tail_exponent_fit": None if fit is None else fit.exponent,
        "fit_r2": None if fit is None else fit.r2,
        "near_null_threshold": floor, "radial_multiplicity": radial,
        "kernel_dimension": (2 * spec.ell + 1) * radial, "grid_id": grid.grid_id,
        "r_max": grid.r_max,
    }
    if cfg["format"] == "json":
        em.document(summary)
    else:
        em.header(["r", "value"])
        for r, v in zip(grid.nodes, probe.vector.values):
            em.row([r, v])
    return True


def _check_row(name, value, target, tol, scale=None):
    denom = abs(target) if scale is None else scale
    err = abs(value - target) / denom if denom > 0 else abs(value - target)
    return [name, value, target, err, tol, bool(err <= tol)]


CHECK_COLUMNS = ["check", "value", "target", "rel_error", "tolerance", "pass"]


def cmd_asymptotics(cfg, em: Emitter) -> bool:
    from .asymptotics import GSpec, extract_tms, tms_pair, u_norm_sq
    from .montecarlo import sector_field, u_norm_sq_mc
    from .numerics import Charge
    from .operators import assemble, w_inner
    spec = _spec(cfg)
    grid = _grid(cfg, "L2")
    ell, p1, tol = spec.ell, cfg["p1"], cfg["tolerance"]
    prof = lambda r, ell=ell: r**ell * np.exp(-r * r)
    xi = Charge.from_function(prof, grid, ell)
    R = _floats(cfg["R_list"])
    f1 = float(prof(p1))
    t0 = assemble(spec.replace(alpha=0.0), grid, "TplusAlpha").at(np.array([p1]), xi)[0]
    rows = []
    fit = extract_tms(GSpec(xi), spec, p1, R)
    rows.append(_check_row("slope_over_4pi_xi", fit.slope, 4 * math.pi * f1, tol))
    rows.append(_check_row("intercept_eta0", fit.intercept, -t0, 10 * tol))
    eta = tms_pair(xi, spec)
    fit2 = extract_tms(GSpec(xi, eta), spec, p1, R)
    target = spec.alpha * f1
    rows.append(_check_row("intercept_tms", fit2.intercept, target, 10 * tol,
                           scale=abs(target) if target != 0 else abs(t0)))
    w = w_inner(assemble(spec, grid, "W"), xi, xi)
    rows.append(_check_row("u_norm_sq_vs_w_inner", u_norm_sq(xi, spec), w, tol))
    if cfg["mc_samples"] > 0:
        est = u_norm_sq_mc(sector_field(prof, ell, 0), spec.mu, spec.lam, cfg["mc_samples"], cfg["seed"])
        # pass when within three standard errors
        rows.append(["u_norm_sq_vs_monte_carlo", w, est.mean, abs(w - est.mean) / est.stderr, 3.0,
                     bool(abs(w - est.mean) <= 3 * est.stderr)])
    _emit_table(em, cfg, CHECK_COLUMNS, rows)
    return all(r[-1] for r in rows)


SCHUR_COLUMNS = ["ell", "sup_row", "sup_col", "argmax_r", "row_limit", "col_limit",
                 "grid_max_row", "grid_max_col", "refinement_delta", "pass"]


def cmd_schur(cfg, em: Emitter) -> bool:
    from .appendixcheck import schur_bounds
    grid = _grid(cfg, "L2")
    rows = []
    for ell in _ells(cfg["ell"]):
        rep = schur_bounds(ell, grid)
        ok = (math.isfinite(rep.sup_row) and math.isfinite(rep.sup_col)
              and rep.refinement_delta < cfg["tolerance"])
        rows.append([ell, rep.sup_row, rep.sup_col, rep.argmax_r, rep.row_limit, rep.col_limit,
                     rep.grid_max_row, rep.grid_max_col, rep.refinement_delta, ok])
    _emit_table(em, cfg, SCHUR_COLUMNS, rows)
    return all(r[-1] for r in rows)


FORMS_COLUMNS = ["check", "n", "lhs", "rhs", "residual", "tolerance", "pass"]


def cmd_forms(cfg, em: Emitter) -> bool:
    from .extensions import (BetaParams, beta_form, bc2_sides, core_component, friedrichs_form,
                             singular_basis, solve_regular_from_singular)
    from .numerics import Charge
    from .zeromode import auto_tail
    spec = _spec(cfg)
    if spec.ell != 1:
        raise DomainError("forms live in the ell = 1 sector")
    beta = _floats(cfg["beta"])
    q = _complexes(cfg["q"])
    bp = BetaParams(tuple(beta), tuple(q))
    tol = cfg["tolerance"]
    grid = _grid(cfg)
    test = Charge.from_function(lambda r: r * np.exp(-r * r), grid, 1, 0)
    need_basis = any(z != 0 for z in bp.q)
    has_range = auto_tail(spec) is not None
    if need_basis and not has_range:
        raise DomainError("nonzero q needs m between the Efimov and uniqueness thresholds")
    basis = singular_basis(spec, grid, _tail_arg(cfg)) if has_range else None
    rows = []
    reg = {0: test}
    if basis is not None:
        x2 = solve_regular_from_singular(bp, basis, spec)
        core = core_component(test, basis, spec)
        reg = {n: (x2[n] + core if n == 0 else x2[n]) for n in x2}
    fr = sum(friedrichs_form(c, spec) for c in reg.values())
    bf = beta_form(reg, bp, basis, spec)
    extra = sum(bp.beta_q2().values()) * (basis.normalization if basis else 0.0)
    res = abs(bf - fr - extra)
    rows.append(["beta_form_minus_friedrichs", "", bf - fr, extra, res, 1e-12 * max(1.0, abs(bf)),
                 bool(res <= 1e-12 * max(1.0, abs(bf)))])
    if basis is not None:
        sides = bc2_sides(reg, bp, basis, spec)
        scale = max(1.0, float(np.max(np.abs(sides.rhs))))
        for i, n in enumerate((-1, 0, 1)):
            r = float(sides.residuals[i]) / scale
            rows.append(["bc2", n, sides.lhs[i], sides.rhs[i], r, tol, bool(r <= tol)])
    _emit_table(em, cfg, FORMS_COLUMNS, rows)
    return all(r[-1] for r in rows)


_HANDLERS: dict = {
    "thresholds": cmd_thresholds, "scan": cmd_scan, "zeromode": cmd_zeromode,
    "asymptotics": cmd_asymptotics, "schur": cmd_schur, "forms": cmd_forms,
}


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tms21", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"tms21 {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    S = argparse.SUPPRESS
    for name in COMMANDS:
        p = sub.add_parser(name, argument_default=S, help=_HELP[name])
        p.add_argument("--config", default=None, help="key=value file (or a previous output)")
        p.add_argument("--out", default=None, help="output path (default: stdout)")
        p.add_argument("--stamp", action="store_true", default=False, help="add a timestamp line")
        p.add_argument("--m", type=float)
        p.add_argument("--lambda", dest="lambda", type=float)
        p.add_argument("--alpha", type=float)
        p.add_argument("--ell", type=str)
        p.add_argument("--grid-panels", dest="grid_panels", type=int)
        p.add_argument("--grid-nodes", dest="grid_nodes", type=int)
        p.add_argument("--rmax", type=float)
        p.add_argument("--rmin", type=float)
        p.add_argument("--m-from", dest="m_from", type=float)
        p.add_argument("--m-to", dest="m_to", type=float)
        p.add_argument("--m-points", dest="m_points", type=int)
        p.add_argument("--R-list", dest="R_list", type=str)
        p.add_argument("--p1", type=float)
        p.add_argument("--beta", type=str)
        p.add_argument("--q", type=str)
        p.add_argument("--tail", type=str)
        p.add_argument("--seed", type=int)
        p.add_argument("--mc-samples", dest="mc_samples", type=int)
        p.add_argument("--format", choices=("csv", "json"))
        p.add_argument("--tolerance", type=float)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = vars(parser.parse_args(argv))   # exits 2 on malformed flags
    command = args.pop("command")
    config_path, out, stamp = args.pop("config"), args.pop("out"), args.pop("stamp")
    try:
        file_cfg = read_config(config_path) if config_path else {}
        cfg = resolve_config(command, file_cfg, args)
    except DomainError as exc:
        print(f"tms21: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"tms21: cannot read config: {exc}", file=sys.stderr)
        return 2
    try:
        em = Emitter(command, cfg, out, stamp)
    except OSError as exc:
        print(f"tms21: {exc}", file=sys.stderr)
        return 3
    try:
        ok = _HANDLERS[command](cfg, em)
        em.close()
    except BrokenPipeError:
        # reader went away (e.g. piped into head); silence the final flush
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        return 1
    except DomainError as exc:
        print(f"tms21: {exc}", file=sys.stderr)
        return 2
    except (NumericError, np.linalg.LinAlgError) as exc:
        print(f"tms21: numeric failure: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"tms21: {exc}", file=sys.stderr)
        return 3
    finally:
        if em._own:
            em.fh.close()
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
