"""Command line front end: NESS sweeps, ground-state sweeps and global discord runs.

    clockrotors ness-sweep --preset fig2 --output fig2.csv
    clockrotors ground-sweep --config my.yaml --output gs.csv --parallel 4
    clockrotors validate-config --config my.yaml

Output is a CSV file with a fixed column order plus a JSON sidecar (``<output>.json``)
holding wall times, solver diagnostics and discord angles. The CSV carries no
timing information, so identical configs give identical bytes.
Exit codes: 0 success, 1 every grid point failed, 2 configuration error.
"""
from __future__ import annotations

import argparse
import copy
import csv
import io
import itertools
import json
import logging
import math
import os
import re
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .groundstate import (
    binder_cumulant,
    lowest_eigenpairs,
    order_parameter_mean,
    order_parameter_moments,
)
from .infotheory import (
    AnnealConfig,
    Partition,
    global_discord,
    l1_coherence,
    mutual_information,
    negativity,
    partial_trace,
    von_neumann_entropy,
)
from .lindblad import BathConfig
from .model import CCMParams, Variant, build_hamiltonian
from .observables import heat_currents, solve_ness, steady_currents, tunneling_current

log = logging.getLogger("clockrotors")

SCHEMA_VERSION = 1
WORKERS_ENV = "CLOCKROTORS_WORKERS"
KINDS = ("ness", "ground", "discord")
AXES = {
    "ness": ("f", "phi", "beta_e", "beta_o", "delta_t"),
    "ground": ("f", "phi"),
    "discord": ("f", "phi", "beta_e", "beta_o", "delta_t"),
}
PHASE_PATTERNS = ("staggered", "homogeneous")
MISSING = "nan"

DEFAULT_MODEL = {"M": 4, "N_s": 3, "variant": "standard", "phases": "staggered",
                 "phi": math.pi / 2, "f": 0.5}
DEFAULT_BATHS = {"beta_e": 1.0, "beta_o": 1.1, "g": 0.2}
DEFAULT_OBS = {"info": True, "discord": False, "partition": None}
TOP_KEYS = {"schema", "kind", "model", "baths", "sweep", "observables", "solver", "anneal",
            "discord", "seed"}


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------- config


_PI_RE = re.compile(r"^\s*([-+]?\d*\.?\d*)\s*\*?\s*pi\s*(?:/\s*(\d+\.?\d*))?\s*$")


def parse_number(x) -> float:
    """A float, or a string such as "pi/2", "2*pi/3", "-pi"."""
    if isinstance(x, bool):
        raise ConfigError(f"expected a number, got {x!r}")
    if isinstance(x, (int, float)):
        return float(x)
    if isinstance(x, str):
        try:
            return float(x)
        except ValueError:
            pass
        m = _PI_RE.match(x)
        if m:
            coef = m.group(1)
            coef = -1.0 if coef == "-" else 1.0 if coef in ("", "+") else float(coef)
            den = float(m.group(2)) if m.group(2) else 1.0
            return coef * math.pi / den
    raise ConfigError(f"cannot read {x!r} as a number")


def _as_list(x) -> list:
    return list(x) if isinstance(x, (list, tuple)) else [x]


def _merge(defaults: dict, given, section: str) -> dict:
    given = given or {}
    if not isinstance(given, dict):
        raise ConfigError(f"section '{section}' must be a mapping")
    unknown = set(given) - set(defaults)
    if unknown:
        raise ConfigError(f"unknown keys in '{section}': {sorted(unknown)}")
    out = dict(defaults)
    out.update(given)
    return out


def sweep_values(sweep) -> list[float]:
    if not isinstance(sweep, dict):
        raise ConfigError("'sweep' must be a mapping with 'axis' and 'values' or 'linspace'")
    if ("values" in sweep) == ("linspace" in sweep):
        raise ConfigError("sweep needs exactly one of 'values' or 'linspace'")
    if "values" in sweep:
        vals = [parse_number(v) for v in _as_list(sweep["values"])]
    else:
        ls = sweep["linspace"]
        if not isinstance(ls, (list, tuple)) or len(ls) != 3:
            raise ConfigError("linspace must be [start, stop, count]")
        count = ls[2]
        if not isinstance(count, int) or isinstance(count, bool):
            raise ConfigError("linspace count must be an integer")
        vals = [float(v) for v in np.linspace(parse_number(ls[0]), parse_number(ls[1]), count)]
    if not vals:
        raise ConfigError("sweep has no values")
    return vals


def normalize_config(raw) -> dict:
    """Validate a raw config mapping and fill defaults. Raises ConfigError."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping")
    unknown = set(raw) - TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
    if raw.get("schema") != SCHEMA_VERSION:
        raise ConfigError(f"'schema' must be {SCHEMA_VERSION}, got {raw.get('schema')!r}")
    kind = raw.get("kind")
    if kind not in KINDS:
        raise ConfigError(f"'kind' must be one of {KINDS}, got {kind!r}")

    model = _merge(DEFAULT_MODEL, raw.get("model"), "model")
    sizes = [int(m) for m in _as_list(model["M"])]
    if not sizes or any(m < 2 for m in sizes):
        raise ConfigError("M must be at least 2")
    if int(model["N_s"]) != 3:
        raise ConfigError("only N_s = 3 is supported")
    try:
        variant = Variant(model["variant"]).value
    except ValueError:
        raise ConfigError(f"unknown variant {model['variant']!r}") from None
    patterns = _as_list(model["phases"])
    if not patterns or any(p not in PHASE_PATTERNS for p in patterns):
        raise ConfigError(f"phases must be drawn from {PHASE_PATTERNS}")
    model.update(M=sizes, N_s=3, variant=variant, phases=patterns,
                 phi=parse_number(model["phi"]), f=parse_number(model["f"]))

    baths = _merge(DEFAULT_BATHS, raw.get("baths"), "baths")
    baths = {k: parse_number(v) for k, v in baths.items()}

    sweep = raw.get("sweep")
    if sweep is None:
        raise ConfigError("missing 'sweep'")
    axis = sweep.get("axis") if isinstance(sweep, dict) else None
    if axis not in AXES[kind]:
        raise ConfigError(f"sweep axis for {kind} must be one of {AXES[kind]}, got {axis!r}")
    values = sweep_values(sweep)

    obs = _merge(DEFAULT_OBS, raw.get("observables"), "observables")
    solver = _merge({"method": "auto"}, raw.get("solver"), "solver")
    anneal = _merge({k: v for k, v in AnnealConfig().__dict__.items() if k != "seed"},
                    raw.get("anneal"), "anneal")
    discord = _merge({"state": "ness"}, raw.get("discord"), "discord")
    if discord["state"] not in ("ness", "ground"):
        raise ConfigError("discord.state must be 'ness' or 'ground'")
    if kind == "discord" and discord["state"] == "ground" and axis not in AXES["ground"]:
        raise ConfigError(f"ground-state discord sweeps only {AXES['ground']}")
    seed = raw.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        raise ConfigError("seed must be a non-negative integer")

    cfg = {"schema": SCHEMA_VERSION, "kind": kind, "model": model, "baths": baths,
           "sweep": {"axis": axis, "values": values}, "observables": obs,
           "solver": solver, "anneal": anneal, "discord": discord, "seed": seed}
    try:
        AnnealConfig(**anneal, seed=seed)
        for point in grid_points(cfg):
            _point_models(cfg, point)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    return cfg


def load_config(path: str | None = None, preset: str | None = None) -> dict:
    if (path is None) == (preset is None):
        raise ConfigError("give exactly one of --config or --preset")
    try:
        if preset is not None:
            res = resources.files("clockrotors.presets") / f"{preset}.yaml"
            if not res.is_file():
                raise ConfigError(f"unknown preset {preset!r}; available: {available_presets()}")
            text = res.read_text(encoding="utf-8")
        else:
            text = Path(path).read_text(encoding="utf-8")
        raw = yaml.safe_load(text)
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    return normalize_config(raw)


def available_presets() -> list[str]:
    root = resources.files("clockrotors.presets")
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".yaml")
                  and p.name != "schema.yaml")


# ---------------------------------------------------------------- grid


def grid_points(cfg: dict) -> list[dict]:
    """Grid in deterministic order: phase pattern, then M, then the sweep axis."""
    m, b = cfg["model"], cfg["baths"]
    axis = cfg["sweep"]["axis"]
    out = []
    for pattern, M, v in itertools.product(m["phases"], m["M"], cfg["sweep"]["values"]):
        p = {"variant": m["variant"], "phases": pattern, "M": M, "f": m["f"], "phi": m["phi"],
             "beta_e": b["beta_e"], "beta_o": b["beta_o"], "g": b["g"]}
        if axis == "delta_t":
            p["beta_o"] = 1.0 / (1.0 / p["beta_e"] + v)
        else:
            p[axis] = v
        p["index"] = len(out)
        out.append(p)
    return out


def _point_models(cfg: dict, p: dict) -> tuple[CCMParams, BathConfig]:
    maker = CCMParams.staggered if p["phases"] == "staggered" else CCMParams.homogeneous
    params = maker(p["M"], p["f"], p["phi"], variant=Variant(p["variant"]))
    baths = BathConfig.staggered(p["M"], p["beta_e"], p["beta_o"], p["g"])
    return params, baths


def _partition(cfg: dict, M: int) -> Partition:
    sites = cfg["observables"]["partition"]
    return Partition.half_chain(M) if sites is None else Partition(frozenset(sites), M)


# ---------------------------------------------------------------- columns

INPUT_COLUMNS = ["index", "status", "variant", "phases", "M", "f", "phi", "beta_e", "beta_o", "g"]


def columns(kind: str, M_max: int) -> list[str]:
    rotor = range(1, M_max + 1)
    if kind == "ness":
        return (INPUT_COLUMNS
                + [f"J_tun_{m}" for m in rotor] + [f"J_th_{m}" for m in rotor]
                + ["J_tun_T", "J_th_T"]
                + [f"Qd_{m}" for m in rotor] + [f"Qnd_{m}" for m in rotor]
                + ["Qd_T", "Qnd_T", "entropy_production",
                   "S_A", "I_AB", "C", "N_A", "G", "residual", "error"])
    if kind == "ground":
        return (INPUT_COLUMNS[:7] + ["sector", "E0", "E1", "gap", "m_mean", "m2", "m4", "B"]
                + [f"J_tun_{m}" for m in rotor] + ["residual", "error"])
    if kind == "discord":
        return (INPUT_COLUMNS + ["state", "G", "converged", "restarts_agreeing",
                                 "restart_min", "restart_max", "evaluations", "error"])
    raise ValueError(kind)


def _fmt(v) -> str:
    if v is None:
        return MISSING
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


# ---------------------------------------------------------------- workers


def _ness_point(cfg: dict, p: dict) -> tuple[dict, dict]:
    params, baths = _point_models(cfg, p)
    sol = solve_ness(params, baths, method=cfg["solver"]["method"])
    cur = steady_currents(sol.rho, sol.H, sol.transitions)
    heat = heat_currents(sol.rho, sol.H, sol.transitions, baths)
    M = p["M"]
    rec = {}
    for m in range(M):
        rec[f"J_tun_{m + 1}"] = cur.per_rotor_tun[m]
        rec[f"J_th_{m + 1}"] = cur.per_rotor_th[m]
        rec[f"Qd_{m + 1}"] = heat.qdot_d[m]
        rec[f"Qnd_{m + 1}"] = heat.qdot_nd[m]
    rec.update(J_tun_T=cur.total_tun, J_th_T=cur.total_th, Qd_T=sum(heat.qdot_d),
               Qnd_T=sum(heat.qdot_nd), entropy_production=heat.entropy_production,
               residual=sol.residual)
    if cfg["observables"]["info"]:
        part = _partition(cfg, M)
        rec.update(S_A=von_neumann_entropy(partial_trace(sol.rho, part.subset_a)),
                   I_AB=mutual_information(sol.rho, part),
                   C=l1_coherence(sol.rho), N_A=negativity(sol.rho, part))
    extra = {}
    if cfg["observables"]["discord"]:
        res = global_discord(sol.rho, AnnealConfig(**cfg["anneal"], seed=cfg["seed"]))
        rec["G"] = res.value
        extra = {"angles": res.angles.tolist(), "restart_values": res.restart_values,
                 "converged": res.converged}
    return rec, extra


def _ground_state(params: CCMParams):
    H = build_hamiltonian(params)
    sector = "symmetric" if params.variant is Variant.ROTATED else "full"
    return H, lowest_eigenpairs(H, 2, sector=sector)


def _ground_point(cfg: dict, p: dict) -> tuple[dict, dict]:
    params, _ = _point_models(cfg, p)
    H, spec = _ground_state(params)
    psi = spec.ground_state
    m2, m4 = order_parameter_moments(psi, params)
    rec = {"sector": spec.sector, "E0": spec.energies[0], "E1": spec.energies[1],
           "gap": spec.gap, "m_mean": order_parameter_mean(psi, params), "m2": m2, "m4": m4,
           "B": binder_cumulant(m2, m4) if m2 > 0 else None,
           "residual": float(np.max(spec.residuals))}
    for m in range(1, p["M"] + 1):
        rec[f"J_tun_{m}"] = tunneling_current(psi, H, params.clock, m, 0, 1)
    return rec, {"degenerate": spec.degenerate}


def _discord_point(cfg: dict, p: dict) -> tuple[dict, dict]:
    params, baths = _point_models(cfg, p)
    if cfg["discord"]["state"] == "ness":
        rho = solve_ness(params, baths, method=cfg["solver"]["method"]).rho
    else:
        psi = _ground_state(params)[1].ground_state
        rho = np.outer(psi, psi.conj())
    res = global_discord(rho, AnnealConfig(**cfg["anneal"], seed=cfg["seed"]))
    best = min(res.restart_values)
    agree = sum(v - best <= 100 * cfg["anneal"]["tolerance"] for v in res.restart_values)
    rec = {"state": cfg["discord"]["state"], "G": res.value, "converged": res.converged,
           "restarts_agreeing": agree, "restart_min": best,
           "restart_max": max(res.restart_values), "evaluations": res.evaluations}
    return rec, {"angles": res.angles.tolist(), "restart_values": res.restart_values}


_WORKERS = {"ness": _ness_point, "ground": _ground_point, "discord": _discord_point}


def run_point(task: tuple[dict, dict]) -> tuple[dict, dict]:
    """Evaluate one grid point. Failures come back as a record, never as an exception."""
    cfg, p = task
    rec = {k: p[k] for k in INPUT_COLUMNS if k in p}
    t0 = time.perf_counter()
    try:
        values, extra = _WORKERS[cfg["kind"]](cfg, p)
        rec.update(values)
        rec["status"] = "ok"
    except Exception as exc:  # noqa: BLE001 - recorded per point, the sweep goes on
        log.warning("point %d failed: %s", p["index"], exc)
        rec["status"] = "failed"
        rec["error"] = f"{type(exc).__name__}: {exc}"
        extra = {}
    extra["wall_time"] = time.perf_counter() - t0
    return rec, extra


def run_sweep(cfg: dict, workers: int = 1) -> tuple[list[str], list[dict], list[dict]]:
    points = grid_points(cfg)
    tasks = [(cfg, p) for p in points]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run_point, tasks))
    else:
        results = [run_point(t) for t in tasks]
    cols = columns(cfg["kind"], max(cfg["model"]["M"]))
    records = [r for r, _ in results]
    for r in records:
        for c in cols:
            r.setdefault(c, None)
        if r["error"] is None:
            r["error"] = ""
    extras = [dict(index=r["index"], **e) for r, e in results]
    return cols, records, extras


def write_csv(cols: list[str], records: list[dict], stream) -> None:
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(cols)
    for r in records:
        w.writerow([_fmt(r[c]) for c in cols])


def render_csv(cols: list[str], records: list[dict]) -> str:
    buf = io.StringIO()
    write_csv(cols, records, buf)
    return buf.getvalue()


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.bool_):
        return bool(o)
    raise TypeError(type(o))


# ---------------------------------------------------------------- entry point


def _workers(arg: int | None) -> int:
    if arg is not None:
        n = arg
    else:
        env = os.environ.get(WORKERS_ENV)
        try:
            n = int(env) if env else 1
        except ValueError:
            raise ConfigError(f"{WORKERS_ENV} must be an integer, got {env!r}") from None
    if n < 1:
        raise ConfigError("worker count must be at least 1")
    return n


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="clockrotors", description=__doc__.split("\n")[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)
    kinds = {"ness-sweep": "ness", "ground-sweep": "ground", "discord": "discord",
             "validate-config": None}
    for name in kinds:
        p = sub.add_parser(name)
        p.add_argument("--config", metavar="PATH")
        p.add_argument("--preset", metavar="NAME")
        p.add_argument("--seed", type=int, metavar="N")
        if name != "validate-config":
            p.add_argument("--output", metavar="PATH",
                           help="CSV destination (default stdout); sidecar goes to PATH.json")
            p.add_argument("--parallel", type=int, metavar="N",
                           help=f"worker processes (default ${WORKERS_ENV} or 1)")
        p.add_argument("-v", "--verbose", action="store_true")
        p.set_defaults(kind=kinds[name])
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, args.preset)
        if args.seed is not None:
            if args.seed < 0:
                raise ConfigError("seed must be non-negative")
            cfg["seed"] = args.seed
        if args.kind is not None and cfg["kind"] != args.kind:
            raise ConfigError(f"config kind {cfg['kind']!r} does not match {args.command}")
        if args.command == "validate-config":
            n = len(grid_points(cfg))
            print(f"ok: kind={cfg['kind']} points={n} axis={cfg['sweep']['axis']}")
            return 0
        workers = _workers(args.parallel)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    cols, records, extras = run_sweep(cfg, workers)
    text = render_csv(cols, records)
    if args.output:
        out = Path(args.output)
        out.write_text(text, encoding="utf-8")
        side = {"schema": SCHEMA_VERSION, "version": __version__, "columns": cols,
                "config": copy.deepcopy(cfg), "points": extras}
        Path(f"{out}.json").write_text(json.dumps(side, indent=1, default=_json_default),
                                       encoding="utf-8")
    else:
        sys.stdout.write(text)
    n_failed = sum(r["status"] != "ok" for r in records)
    if n_failed:
        print(f"{n_failed} of {len(records)} points failed", file=sys.stderr)
    return 1 if records and n_failed == len(records) else 0


if __name__ == "__main__":
    sys.exit(main())
