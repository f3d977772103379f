"""Command-line entry point: run, sweep, verify, export-grid.

Configs are flat INI documents with sections; every key has a documented
default and unknown keys are rejected so typos cannot silently change a
run. Outputs are deterministic for a fixed config and seed: every file
starts with a comment header carrying the tool version and config hash,
and wall-clock times appear only in the metadata file.
"""

from __future__ import annotations

import argparse
import configparser
import hashlib
import sys
import time
from pathlib import Path

from . import __version__
from .grid import (FieldSpec, PointSource, SineLine, build_cartesian,
                   apply_initial_condition, export_cells_csv, export_faces_csv,
                   fracture_random_walk, write_cell_set)
from .harness import (ExperimentSpec, event_map, experiment_fracture,
                      experiment_reaction, experiment_uniform3d,
                      export_event_map_csv, run_sweep, summary_text,
                      write_sweep_csv)
from .schemes import SchemeConfig, langmuir, run

EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG = 0, 1, 2

_SCHEMA = {
    "grid": {"nx": "50", "ny": "50", "nz": "1",
             "lx": "10.0", "ly": "10.0", "lz": "10.0"},
    "fields": {"diffusivity": "1.0",
               "velocity": "0.0 0.0 0.0",
               "fracture_d_in": "", "fracture_d_out": "",
               "initial_condition": "point",
               "point_x": "4.95", "point_y": "9.95", "point_z": ""},
    "scheme": {"variant": "bas", "delta_m": "1e-6", "final_time": "2.4",
               "reaction": "none", "flux_floor": "1e-300",
               "cascade_threshold": "", "max_events": "1000000000"},
    "run": {"seed": "42", "trace": "false"},
    "output": {"directory": "out"},
}

_EXPERIMENTS = {"fracture": experiment_fracture,
                "uniform3d": experiment_uniform3d,
                "reaction": experiment_reaction}


class ConfigError(ValueError):
    pass


def load_config(path) -> dict[str, dict[str, str]]:
    """Parse an INI config, apply defaults, reject unknown keys."""
    parser = configparser.ConfigParser()
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except configparser.Error as exc:
        raise ConfigError(f"config parse error: {exc}")
    cfg = {section: dict(defaults) for section, defaults in _SCHEMA.items()}
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown config section [{section}]")
        for key, value in parser.items(section):
            if key not in _SCHEMA[section]:
                raise ConfigError(f"unknown key '{key}' in section [{section}]")
            cfg[section][key] = value
    return cfg


def config_hash(cfg: dict[str, dict[str, str]]) -> str:
    h = hashlib.sha256()
    for section in sorted(cfg):
        for key in sorted(cfg[section]):
            h.update(f"{section}.{key}={cfg[section][key]}\n".encode())
    return h.hexdigest()[:12]


def _float(cfg, section, key):
    raw = cfg[section][key]
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"[{section}] {key}: expected a number, got {raw!r}")


def _int(cfg, section, key):
    raw = cfg[section][key]
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"[{section}] {key}: expected an integer, got {raw!r}")


def _bool(cfg, section, key):
    raw = cfg[section][key].strip().lower()
    if raw in ("true", "yes", "1", "on"):
        return True
    if raw in ("false", "no", "0", "off"):
        return False
    raise ConfigError(f"[{section}] {key}: expected a boolean, got {raw!r}")


def build_problem(cfg, seed_override=None):
    """Grid + initial mass + fracture cells from a parsed config."""
    dims = (_int(cfg, "grid", "nx"), _int(cfg, "grid", "ny"),
            _int(cfg, "grid", "nz"))
    extent = (_float(cfg, "grid", "lx"), _float(cfg, "grid", "ly"),
              _float(cfg, "grid", "lz"))
    if min(dims) < 1:
        raise ConfigError("[grid] cell counts must be >= 1")
    if min(extent) <= 0:
        raise ConfigError("[grid] extents must be > 0")

    velocity = tuple(float(v) for v in cfg["fields"]["velocity"].split())
    if len(velocity) != 3:
        raise ConfigError("[fields] velocity: expected three components")
    seed = seed_override if seed_override is not None else _int(cfg, "run", "seed")

    fracture_cells: list[int] = []
    d_in_raw = cfg["fields"]["fracture_d_in"]
    if d_in_raw:
        d_in = float(d_in_raw)
        d_out = _float(cfg, "fields", "fracture_d_out")
        probe = build_cartesian(dims, extent,
                                FieldSpec(diffusivity=d_out, velocity=velocity))
        fracture_cells = fracture_random_walk(probe, seed)
        diffusivity = (fracture_cells, d_in, d_out)
    else:
        diffusivity = _float(cfg, "fields", "diffusivity")

    ic_kind = cfg["fields"]["initial_condition"].strip().lower()
    if ic_kind == "point":
        loc = [_float(cfg, "fields", "point_x"), _float(cfg, "fields", "point_y")]
        if cfg["fields"]["point_z"]:
            loc.append(float(cfg["fields"]["point_z"]))
        ic = PointSource(tuple(loc))
    elif ic_kind == "sine_line":
        ic = SineLine()
    elif ic_kind == "zero":
        ic = None
    else:
        raise ConfigError(f"[fields] initial_condition: unknown kind {ic_kind!r}")

    grid = build_cartesian(dims, extent,
                           FieldSpec(diffusivity=diffusivity, velocity=velocity))
    m0 = apply_initial_condition(grid, ic)
    return grid, m0, fracture_cells, seed


def build_scheme_config(cfg, trace_override=False) -> SchemeConfig:
    reaction_kind = cfg["scheme"]["reaction"].strip().lower()
    if reaction_kind in ("none", ""):
        reaction = None
    elif reaction_kind == "langmuir":
        reaction = langmuir()
    else:
        raise ConfigError(f"[scheme] reaction: unknown kind {reaction_kind!r}")
    delta_m = _float(cfg, "scheme", "delta_m")
    if delta_m <= 0:
        raise ConfigError("[scheme] delta_m must be > 0")
    final_time = _float(cfg, "scheme", "final_time")
    if final_time <= 0:
        raise ConfigError("[scheme] final_time must be > 0")
    thr = cfg["scheme"]["cascade_threshold"]
    try:
        return SchemeConfig(
            delta_m=delta_m,
            final_time=final_time,
            variant=cfg["scheme"]["variant"].strip().lower(),
            reaction=reaction,
            flux_floor=_float(cfg, "scheme", "flux_floor"),
            cascade_threshold=float(thr) if thr else None,
            max_events=_int(cfg, "scheme", "max_events"),
            trace=trace_override or _bool(cfg, "run", "trace"))
    except ValueError as exc:
        raise ConfigError(f"[scheme] {exc}")


def _header(chash: str) -> str:
    return f"asyncfv {__version__} config={chash}"


def _echo_config(cfg) -> str:
    lines = []
    for section in sorted(cfg):
        lines.append(f"[{section}]")
        for key in sorted(cfg[section]):
            lines.append(f"{key} = {cfg[section][key]}")
    return "\n".join(lines)


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    chash = config_hash(cfg)
    out = Path(args.out or cfg["output"]["directory"])
    out.mkdir(parents=True, exist_ok=True)
    grid, m0, fracture_cells, seed = build_problem(cfg, args.seed)
    scheme_cfg = build_scheme_config(cfg, trace_override=args.trace)

    t0 = time.perf_counter()
    state, metrics = run(grid, m0, scheme_cfg)
    wall = time.perf_counter() - t0

    conc = state.mass / grid.cell_volumes
    head = _header(chash)
    with open(out / "concentration.csv", "w") as fh:
        fh.write(f"# {head}\n")
        fh.write("cell_id,c\n")
        for j, c in enumerate(conc):
            fh.write(f"{j},{float(c)!r}\n")
    counts = metrics.per_cell_events
    with open(out / "events.csv", "w") as fh:
        fh.write(f"# {head}\n")
        fh.write("cell_id,events\n")
        for j, n in enumerate(counts):
            fh.write(f"{j},{int(n)}\n")
    export_event_map_csv(grid, event_map(grid, counts),
                         out / "event_map.csv", comment=head)
    if fracture_cells:
        write_cell_set(fracture_cells, out / "fracture_cells.txt",
                       comment=head)
    if metrics.trace is not None:
        with open(out / "trace.csv", "w") as fh:
            fh.write(f"# {head}\n")
            fh.write("ordinal,face,t_hat,dm\n")
            tr = metrics.trace
            for i in range(tr.face.size):
                fh.write(f"{i},{int(tr.face[i])},{float(tr.time[i])!r},"
                         f"{float(tr.dm[i])!r}\n")

    with open(out / "metadata.txt", "w") as fh:
        fh.write(f"# {head}\n")
        fh.write(f"version = {__version__}\n")
        fh.write(f"config_hash = {chash}\n")
        fh.write(f"seed = {seed}\n")
        fh.write(f"n_events = {metrics.total_events}\n")
        fh.write(f"dt_avg = {metrics.dt_avg!r}\n")
        fh.write(f"mass_drift_rel = {metrics.mass_drift_rel!r}\n")
        fh.write(f"all_faces_at_final_time = {metrics.all_faces_at_T}\n")
        fh.write(f"wall_seconds = {wall!r}\n")
        fh.write("\n# configuration echo\n")
        fh.write(_echo_config(cfg) + "\n")
    return EXIT_OK


def cmd_sweep(args) -> int:
    if args.experiment:
        spec = _EXPERIMENTS[args.experiment](args.scale)
        chash = config_hash({"experiment": {"name": args.experiment,
                                            "scale": args.scale}})
    else:
        cfg = load_config(args.config)
        chash = config_hash(cfg)
        grid_cfg = cfg  # reuse the run-config geometry for a custom sweep
        base = build_scheme_config(grid_cfg)
        dims = (_int(cfg, "grid", "nx"), _int(cfg, "grid", "ny"),
                _int(cfg, "grid", "nz"))
        extent = (_float(cfg, "grid", "lx"), _float(cfg, "grid", "ly"),
                  _float(cfg, "grid", "lz"))
        velocity = tuple(float(v) for v in cfg["fields"]["velocity"].split())
        ladder = tuple(base.delta_m * 10.0 ** (-i) for i in range(4))
        d_in_raw = cfg["fields"]["fracture_d_in"]
        ic_kind = cfg["fields"]["initial_condition"].strip().lower()
        if ic_kind == "point":
            loc = [_float(cfg, "fields", "point_x"),
                   _float(cfg, "fields", "point_y")]
            if cfg["fields"]["point_z"]:
                loc.append(float(cfg["fields"]["point_z"]))
            ic = PointSource(tuple(loc))
        elif ic_kind == "sine_line":
            ic = SineLine()
        else:
            ic = None
        spec = ExperimentSpec(
            name="custom", dims=dims, extent=extent,
            diffusivity=_float(cfg, "fields", "diffusivity"),
            velocity=velocity, initial_condition=ic,
            delta_m_ladder=ladder, final_time=base.final_time,
            seed=_int(cfg, "run", "seed"),
            fracture=((float(d_in_raw), _float(cfg, "fields", "fracture_d_out"))
                      if d_in_raw else None),
            reaction=base.reaction)

    out = Path(args.out or "out")
    out.mkdir(parents=True, exist_ok=True)
    result = run_sweep(spec, cache_dir=args.cache, jobs=args.jobs)
    head = _header(chash)
    write_sweep_csv(result, out / "sweep.csv", comment=head)
    text = summary_text(result)
    (out / "summary.txt").write_text(f"# {head}\n" + text)
    print(text, end="")

    if args.assert_slopes:
        bad = []
        for scheme, (p, _) in result.error_orders.items():
            if not (0.7 <= p <= 1.3):
                bad.append(f"{scheme} error order {p:.3f} outside [0.7, 1.3]")
        for scheme, (q, _) in result.event_orders.items():
            if not (-1.15 <= q <= -0.85):
                bad.append(f"{scheme} N slope {q:.3f} outside [-1.15, -0.85]")
        if bad:
            print("slope assertions failed:", "; ".join(bad), file=sys.stderr)
            return EXIT_RUNTIME
    return EXIT_OK


def cmd_verify(args) -> int:
    from .verification import run_verification
    report = run_verification(scale=args.scale)
    print(report.text, end="")
    return EXIT_OK if report.all_passed else EXIT_RUNTIME


def cmd_export_grid(args) -> int:
    cfg = load_config(args.config)
    chash = config_hash(cfg)
    out = Path(args.out or cfg["output"]["directory"])
    out.mkdir(parents=True, exist_ok=True)
    grid, _, fracture_cells, _ = build_problem(cfg, args.seed)
    head = _header(chash)
    export_cells_csv(grid, out / "cells.csv", comment=head)
    export_faces_csv(grid, out / "faces.csv", comment=head)
    if fracture_cells:
        write_cell_set(fracture_cells, out / "fracture_cells.txt",
                       comment=head)
    return EXIT_OK


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="asyncfv",
        description="Asynchronous discrete-event finite-volume schemes")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one simulation from a config")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--out", default=None)
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--trace", action="store_true",
                       help="record a per-event trace (small runs only)")
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="run a mass-unit sweep")
    group = p_sweep.add_mutually_exclusive_group(required=True)
    group.add_argument("--experiment", choices=sorted(_EXPERIMENTS))
    group.add_argument("--config")
    p_sweep.add_argument("--scale", choices=("desk", "full"), default="desk")
    p_sweep.add_argument("--out", default=None)
    p_sweep.add_argument("--jobs", type=int, default=1)
    p_sweep.add_argument("--cache", default=None,
                         help="reference cache directory (default "
                              "$ASYNCFV_CACHE or ~/.cache/asyncfv)")
    p_sweep.add_argument("--assert-slopes", action="store_true")
    p_sweep.set_defaults(func=cmd_sweep)

    p_verify = sub.add_parser("verify",
                              help="run the identity and invariant checks")
    p_verify.add_argument("--scale", choices=("desk", "full"), default="desk")
    p_verify.set_defaults(func=cmd_verify)

    p_export = sub.add_parser("export-grid", help="export grid geometry CSVs")
    p_export.add_argument("--config", required=True)
    p_export.add_argument("--out", default=None)
    p_export.add_argument("--seed", type=int, default=None)
    p_export.set_defaults(func=cmd_export_grid)
    return parser


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
