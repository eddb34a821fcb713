"""Command-line entry point: generate, extract, infer, evaluate, export-frames, sweep.

Exit status: 0 ok, 2 config error, 3 parse error, 4 validation error,
5 runtime failure (bad domain, simulation failure, I/O).
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

from mobinfer.config import build, read_config
from mobinfer.errors import ConfigError, MobinferError
from mobinfer.evaluation import format_summary, write_report, evaluate
from mobinfer.experiment import ExperimentConfig, sweep
from mobinfer.inference import InferenceParams, infer, load_constraints
from mobinfer.mobility import load_movement_trace, positions_at, save_movement_trace
from mobinfer.synthetic import RwpConfig, extract_contacts, generate_rwp
from mobinfer.trace import load_contact_trace, save_contact_trace

log = logging.getLogger("mobinfer")

# config-file / flag spellings that differ from the dataclass field names
INFER_ALIASES = {"vmax": "v_max", "dmax": "d_max", "drag": "D"}
INFER_KEYS = [
    "r", "vmax", "K", "l0", "G", "eps0", "alpha", "dmax", "drag", "tau", "mass", "dt",
    "clamp_speed", "anticipation_cutoff", "record_interval", "geometry",
]
RWP_KEYS = [
    "node_count", "width", "height", "v_min", "v_max_gen", "pause", "duration", "dt", "anchors",
]
EXPERIMENT_KEYS = [
    "period", "repetitions", "known_initial_positions", "reference", "infer_geometry",
    "match_inference_speed",
]


def _split_config(values: dict[str, str]) -> dict[str, dict[str, str]]:
    """Route flat keys to sections. ``rwp.`` / ``infer.`` / ``experiment.`` prefixes
    pin a key to one section; bare keys go to every section that knows them."""
    sections = {"rwp": {}, "infer": {}, "experiment": {}, "global": {}}
    known = {"rwp": RWP_KEYS, "infer": INFER_KEYS, "experiment": EXPERIMENT_KEYS,
             "global": ["seed"]}
    for key, val in values.items():
        if "." in key:
            sec, name = key.split(".", 1)
            if sec not in known or name not in known[sec]:
                raise ConfigError(f"unknown config key {key!r}")
            sections[sec][name] = val
            continue
        hits = [sec for sec, names in known.items() if key in names]
        if not hits:
            raise ConfigError(f"unknown config key {key!r}")
        for sec in hits:
            sections[sec][key] = val
    return sections


def _add_keys(parser: argparse.ArgumentParser, keys: list[str], prefix: str) -> None:
    group = parser.add_argument_group(f"{prefix} settings (override the config file)")
    for key in keys:
        group.add_argument(
            f"--{key.replace('_', '-')}", dest=f"{prefix}__{key}", default=None, metavar="V"
        )


def _collect(args, prefix: str) -> dict[str, str]:
    out = {}
    for name, val in vars(args).items():
        if name.startswith(prefix + "__") and val is not None:
            out[name.split("__", 1)[1]] = val
    return out


def _settings(args) -> dict[str, dict[str, str]]:
    values = read_config(args.config) if args.config else {}
    for item in getattr(args, "set", None) or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        values[k.strip()] = v.strip()
    sections = _split_config(values)
    sections["rwp"].update(_collect(args, "rwp"))
    sections["infer"].update(_collect(args, "infer"))
    sections["experiment"].update(_collect(args, "experiment"))
    return sections


def _seed(args, sections) -> int:
    if args.seed is not None:
        return args.seed
    try:
        return int(sections["global"].get("seed", 0))
    except ValueError:
        raise ConfigError("seed must be an integer") from None


def _rwp_config(sections, seed: int) -> RwpConfig:
    return build(RwpConfig, sections["rwp"], seed=seed)


def _infer_params(sections, seed: int) -> InferenceParams:
    return build(InferenceParams, sections["infer"], INFER_ALIASES, seed=seed)


def _out_path(args, default_name: str) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out / (args.output or default_name)


def cmd_generate(args) -> int:
    sections = _settings(args)
    config = _rwp_config(sections, _seed(args, sections))
    path = _out_path(args, "movement.csv")
    trace = generate_rwp(config)
    save_movement_trace(trace, path)
    log.info("wrote %s (%d frames, %d nodes, seed %d)", path, trace.frame_count,
             trace.node_count, config.seed)
    return 0


def cmd_extract(args) -> int:
    movement = load_movement_trace(args.movement)
    contacts = extract_contacts(movement, args.r, args.period or movement.dt)
    path = _out_path(args, "contacts.csv")
    save_contact_trace(contacts, path)
    log.info("wrote %s (%d events)", path, len(contacts.events))
    return 0


def cmd_infer(args) -> int:
    sections = _settings(args)
    params = _infer_params(sections, _seed(args, sections))
    trace = load_contact_trace(args.contacts, node_count=args.node_count, duration=args.duration)
    constraints = load_constraints(args.constraints) if args.constraints else {}
    initial = None
    if args.initial:
        initial = load_movement_trace(args.initial).frames[0]
    inferred = infer(trace, constraints, initial, params)
    path = _out_path(args, "inferred.csv")
    save_movement_trace(inferred, path)
    log.info("wrote %s (%d frames)", path, inferred.frame_count)
    return 0


def cmd_evaluate(args) -> int:
    sections = _settings(args)
    seed = _seed(args, sections)
    inferred = load_movement_trace(args.inferred)
    original_mobility = load_movement_trace(args.original) if args.original else None
    if args.contacts:
        contacts = load_contact_trace(args.contacts)
    elif original_mobility is not None:
        contacts = extract_contacts(original_mobility, args.r, original_mobility.dt)
    else:
        raise ConfigError("evaluate needs --contacts or --original")
    report = evaluate(contacts, inferred, args.r, original_mobility)
    report.extra.update(seed=seed, r=args.r)
    paths = write_report(report, args.out)
    if not args.quiet:
        sys.stdout.write(format_summary(report.summary()))
    log.info("wrote %s", ", ".join(str(p) for p in paths.values()))
    return 0


def cmd_export_frames(args) -> int:
    movement = load_movement_trace(args.movement)
    if args.stride < 1:
        raise ConfigError("stride must be >= 1")
    out = Path(args.out) / "frames"
    out.mkdir(parents=True, exist_ok=True)
    width = max(5, len(str(movement.frame_count)))
    count = 0
    for k in range(0, movement.frame_count, args.stride):
        t = k * movement.dt
        pos = positions_at(movement, t)
        lines = ["node_id,x,y"] + [f"{i},{x!r},{y!r}" for i, (x, y) in enumerate(pos.tolist())]
        (out / f"frame_{k:0{width}d}.csv").write_text("\n".join(lines) + "\n")
        count += 1
    log.info("wrote %d frame files to %s", count, out)
    return 0


def cmd_sweep(args) -> int:
    sections = _settings(args)
    seed = _seed(args, sections)
    rwp = _rwp_config(sections, seed)
    params = _infer_params(sections, seed)
    cfg = build(ExperimentConfig, sections["experiment"], rwp=rwp, params=params,
                base_seed=seed)
    if args.reps is not None:
        cfg = dataclasses.replace(cfg, repetitions=args.reps)
    try:
        values = [float(v) if args.kind != "anchors" else int(v) for v in args.values.split(",")]
    except ValueError:
        raise ConfigError(f"bad --values {args.values!r}") from None
    rows = sweep(cfg, args.kind, values, workers=args.workers)
    path = _out_path(args, f"sweep_{args.kind}.csv")
    cols = list(rows[0])
    body = [",".join(cols)]
    for row in rows:
        body.append(",".join(repr(row[c]) if isinstance(row[c], float) else str(row[c]) for c in cols))
    path.write_text(f"# base_seed={seed}\n" + "\n".join(body) + "\n")
    if not args.quiet:
        sys.stdout.write(path.read_text())
    return 0


def _global_flags(suppress: bool) -> argparse.ArgumentParser:
    # subcommands re-declare the global flags with suppressed defaults so that
    # values given before the subcommand name are not reset
    def default(v):
        return argparse.SUPPRESS if suppress else v

    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", default=default(None), help="key=value config file")
    p.add_argument("--seed", type=int, default=default(None), help="base seed (default 0)")
    p.add_argument("--out", default=default("."), help="output directory")
    p.add_argument("--quiet", action="store_true", default=default(False))
    p.add_argument("--set", action="append", metavar="KEY=VALUE", default=default(None),
                   help="override any config key; repeatable")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _global_flags(suppress=True)
    parser = argparse.ArgumentParser(prog="mobinfer", description=__doc__.splitlines()[0],
                                     parents=[_global_flags(suppress=False)])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", parents=[common], help="Random Waypoint movement on a torus")
    p.add_argument("-o", "--output", help="file name inside --out (default movement.csv)")
    _add_keys(p, RWP_KEYS, "rwp")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("extract", parents=[common], help="contact trace from a movement trace")
    p.add_argument("movement")
    p.add_argument("--r", type=float, default=100.0, help="transmission range (m)")
    p.add_argument("--period", type=float, default=None, help="sampling period (s); default dt")
    p.add_argument("-o", "--output", help="file name inside --out (default contacts.csv)")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("infer", parents=[common], help="infer movement from a contact trace")
    p.add_argument("contacts")
    p.add_argument("--constraints", help="node_id,kind,x,y,role CSV; unlisted nodes are free")
    p.add_argument("--initial", help="movement CSV whose first frame gives initial positions")
    p.add_argument("--node-count", type=int, default=None)
    p.add_argument("--duration", type=float, default=None)
    p.add_argument("-o", "--output", help="file name inside --out (default inferred.csv)")
    _add_keys(p, INFER_KEYS, "infer")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("evaluate", parents=[common], help="compare inferred with original")
    p.add_argument("inferred", help="inferred movement CSV")
    p.add_argument("--original", help="original movement CSV (enables the correlation)")
    p.add_argument("--contacts", help="original contact CSV (default: extracted from --original)")
    p.add_argument("--r", type=float, default=100.0)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("export-frames", parents=[common], help="one position CSV per frame")
    p.add_argument("movement")
    p.add_argument("--stride", type=int, default=1)
    p.set_defaults(func=cmd_export_frames)

    p = sub.add_parser("sweep", parents=[common], help="repeated synthetic experiments")
    p.add_argument("--kind", choices=["period", "speed", "anchors"], required=True)
    p.add_argument("--values", required=True, help="comma-separated sweep values")
    p.add_argument("--reps", type=int, default=None, help="repetitions per value")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("-o", "--output", help="file name inside --out (default sweep_<kind>.csv)")
    _add_keys(p, RWP_KEYS, "rwp")
    _add_keys(p, [k for k in INFER_KEYS if k not in ("dt", "record_interval", "geometry")],
              "infer")
    _add_keys(p, EXPERIMENT_KEYS, "experiment")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except MobinferError as exc:
        log.error("%s", exc)
        return exc.exit_code
    except OSError as exc:
        log.error("%s", exc)
        return 5


if __name__ == "__main__":
    sys.exit(main())
