"""Command-line driver: config ingestion, batch execution, CSV serialization,
manifest bookkeeping, and gnuplot script emission.

Subcommands: simulate | wave | speed | verify | sweep. Exit codes: 0 ok,
1 config/validation error, 2 solver failure, 3 verification failure.

Output files carry a schema-version comment line and contain no wall-clock
data; timestamps live only in the run manifest, so identical manifests
reproduce outputs byte for byte.
"""

from __future__ import annotations

import argparse
import itertools
import json
import math
import sys
from dataclasses import asdict, replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__, asymptotics, pde, verify
from .core import BasinParams, RunConfig, check_layer_resolution, derive_params
from .errors import BasinwaveError, SolverError, ValidationError

PARAM_KEYS = {
    "lambda": "lam",
    "beta": "beta",
    "m": "m",
    "phi0": "phi0",
    "psi0": "psi0",
    "a0": "a0",
    "zstar": "zstar",
    "sdot": "sdot",
}
RUN_KEYS = ("n_nodes", "dt", "t_end", "h0", "output_every", "exp_clamp")
SWEEPABLE = tuple(PARAM_KEYS) + RUN_KEYS
_INTEGER_KEYS = {"m", "n_nodes"}


def parse_config(text: str) -> tuple[BasinParams, RunConfig]:
    """Parse a JSON configuration document.

    Missing keys take the documented defaults (lambda=1, beta=21, m=7,
    phi0=0.5, psi0=0.3, a0=1, zstar=1, sdot=1; run controls from
    :class:`RunConfig`). n_nodes defaults to the reaction-layer resolution
    rule 8*beta*(h0 + sdot*t_end). Unknown keys and type mismatches are
    rejected.
    """
    try:
        doc = json.loads(text) if text.strip() else {}
    except json.JSONDecodeError as exc:
        raise ValidationError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ValidationError("config document must be a JSON object")

    unknown = sorted(set(doc) - set(PARAM_KEYS) - set(RUN_KEYS))
    if unknown:
        raise ValidationError(f"unknown config keys: {', '.join(unknown)}")
    for key, val in doc.items():
        if isinstance(val, bool) or not isinstance(val, (int, float)):
            raise ValidationError(
                f"config key '{key}': expected a number, got {type(val).__name__}"
            )
        if key in _INTEGER_KEYS and int(val) != val:
            raise ValidationError(f"config key '{key}': expected an integer, got {val}")

    params = derive_params(
        **{attr: doc[key] for key, attr in PARAM_KEYS.items() if key in doc}
    )

    run_kwargs = {k: doc[k] for k in RUN_KEYS if k in doc}
    auto_nodes = "n_nodes" not in run_kwargs
    if auto_nodes:
        defaults = RunConfig(n_nodes=16)
        h0 = run_kwargs.get("h0", defaults.h0)
        t_end = run_kwargs.get("t_end", defaults.t_end)
        run_kwargs["n_nodes"] = max(
            16, math.ceil(8.0 * params.beta * (h0 + params.sdot * t_end))
        )
    else:
        run_kwargs["n_nodes"] = int(run_kwargs["n_nodes"])
    config = RunConfig(**run_kwargs)
    if not auto_nodes:
        check_layer_resolution(params, config)
    return params, config


def params_doc(params: BasinParams) -> dict:
    return {
        "lambda": params.lam,
        "beta": params.beta,
        "m": params.m,
        "phi0": params.phi0,
        "psi0": params.psi0,
        "a0": params.a0,
        "zstar": params.zstar,
        "sdot": params.sdot,
    }


def write_manifest(out_dir: Path, subcommand: str, params, config, outputs) -> Path:
    """Record the fully resolved inputs next to the outputs they produced."""
    doc = {
        "tool": "basinwave",
        "version": __version__,
        "created_utc": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "subcommand": subcommand,
        "params": params_doc(params),
        "config": asdict(config),
        "outputs": [p.name for p in outputs],
    }
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return path


def load_manifest(path: Path) -> tuple[BasinParams, RunConfig]:
    doc = json.loads(path.read_text())
    params = derive_params(
        **{attr: doc["params"][key] for key, attr in PARAM_KEYS.items()}
    )
    return params, RunConfig(**doc["config"])


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(path: Path, schema_name: str, columns, rows) -> Path:
    lines = [f"# basinwave {schema_name} schema v1", ",".join(columns)]
    lines.extend(",".join(_fmt(v) for v in row) for row in rows)
    path.write_text("\n".join(lines) + "\n")
    return path


def _write_plot(out_dir: Path, stanzas: list[str]) -> Path:
    lines = [
        "# gnuplot script; run: gnuplot -p plot.gp",
        'set datafile separator ","',
        "set key autotitle columnhead",
    ]
    lines.extend(stanzas)
    path = out_dir / "plot.gp"
    path.write_text("\n".join(lines) + "\n")
    return path


def cmd_simulate(args, params, config, out_dir: Path) -> int:
    series = pde.run_simulation(params, config)
    outputs = [
        write_csv(
            out_dir / "timeseries.csv",
            "timeseries",
            ("t", "h", "hdot"),
            zip(series.t, series.h, series.hdot),
        )
    ]
    final = series.final_state
    outputs.append(
        write_csv(
            out_dir / "profile.csv",
            "profile",
            ("z", "phi", "psi"),
            zip(final.x * final.h, final.phi, final.psi),
        )
    )
    if args.plot:
        outputs.append(
            _write_plot(
                out_dir,
                [
                    'set xlabel "t"',
                    'plot "timeseries.csv" using 1:2 with lines title "h(t)", \\',
                    '     "timeseries.csv" using 1:3 with lines title "dh/dt"',
                ],
            )
        )
    write_manifest(out_dir, "simulate", params, config, outputs)
    return 0


def cmd_wave(args, params, config, out_dir: Path) -> int:
    match = asymptotics.solve_c(params)
    profile = asymptotics.build_wave_profile(match, params)
    outputs = [
        write_csv(
            out_dir / "profile.csv",
            "wave-profile",
            ("zeta", "phi", "psi", "region"),
            zip(profile.zeta, profile.phi, profile.psi, profile.region),
        )
    ]
    if args.plot:
        outputs.append(
            _write_plot(
                out_dir,
                [
                    'set xlabel "zeta"',
                    'plot "profile.csv" using 1:2 with lines title "phi", \\',
                    '     "profile.csv" using 1:3 with lines title "psi"',
                ],
            )
        )
    write_manifest(out_dir, "wave", params, config, outputs)
    return 0


def _speed_rows(match) -> list[tuple]:
    return [(match.c, match.Phi_inf, match.C, match.residual, match.iterations)]


def cmd_speed(args, params, config, out_dir: Path) -> int:
    match = asymptotics.solve_c(params)
    outputs = [
        write_csv(
            out_dir / "speed.csv",
            "speed",
            ("c", "phi_inf", "C", "residual", "iterations"),
            _speed_rows(match),
        )
    ]
    write_manifest(out_dir, "speed", params, config, outputs)
    return 0


def cmd_verify(args, params, config, out_dir: Path) -> int:
    report = verify.residual_battery(params)
    report.extend(verify.cross_validate_speed(params, config))
    outputs = [
        write_csv(
            out_dir / "report.csv",
            "report",
            ("check", "value", "tolerance", "pass"),
            report.rows(),
        )
    ]
    write_manifest(out_dir, "verify", params, config, outputs)
    print(report)
    if not report.all_passed("primary"):
        failed = ", ".join(c.name for c in report.failures("primary"))
        print(f"verification failed: {failed}", file=sys.stderr)
        return 3
    return 0


def _parse_sweep_axes(specs: list[str]) -> list[tuple[str, list[float]]]:
    axes = []
    for axis in specs:
        key, _, values = axis.partition("=")
        key = key.strip()
        if key not in SWEEPABLE:
            raise ValidationError(f"cannot sweep unknown key '{key}'")
        if not values:
            raise ValidationError(f"sweep axis '{axis}' has no values")
        try:
            parsed = [
                int(v) if key in _INTEGER_KEYS else float(v)
                for v in values.split(",")
            ]
        except ValueError as exc:
            raise ValidationError(f"sweep axis '{axis}': {exc}") from exc
        axes.append((key, parsed))
    return axes


def cmd_sweep(args, params, config, out_dir: Path) -> int:
    if not args.sweep:
        raise ValidationError("sweep needs at least one --sweep key=v1,v2,... axis")
    axes = _parse_sweep_axes(args.sweep)
    base_params = params_doc(params)

    rows = []
    outputs = []
    keys = [k for k, _ in axes]
    for index, combo in enumerate(itertools.product(*(vals for _, vals in axes))):
        point = dict(zip(keys, combo))
        param_doc = dict(base_params)
        param_doc.update({k: v for k, v in point.items() if k in PARAM_KEYS})
        p_i = derive_params(**{attr: param_doc[key] for key, attr in PARAM_KEYS.items()})
        c_i = replace(config, **{k: v for k, v in point.items() if k in RUN_KEYS})
        match = asymptotics.solve_c(p_i)
        point_dir = out_dir / f"point_{index:03d}"
        point_dir.mkdir(parents=True, exist_ok=True)
        point_outputs = [
            write_csv(
                point_dir / "speed.csv",
                "speed",
                ("c", "phi_inf", "C", "residual", "iterations"),
                _speed_rows(match),
            )
        ]
        write_manifest(point_dir, "speed", p_i, c_i, point_outputs)
        rows.append((*combo, match.c, match.residual, match.iterations))

    outputs.append(
        write_csv(
            out_dir / "sweep.csv",
            "sweep",
            (*keys, "c", "residual", "iterations"),
            rows,
        )
    )
    if args.plot:
        outputs.append(
            _write_plot(
                out_dir,
                [
                    f'set xlabel "{keys[0]}"',
                    f'plot "sweep.csv" using 1:{len(keys) + 1} with linespoints title "c"',
                ],
            )
        )
    write_manifest(out_dir, "sweep", params, config, outputs)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="basinwave",
        description="Reactive compaction in a sedimenting porous column: "
        "moving-boundary simulation and traveling-wave analysis.",
    )
    parser.add_argument("--version", action="version", version=f"basinwave {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON configuration file")
    common.add_argument(
        "--out", type=Path, default=Path("basinwave_out"), help="output directory"
    )
    common.add_argument("--plot", action="store_true", help="emit a gnuplot script")
    common.add_argument(
        "--seed-manifest", type=Path, help="re-run from a previous manifest.json"
    )

    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name, func, desc in (
        ("simulate", cmd_simulate, "run the moving-boundary solver"),
        ("wave", cmd_wave, "build the traveling-wave profile"),
        ("speed", cmd_speed, "solve the wave-speed matching equation"),
        ("verify", cmd_verify, "run the verification battery"),
        ("sweep", cmd_sweep, "cartesian parameter sweep of the wave speed"),
    ):
        p = sub.add_parser(name, parents=[common], help=desc)
        p.set_defaults(func=func)
        if name == "sweep":
            p.add_argument(
                "--sweep",
                action="append",
                metavar="KEY=V1,V2,...",
                help="sweep axis (repeatable; cartesian product)",
            )
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.seed_manifest is not None:
            if args.config is not None:
                raise ValidationError("give either --config or --seed-manifest, not both")
            params, config = load_manifest(args.seed_manifest)
        elif args.config is not None:
            try:
                text = args.config.read_text()
            except OSError as exc:
                raise ValidationError(f"cannot read config: {exc}") from exc
            params, config = parse_config(text)
        else:
            params, config = parse_config("{}")
        args.out.mkdir(parents=True, exist_ok=True)
        return args.func(args, params, config, args.out)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 2
    except BasinwaveError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
