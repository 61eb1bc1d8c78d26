"""Command line: simulate, exact, predict and experiment.

Exit codes: 0 success, 1 runtime failure, 2 configuration error, 3 failed
acceptance band under ``--assert``. Errors print one JSON object to stderr.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import jsonschema
import numpy as np

from . import analytics, exact_oracle, experiments
from .errors import NonConvergence, WrgError
from .simulator import GrowthConfig, RunSummary, Variant, run_ensemble
from .weight_models import WeightModel, from_dict

FORMAT_VERSION = "wrglab/1"

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2
EXIT_ASSERT = 3

MODEL_SCHEMA = {
    "type": "object",
    "properties": {"class": {"type": "string"}, "params": {"type": "object"}},
    "required": ["class"],
    "additionalProperties": False,
}

EXPERIMENT_SCHEMA: dict[str, Any] = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "ExperimentConfig",
    "type": "object",
    "properties": {
        "format_version": {"type": "string"},
        "preset": {"enum": list(experiments.PRESETS)},
        "model": MODEL_SCHEMA,
        "n": {"type": "array", "items": {"type": "integer", "minimum": 3}, "minItems": 1},
        "m": {"type": "integer", "minimum": 1},
        "variant": {"enum": [v.value for v in Variant]},
        "replicas": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
        "params": {"type": "object"},
        "output": {
            "type": "object",
            "properties": {
                "dir": {"type": ["string", "null"]},
                "csv": {"type": "boolean"},
                "plots": {"type": "boolean"},
            },
            "additionalProperties": False,
        },
    },
    "required": ["preset", "model", "n", "replicas", "seed"],
    "additionalProperties": False,
    "allOf": [
        {
            "if": {"properties": {"preset": {"const": name}}},
            "then": {"properties": {"params": {"propertyNames": {"enum": sorted(defaults)}}}},
        }
        for name, defaults in experiments.PRESET_DEFAULTS.items()
    ],
}

REPORT_SCHEMA: dict[str, Any] = {
    "type": "object",
    "properties": {
        "format_version": {"const": FORMAT_VERSION},
        "config": EXPERIMENT_SCHEMA,
        "results": {"type": "array"},
        "checks": {"type": "array"},
        "passed": {"type": "boolean"},
    },
    "required": ["format_version", "config", "results", "checks", "passed"],
    "additionalProperties": False,
}


class ConfigError(WrgError, ValueError):
    """Malformed command line or configuration file."""


@dataclass
class ExperimentConfig:
    preset: str
    model: WeightModel
    n: list[int]
    replicas: int
    seed: int
    m: int = 1
    variant: str = "fixed"
    params: dict[str, Any] = field(default_factory=dict)
    output_dir: str | None = None
    csv: bool = False
    plots: bool = False

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        try:
            jsonschema.validate(data, EXPERIMENT_SCHEMA)
        except jsonschema.ValidationError as exc:
            where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
            raise ConfigError(f"config invalid at {where}: {exc.message}") from None
        out = data.get("output", {})
        cfg = cls(
            preset=data["preset"],
            model=from_dict(data["model"]),
            n=list(data["n"]),
            replicas=data["replicas"],
            seed=data["seed"],
            m=data.get("m", 1),
            variant=data.get("variant", "fixed"),
            params=experiments.resolve_params(data["preset"], data.get("params")),
            output_dir=out.get("dir"),
            csv=out.get("csv", False),
            plots=out.get("plots", False),
        )
        return cfg

    def to_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "preset": self.preset,
            "model": self.model.to_dict(),
            "n": list(self.n),
            "m": self.m,
            "variant": self.variant,
            "replicas": self.replicas,
            "seed": self.seed,
            "params": self.params,
            "output": {"dir": self.output_dir, "csv": self.csv, "plots": self.plots},
        }


def jsonable(obj):
    """Plain JSON types; non-finite floats become null."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj) if math.isfinite(obj) else None
    if obj is None or isinstance(obj, str):
        return obj
    if hasattr(obj, "to_dict"):
        return jsonable(obj.to_dict())
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj, compact: bool = False) -> str:
    if compact:
        return json.dumps(jsonable(obj), separators=(",", ":"))
    return json.dumps(jsonable(obj), indent=2)


def parse_int(text: str) -> int:
    """Integer from '1000000' or '1e6'."""
    try:
        return int(text)
    except ValueError:
        pass
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not value.is_integer():
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    return int(value)


def parse_int_list(text: str) -> list[int]:
    return [parse_int(t) for t in text.split(",") if t.strip()]


def parse_model(text: str, params: str | None = None) -> WeightModel:
    """A class name (with optional JSON params), an inline JSON spec, or a path to one."""
    text = text.strip()
    if text.startswith("{"):
        spec = _load_json(text, "--model")
    elif os.path.isfile(text):
        spec = _load_json(Path(text).read_text(), text)
    else:
        spec = {"class": text}
        if params:
            spec["params"] = _load_json(params, "--params")
    if params and "params" not in spec:
        spec["params"] = _load_json(params, "--params")
    try:
        jsonschema.validate(spec, MODEL_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"model spec invalid: {exc.message}") from None
    return from_dict(spec)


def _load_json(text: str, source: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{source}: invalid JSON ({exc.msg})") from None


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _write(text: str, out: str | None) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def summary_columns(top_k: int) -> list[str]:
    """CSV column order: replica, max_degree, I_n, I_tilde_n, then (label, degree, z) per rank."""
    cols = ["replica", "max_degree", "I_n", "I_tilde_n"]
    for r in range(1, top_k + 1):
        cols += [f"label_{r}", f"degree_{r}", f"z_{r}"]
    return cols


def summary_row(s: RunSummary, top_k: int) -> list:
    row = [s.replica, s.max_degree, s.I_n, s.I_tilde_n]
    for r in range(top_k):
        if r < len(s.top_k):
            t = s.top_k[r]
            row += [t.label, t.degree, "" if t.z_mark is None else repr(t.z_mark)]
        else:
            row += ["", "", ""]
    return row


def cmd_simulate(args) -> int:
    model = parse_model(args.model, args.params)
    config = GrowthConfig(n=args.n, m=args.m, variant=args.variant, model=model, seed=args.seed,
                          track_top_k=args.top_k, near_max_delta=args.near_max_delta)
    summaries = run_ensemble(config, args.replicas, args.parallel)
    buf = io.StringIO()
    if args.format == "csv":
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(summary_columns(args.top_k))
        for s in summaries:
            writer.writerow(summary_row(s, args.top_k))
    else:
        for s in summaries:
            buf.write(dumps(s.to_dict(timing=args.timing), compact=True) + "\n")
    _write(buf.getvalue(), args.out)
    return EXIT_OK


def cmd_exact(args) -> int:
    weights = [float(w) for w in args.weights.split(",")] if args.weights else [1.0] * args.n
    vertices = [v for group in args.vertex for v in group] or [1]
    spec = exact_oracle.ExactSpec(args.n, args.m, tuple(weights), tuple(vertices))
    if args.method == "enumerate":
        table = exact_oracle.enumerate_joint(spec)
    elif len(vertices) == 1:
        table = exact_oracle.exact_marginal(spec, vertices[0])
    else:
        table = exact_oracle.exact_joint(spec)
    body = exact_oracle.table_to_dict(table)
    if args.golden:
        body = {"format_version": FORMAT_VERSION, "n": spec.n, "m": spec.m, "weights": list(spec.weights),
                "tracked": list(spec.tracked), "table": body}
    _write(dumps(body, compact=True) + "\n", args.out)
    return EXIT_OK


def _parse_query(text: str) -> tuple[int, float]:
    try:
        d, ell = text.split(":")
        return int(d), float(ell)
    except ValueError:
        raise argparse.ArgumentTypeError(f"query must look like d:ell, got {text!r}") from None


def cmd_predict(args) -> int:
    model = parse_model(args.model, args.params)
    out = analytics.prediction_set(model, args.n, args.m, args.eta, args.query or ())
    out = {"format_version": FORMAT_VERSION, **out}
    _write(dumps(out) + "\n", args.out)
    return EXIT_OK


def _experiment_dict(args) -> dict:
    if args.config:
        path = Path(args.config)
        if not path.is_file():
            raise ConfigError(f"config file not found: {args.config}")
        data = _load_json(path.read_text(), args.config)
    else:
        if not (args.preset and args.model and args.n and args.replicas is not None):
            raise ConfigError("give --config or all of --preset, --model, --n, --replicas")
        model = parse_model(args.model, args.params)
        data = {"preset": args.preset, "model": model.to_dict(), "n": args.n, "replicas": args.replicas,
                "seed": args.seed, "m": args.m, "variant": args.variant}
        if args.preset_params:
            data["params"] = _load_json(args.preset_params, "--preset-params")
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    if args.out_dir is not None or args.csv or args.plots:
        out = dict(data.get("output", {}))
        if args.out_dir is not None:
            out["dir"] = args.out_dir
        out["csv"] = bool(args.csv or out.get("csv", False))
        out["plots"] = bool(args.plots or out.get("plots", False))
        data["output"] = out
    return data


def build_report(cfg: ExperimentConfig, result: experiments.ExperimentResult) -> dict:
    return jsonable({
        "format_version": FORMAT_VERSION,
        "config": cfg.to_dict(),
        "results": result.results,
        "checks": [c.to_dict() for c in result.checks],
        "passed": result.passed,
    })


def write_rows_csv(path: Path, columns: list[str], rows: list[dict]) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n")
        writer.writeheader()
        for r in rows:
            writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})


def write_plots(directory: Path, samples: dict[str, np.ndarray]) -> list[str]:
    """Histogram and normal QQ plot per sample, as SVG with deterministic ids."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    from scipy.stats import norm

    plt.rcParams["svg.hashsalt"] = "wrglab"
    written = []
    for name, x in samples.items():
        x = np.sort(np.asarray(x, dtype=float))
        if x.size == 0:
            continue
        fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(8, 3.5))
        ax1.hist(x, bins=min(50, max(5, int(math.sqrt(x.size)))), density=True)
        ax1.set_title(f"{name} histogram")
        q = norm.ppf((np.arange(1, x.size + 1) - 0.5) / x.size)
        ax2.plot(q, x, ".", ms=2)
        lo, hi = float(min(q[0], x[0])), float(max(q[-1], x[-1]))
        ax2.plot([lo, hi], [lo, hi], "k-", lw=0.8)
        ax2.set_xlabel("normal quantile")
        ax2.set_title(f"{name} QQ")
        fig.tight_layout()
        path = directory / f"{name}.svg"
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
        written.append(str(path))
    return written


def cmd_experiment(args) -> int:
    if args.print_schema:
        _write(json.dumps(EXPERIMENT_SCHEMA, indent=2) + "\n", args.out)
        return EXIT_OK
    cfg = ExperimentConfig.from_dict(_experiment_dict(args))
    result = experiments.run_preset(cfg, args.parallel)
    report = build_report(cfg, result)
    text = json.dumps(report, indent=2) + "\n"
    _write(text, args.out)
    if cfg.output_dir:
        directory = Path(cfg.output_dir)
        directory.mkdir(parents=True, exist_ok=True)
        (directory / "report.json").write_text(text)
        if cfg.csv:
            write_rows_csv(directory / "functionals.csv", result.columns, result.rows)
        if cfg.plots:
            write_plots(directory, result.samples)
    elif cfg.csv or cfg.plots:
        raise ConfigError("csv and plot output need an output directory")
    if args.assert_bands and not result.passed:
        failed = [c.name for c in result.checks if not c.passed]
        _diagnose("AcceptanceFailure", f"failed checks: {failed}", EXIT_ASSERT)
        return EXIT_ASSERT
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="wrglab", description="Weighted recursive graph simulation and predictions.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common_model(p, required=True):
        p.add_argument("--model", required=required,
                       help="weight class name, inline JSON {class, params}, or path to such a file")
        p.add_argument("--params", help="JSON object of class parameters when --model is a bare class name")

    sim = sub.add_parser("simulate", help="grow graphs and print one RunSummary per replica")
    sim.add_argument("--n", type=parse_int, required=True, help="number of vertices")
    sim.add_argument("--m", type=int, default=1, help="out-degree per new vertex")
    sim.add_argument("--variant", choices=[v.value for v in Variant], default="fixed",
                     help="fixed out-degree m or random out-degree")
    common_model(sim, required=False)
    sim.add_argument("--seed", type=parse_int, default=0, help="base seed of all random streams")
    sim.add_argument("--replicas", type=parse_int, default=1, help="number of independent graphs")
    sim.add_argument("--parallel", type=int, default=None, help="worker processes (default: WRGLAB_PARALLEL or 1)")
    sim.add_argument("--top-k", type=int, default=10, help="ranked high-degree vertices to report")
    sim.add_argument("--near-max-delta", type=int, default=0, help="report labels with degree >= max - delta")
    sim.add_argument("--format", choices=["jsonl", "csv"], default="jsonl", help="output format")
    sim.add_argument("--timing", action="store_true", help="include per-replica elapsed seconds")
    sim.add_argument("--out", help="output path (default stdout)")
    sim.set_defaults(func=cmd_simulate, model="degenerate")

    ex = sub.add_parser("exact", help="exact in-degree law for a tiny graph with fixed weights")
    ex.add_argument("--n", type=int, required=True, help="number of vertices")
    ex.add_argument("--m", type=int, default=1, help="out-degree per new vertex")
    ex.add_argument("--weights", help="comma-separated weights in (0, 1] (default all ones)")
    ex.add_argument("--vertex", type=parse_int_list, action="append", default=[],
                    help="tracked label(s); repeat or comma-separate for a joint table")
    ex.add_argument("--method", choices=["dp", "enumerate"], default="dp", help="dynamic program or path listing")
    ex.add_argument("--golden", action="store_true", help="wrap the table with its inputs and format version")
    ex.add_argument("--out", help="output path (default stdout)")
    ex.set_defaults(func=cmd_exact)

    pr = sub.add_parser("predict", help="closed-form predictions as JSON")
    common_model(pr)
    pr.add_argument("--m", type=int, default=1, help="out-degree per new vertex")
    pr.add_argument("--n", type=parse_int, required=True, help="graph size")
    pr.add_argument("--eta", type=float, default=None, help="phase-boundary parameter")
    pr.add_argument("--query", type=_parse_query, action="append",
                    help="finite-n law query d:ell (repeatable)")
    pr.add_argument("--out", help="output path (default stdout)")
    pr.set_defaults(func=cmd_predict)

    exp = sub.add_parser("experiment", help="run a preset experiment and report checks")
    exp.add_argument("--config", help="ExperimentConfig JSON file")
    exp.add_argument("--preset", choices=experiments.PRESETS, help="preset when no --config is given")
    common_model(exp, required=False)
    exp.add_argument("--n", type=parse_int_list, help="comma-separated graph sizes")
    exp.add_argument("--m", type=int, default=1, help="out-degree per new vertex")
    exp.add_argument("--variant", choices=[v.value for v in Variant], default="fixed", help="out-degree variant")
    exp.add_argument("--replicas", type=parse_int, help="replicas per graph size")
    exp.add_argument("--seed", type=parse_int, default=0, help="base seed")
    exp.add_argument("--preset-params", help="JSON object of preset parameters")
    exp.add_argument("--parallel", type=int, default=None, help="worker processes (default: WRGLAB_PARALLEL or 1)")
    exp.add_argument("--out-dir", help="directory for report.json, functionals.csv and plots")
    exp.add_argument("--csv", action="store_true", help="write raw functionals as CSV")
    exp.add_argument("--plots", action="store_true", help="write SVG histogram and QQ plots")
    exp.add_argument("--assert", dest="assert_bands", action="store_true",
                     help="exit 3 when any acceptance band fails")
    exp.add_argument("--print-schema", action="store_true", help="print the config JSON schema and exit")
    exp.add_argument("--out", help="report path (default stdout)")
    exp.set_defaults(func=cmd_experiment)
    return parser


def _diagnose(kind: str, message: str, code: int) -> None:
    sys.stderr.write(json.dumps({"error": kind, "message": message, "exit_code": code}) + "\n")


def run(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except (NonConvergence, RuntimeError) as exc:
        _diagnose(type(exc).__name__, str(exc), EXIT_RUNTIME)
        return EXIT_RUNTIME
    except (WrgError, ValueError, argparse.ArgumentTypeError, OSError) as exc:
        _diagnose(type(exc).__name__, str(exc), EXIT_CONFIG)
        return EXIT_CONFIG


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
