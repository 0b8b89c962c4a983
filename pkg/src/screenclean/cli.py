"""Command-line entry point: simulate / run / bench.

Configs are strict JSON (unknown keys are errors); all JSON outputs are
UTF-8 with 2-space indent and sorted keys so repeated runs with the same
seed produce byte-identical reports.
"""

import argparse
import csv
import dataclasses
import json
import os
import sys
from pathlib import Path

from .data_model import AUTO, ConfigError, RunConfig, ValidationError, load_csv, write_csv
from .evaluate import MODELS, run_experiment
from .pipeline import build_report, ranks_rows, select_features
from .simgen import SimDesign

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DATA = 2
EXIT_PIPELINE = 3

_RUN_FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}
_DESIGN_FIELDS = {f.name: f for f in dataclasses.fields(SimDesign)}
_FLOAT_FIELDS = {
    "merge_threshold_r", "hierarchy_m", "path_multiplier", "fdr_level_q",
    "learning_rate", "momentum", "validation_fraction", "e0_factor",
    "rho", "beta0", "sigma2", "snr",
}


def _coerce(name, value):
    """Light type normalization: JSON ints are accepted for float fields."""
    if name in _FLOAT_FIELDS and isinstance(value, int) and not isinstance(value, bool):
        return float(value)
    return value


def parse_run_config(obj: dict) -> RunConfig:
    if not isinstance(obj, dict):
        raise ConfigError(f"config must be a JSON object (got {type(obj).__name__})")
    unknown = set(obj) - set(_RUN_FIELDS)
    if unknown:
        raise ConfigError(f"unknown config key(s): {sorted(unknown)}")
    try:
        return RunConfig(**{k: _coerce(k, v) for k, v in obj.items()})
    except TypeError as err:
        raise ConfigError(str(err)) from None


def parse_design(obj: dict) -> SimDesign:
    if not isinstance(obj, dict):
        raise ConfigError(f"design must be a JSON object (got {type(obj).__name__})")
    unknown = set(obj) - set(_DESIGN_FIELDS)
    if unknown:
        raise ConfigError(f"unknown design key(s): {sorted(unknown)}")
    for key in ("n", "p", "link", "s0"):
        if key not in obj:
            raise ConfigError(f"design is missing required key {key!r}")
    obj = {k: _coerce(k, v) for k, v in obj.items()}
    if not isinstance(obj["s0"], list) or not all(isinstance(j, int) for j in obj["s0"]):
        raise ConfigError("design key 's0' must be a list of 1-based feature indices")
    obj["s0"] = tuple(j - 1 for j in obj["s0"])
    obj.setdefault("rho", 0.0)
    try:
        return SimDesign(**obj)
    except (ValidationError, TypeError) as err:
        raise ConfigError(f"invalid design: {err}") from None


def parse_config(path):
    """Parse a config file into (RunConfig, SimDesign | None, extras).

    A top-level "design" object is parsed as a simulation design; run
    parameters live either under "config" or at the top level. The extras
    are the bench driver keys (replications, models, baseline).
    """
    try:
        with open(path, "r", encoding="utf-8") as fh:
            obj = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as err:
        raise ConfigError(f"malformed JSON in {path}: {err}") from None
    if not isinstance(obj, dict):
        raise ConfigError("top-level config must be a JSON object")
    design = None
    extras = {}
    if "design" in obj:
        design = parse_design(obj["design"])
        cfg_obj = obj.get("config", {})
        for key in ("replications", "models", "baseline", "n_jobs"):
            if key in obj:
                extras[key] = obj[key]
        leftover = set(obj) - {"design", "config", "replications", "models", "baseline", "n_jobs"}
        if leftover:
            raise ConfigError(f"unknown config key(s): {sorted(leftover)}")
    else:
        cfg_obj = obj
    return parse_run_config(cfg_obj), design, extras


def _apply_overrides(obj: dict, overrides):
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"override must look like key=value (got {item!r})")
        key, _, raw = item.partition("=")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        obj[key] = value
    return obj


def _write_json(path: Path, payload) -> None:
    path.write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _cmd_simulate(args) -> int:
    with open(args.config, "r", encoding="utf-8") as fh:
        obj = json.load(fh)
    if "design" in obj:
        obj = obj["design"]
    design = parse_design(_apply_overrides(obj, args.set))
    from .simgen import generate

    dataset, truth = generate(design)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(dataset, out / "data.csv", response_column="y")
    _write_json(out / "truth.json", {
        "s0": sorted(j + 1 for j in truth.s0),
        "design": {**dataclasses.asdict(design), "s0": sorted(j + 1 for j in design.s0)},
    })
    print(f"wrote {out / 'data.csv'} and {out / 'truth.json'}")
    return EXIT_OK


def _summary_text(report: dict) -> str:
    sel = report["selection"]
    lines = [
        "screen-and-clean selection summary",
        f"  n = {report['meta']['n']}, p = {report['meta']['p']}",
        f"  active set size = {len(report['screening']['active_set'])}"
        + (" (clamped)" if report["screening"]["clamped"] else ""),
        f"  clusters = {len(report['clusters'])}",
        f"  kappa = {sel['kappa_used']}, q = {sel['q']}",
        f"  delta_star = {sel['delta_star']}",
        f"  selected clusters = {len(sel['selected_cluster_ids'])}",
    ]
    for cluster in report["clusters"]:
        if cluster["cluster_id"] in sel["selected_cluster_ids"]:
            names = ", ".join(cluster["member_names"])
            lines.append(
                f"    cluster {cluster['cluster_id']} (rep {cluster['representative_name']}, "
                f"avg rank {cluster['avg_rank']:.2f}): {names}"
            )
    return "\n".join(lines) + "\n"


def _cmd_run(args) -> int:
    config, _, _ = parse_config(args.config)
    if args.set:
        with open(args.config, "r", encoding="utf-8") as fh:
            obj = json.load(fh)
        config = parse_run_config(_apply_overrides(obj, args.set))
    dataset = load_csv(args.data, args.response)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    result = select_features(dataset, config, n_jobs=args.threads)
    report = build_report(result, dataset)
    _write_json(out / "selection_report.json", report)
    _write_csv(out / "ranks.csv", ["replicate", "representative_index", "rank"], ranks_rows(result))
    _write_csv(
        out / "curve.csv", ["delta", "n_plus", "e0_hat", "fdr_hat"],
        [(c["delta"], c["n_plus"], c["e0_hat"], c["fdr_hat"]) for c in result.selection.curve],
    )
    (out / "summary.txt").write_text(_summary_text(report), encoding="utf-8")
    print(_summary_text(report), end="")
    return EXIT_OK


def _cmd_bench(args) -> int:
    config, design, extras = parse_config(args.config)
    if design is None:
        raise ConfigError("bench config needs a top-level 'design' object")
    replications = extras.get("replications", 10)
    models = extras.get("models", list(MODELS))
    baseline = bool(extras.get("baseline", False))
    n_jobs = args.threads if args.threads else extras.get("n_jobs", 1)
    summary = run_experiment(
        design, config, replications, models=models, baseline=baseline, n_jobs=n_jobs,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "bench_summary.json", {
        "summary": summary.summary,
        "n_replications": summary.n_replications,
        "n_failed": summary.n_failed,
        "config_echo": summary.config_echo,
    })
    if summary.records:
        header = list(summary.records[0].keys())
        rows = [[rec.get(k, "") for k in header] for rec in summary.records]
        _write_csv(out / "replications.csv", header, rows)
    print(json.dumps(summary.summary, indent=2, sort_keys=True))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="screenclean",
        description="Error-controlled nonlinear feature selection for "
                    "high-dimensional correlated data.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="generate a simulated dataset")
    sim.add_argument("--config", required=True)
    sim.add_argument("--out", required=True)
    sim.add_argument("--set", action="append", metavar="KEY=VALUE")
    sim.set_defaults(func=_cmd_simulate)

    run = sub.add_parser("run", help="run the selection pipeline on a CSV")
    run.add_argument("--config", required=True)
    run.add_argument("--data", required=True)
    run.add_argument("--response", default="y")
    run.add_argument("--out", required=True)
    run.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    run.add_argument("--set", action="append", metavar="KEY=VALUE")
    run.set_defaults(func=_cmd_run)

    bench = sub.add_parser("bench", help="run the Monte-Carlo benchmark")
    bench.add_argument("--config", required=True)
    bench.add_argument("--out", required=True)
    bench.add_argument("--threads", type=int, default=0)
    bench.set_defaults(func=_cmd_bench)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValidationError, json.JSONDecodeError) as err:
        if args.command == "simulate" or isinstance(err, json.JSONDecodeError):
            print(f"config error: {err}", file=sys.stderr)
            return EXIT_CONFIG
        print(f"data error: {err}", file=sys.stderr)
        return EXIT_DATA
    except Exception as err:  # pipeline failure
        print(f"pipeline error: {err}", file=sys.stderr)
        return EXIT_PIPELINE


if __name__ == "__main__":
    sys.exit(main())
