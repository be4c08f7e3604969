"""Command-line experiment driver.

Subcommands cover single runs, the epsilon x arrival-rate sweep, the
insuring-principle ablation, baseline comparisons, the verification suite
and standalone scenario generators. One JSON config file feeds every
subcommand; --set KEY=VALUE patches single keys and dedicated flags win
over both. Result tables are plain CSV files written into --out; reruns
with the same config produce byte-identical tables (the append-only
run.log carries the timestamps instead).

Exit codes: 0 on success, 1 on a configuration error, 2 when the
verification suite fails.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from datetime import datetime, timezone

from .experiments import (
    EPSILON_GRID,
    LAM_GRID,
    ExperimentConfig,
    ablate,
    compare_schedulers,
    run_batch,
    sweep_epsilon,
    verify_suite,
    write_ablation,
    write_comparison,
    write_csv,
    write_report,
    write_sweep,
)
from .perfmodel import PerformanceModel
from .workload import TopologySpec, WorkloadSpec, gen_topology, gen_workload


class ConfigError(Exception):
    """Invalid configuration input; maps to exit code 1."""


# config keys consumed by the driver itself rather than ExperimentConfig
_CLI_KEYS = ("epsilons", "lams", "sequences", "instances", "preset")


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _load_config_data(args) -> dict:
    data: dict = {}
    if getattr(args, "config", None):
        try:
            with open(args.config) as fh:
                loaded = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}")
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}")
        if not isinstance(loaded, dict):
            raise ConfigError("config file must hold a JSON object")
        data.update(loaded)
    for item in getattr(args, "set", None) or []:
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        data[key] = _parse_value(value)
    if getattr(args, "seed", None):
        data["seeds"] = list(args.seed)
    if getattr(args, "scheduler", None):
        data["scheduler"] = args.scheduler
    if getattr(args, "epsilon", None) is not None:
        data["epsilon"] = args.epsilon
    if getattr(args, "lam", None) is not None:
        data["lam"] = args.lam
    return data


def _split_cli_keys(data: dict) -> dict:
    extras = {}
    for key in _CLI_KEYS:
        if key in data:
            extras[key] = data.pop(key)
    return extras


def _experiment_config(data: dict) -> ExperimentConfig:
    try:
        return ExperimentConfig.from_dict(data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc))


def _log_invocation(out_dir: str) -> None:
    os.makedirs(out_dir, exist_ok=True)
    stamp = datetime.now(timezone.utc).isoformat()
    with open(os.path.join(out_dir, "run.log"), "a") as fh:
        fh.write(f"{stamp} {' '.join(sys.argv)}\n")


def _write_jsonl(path: str, rows) -> None:
    with open(path, "w") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True))
            fh.write("\n")


def cmd_simulate(args) -> int:
    data = _load_config_data(args)
    _split_cli_keys(data)
    config = _experiment_config(data)
    _log_invocation(args.out)
    metrics, results = run_batch(config)
    trace_files = []
    for seed, result in zip(config.seeds, results):
        name = f"trace-{config.scheduler}-{seed}.jsonl"
        _write_jsonl(os.path.join(args.out, name), result.trace)
        trace_files.append(name)
    write_csv(os.path.join(args.out, "metrics.csv"),
              ["scheduler", "seed", "statistic", "value"], metrics)
    pooled = next(r["value"] for r in metrics
                  if r["seed"] == "all" and r["statistic"] == "mean_flowtime")
    report = {
        "command": "simulate",
        "config": config.to_dict(),
        "mean_flowtime": pooled,
        "traces": trace_files,
    }
    write_report(os.path.join(args.out, "report.json"), report)
    print(f"simulate: {config.scheduler} over {len(config.seeds)} seeds, "
          f"mean flowtime {pooled:.4f}")
    return 0


def cmd_compare(args) -> int:
    data = _load_config_data(args)
    _split_cli_keys(data)
    config = _experiment_config(data)
    _log_invocation(args.out)
    result = compare_schedulers(config)
    write_comparison(args.out, result)
    report = {
        "command": "compare",
        "config": config.to_dict(),
        "mean_flowtime": result.means,
    }
    write_report(os.path.join(args.out, "report.json"), report)
    for name in sorted(result.means):
        print(f"compare: {name:<12} mean flowtime {result.means[name]:.4f}")
    return 0


def cmd_sweep(args) -> int:
    data = _load_config_data(args)
    extras = _split_cli_keys(data)
    config = _experiment_config(data)
    epsilons = tuple(float(e) for e in extras.get("epsilons", EPSILON_GRID))
    lams = tuple(float(x) for x in extras.get("lams", LAM_GRID))
    if not epsilons or not all(0.0 < e < 1.0 for e in epsilons):
        raise ConfigError("epsilons must lie in (0, 1)")
    if not lams or not all(x > 0.0 for x in lams):
        raise ConfigError("lams must be positive")
    _log_invocation(args.out)
    result = sweep_epsilon(config, epsilons=epsilons, lams=lams)
    write_sweep(args.out, result)
    report = {
        "command": "sweep",
        "config": config.to_dict(),
        "epsilons": list(epsilons),
        "lams": list(lams),
        "best_epsilon": {f"{lam:g}": result.best_epsilon[lam] for lam in lams},
    }
    write_report(os.path.join(args.out, "report.json"), report)
    for lam in lams:
        print(f"sweep: lam={lam:g} best epsilon {result.best_epsilon[lam]:g}")
    return 0


def cmd_ablate(args) -> int:
    data = _load_config_data(args)
    _split_cli_keys(data)
    config = _experiment_config(data)
    _log_invocation(args.out)
    result = ablate(config)
    write_ablation(args.out, result)
    report = {
        "command": "ablate",
        "config": config.to_dict(),
        "mean_flowtime": result.means,
    }
    write_report(os.path.join(args.out, "report.json"), report)
    for row in result.rows():
        print(f"ablate: {row['variant']:<12} mean flowtime "
              f"{row['mean_flowtime']:.4f}")
    return 0


def cmd_verify(args) -> int:
    data = _load_config_data(args)
    extras = _split_cli_keys(data)
    sequences = int(extras.get("sequences", 100))
    instances = int(extras.get("instances", 30))
    seeds = tuple(data.get("seeds", (0, 1, 2)))
    _log_invocation(args.out)
    report = verify_suite(sequences=sequences, instances=instances,
                          audit_seeds=seeds)
    rows = [
        {"check": "diminishing-returns", "ok": report["diminishing"]["ok"],
         "detail": f"sequences={report['diminishing']['sequences']}"},
        {"check": "constraint-audit", "ok": report["audit"]["ok"],
         "detail": f"traces={report['audit']['traces']} "
                   f"violations={report['audit']['violations']}"},
        {"check": "competitive-bound", "ok": report["competitive"]["ok"],
         "detail": f"checked={report['competitive']['checked']} "
                   f"skipped={report['competitive']['skipped']}"},
    ]
    write_csv(os.path.join(args.out, "metrics.csv"),
              ["check", "ok", "detail"], rows)
    write_report(os.path.join(args.out, "report.json"),
                 {"command": "verify", **report})
    for row in rows:
        print(f"verify: {row['check']:<20} "
              f"{'ok' if row['ok'] else 'FAILED'} ({row['detail']})")
    if not report["ok"]:
        print("verify: FAILED", file=sys.stderr)
        return 2
    print("verify: all checks passed")
    return 0


def _topology_spec(extras: dict, clusters: int) -> TopologySpec:
    preset = extras.get("preset", "desk")
    if preset == "desk":
        return TopologySpec.desk(clusters)
    if preset == "full":
        return TopologySpec.full(clusters)
    raise ConfigError(f"unknown preset {preset!r} (expected 'desk' or 'full')")


def cmd_gen_topology(args) -> int:
    data = _load_config_data(args)
    extras = _split_cli_keys(data)
    config = _experiment_config(data)
    _log_invocation(args.out)
    topo = gen_topology(_topology_spec(extras, config.clusters),
                        seed=config.topology_seed)
    model = PerformanceModel(topo.clusters, topo.links)
    path = os.path.join(args.out, "topology.json")
    with open(path, "w") as fh:
        fh.write(model.to_json())
        fh.write("\n")
    classes = {}
    for cid in sorted(topo.classes):
        classes[topo.classes[cid]] = classes.get(topo.classes[cid], 0) + 1
    report = {
        "command": "gen-topology",
        "clusters": config.clusters,
        "seed": config.topology_seed,
        "class_counts": classes,
        "total_slots": topo.total_slots(),
        "file": "topology.json",
    }
    write_report(os.path.join(args.out, "report.json"), report)
    print(f"gen-topology: {config.clusters} clusters, "
          f"{topo.total_slots()} slots -> {path}")
    return 0


def cmd_gen_workload(args) -> int:
    data = _load_config_data(args)
    extras = _split_cli_keys(data)
    config = _experiment_config(data)
    _log_invocation(args.out)
    topo = gen_topology(_topology_spec(extras, config.clusters),
                        seed=config.topology_seed)
    jobs = gen_workload(WorkloadSpec.desk(config.jobs, config.lam), topo,
                        seed=100000 + config.seeds[0])
    rows = []
    for job in jobs:
        rows.append({
            "job_id": job.job_id,
            "arrival": job.arrival,
            "tasks": [
                {"task_id": t.task_id, "op_type": t.op_type,
                 "datasize": t.datasize, "inputs": [list(i) for i in t.inputs],
                 "preds": list(t.preds), "stage": t.stage}
                for t in job.tasks
            ],
        })
    path = os.path.join(args.out, "workload.jsonl")
    _write_jsonl(path, rows)
    report = {
        "command": "gen-workload",
        "jobs": len(jobs),
        "tasks": sum(len(j.tasks) for j in jobs),
        "lam": config.lam,
        "seed": config.seeds[0],
        "file": "workload.jsonl",
    }
    write_report(os.path.join(args.out, "report.json"), report)
    print(f"gen-workload: {len(jobs)} jobs, {report['tasks']} tasks -> {path}")
    return 0


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override one config key (JSON-typed value)")
    parser.add_argument("--out", default="results", help="output directory")
    parser.add_argument("--seed", action="append", type=int,
                        help="seed (repeatable, replaces the config seed list)")
    parser.add_argument("--scheduler", help="scheduler name")
    parser.add_argument("--epsilon", type=float, help="insurance budget factor")
    parser.add_argument("--lambda", dest="lam", type=float,
                        help="mean job arrivals per slot time")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="insuresim",
        description="Geo-distributed analytics simulator with insured task copies")
    sub = parser.add_subparsers(dest="command", required=True)
    commands = (
        ("simulate", cmd_simulate, "run one scheduler over the seed list"),
        ("sweep", cmd_sweep, "epsilon x arrival-rate grid for insurance"),
        ("ablate", cmd_ablate, "six insuring-principle variants"),
        ("compare", cmd_compare, "all schedulers on the same scenarios"),
        ("verify", cmd_verify, "analytic and trace verification suite"),
        ("gen-topology", cmd_gen_topology, "emit a generated topology"),
        ("gen-workload", cmd_gen_workload, "emit a generated job stream"),
    )
    for name, func, help_text in commands:
        p = sub.add_parser(name, help=help_text)
        _add_common(p)
        p.set_defaults(func=func)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
