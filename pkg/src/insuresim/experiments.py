"""Experiment drivers: comparisons, sweeps, ablations and result files.

Runs are paired: every scheduler at a given seed sees the same topology and
job stream, and engine randomness is keyed by the seed alone, so re-running
a configuration reproduces byte-identical CSVs.
"""

from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .baselines import CloningScheduler, GreedyScheduler, SpeculativeScheduler
from .insurer import (
    EFFICIENCY,
    JOB_MAJOR,
    RELIABILITY,
    ROUND_MAJOR,
    InsurancePolicy,
    InsuranceScheduler,
)
from .simengine import EngineConfig, Scenario, SimResult, simulate
from .verify import (
    audit_constraints,
    check_diminishing_returns,
    competitive_check,
    random_rate_sequence,
    random_tiny_instance,
)
from .workload import TopologySpec, WorkloadSpec, gen_topology, gen_workload

BASELINES = ("greedy", "speculative", "cloning")
SCHEDULERS = ("insurance",) + BASELINES

# desk-scale arrival rates; medium sits near the saturation point of the
# ten-cluster desk topology so queueing differentiates the schedulers
LIGHT_LAM = 0.4
MEDIUM_LAM = 2.4
HEAVY_LAM = 9.6
LAM_GRID = (LIGHT_LAM, MEDIUM_LAM, HEAVY_LAM)
EPSILON_GRID = (0.2, 0.4, 0.6, 0.8)

ABLATION_VARIANTS = {
    "eff-reli": (EFFICIENCY, RELIABILITY, ROUND_MAJOR),
    "reli-eff": (RELIABILITY, EFFICIENCY, ROUND_MAJOR),
    "eff-eff": (EFFICIENCY, EFFICIENCY, ROUND_MAJOR),
    "reli-reli": (RELIABILITY, RELIABILITY, ROUND_MAJOR),
    "round-major": (EFFICIENCY, RELIABILITY, ROUND_MAJOR),
    "job-major": (EFFICIENCY, RELIABILITY, JOB_MAJOR),
}


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment: scenario shape, scheduler choice and seeds."""

    clusters: int = 10
    jobs: int = 200
    lam: float = MEDIUM_LAM
    scheduler: str = "insurance"
    epsilon: float = 0.6
    reference: str = "greedy"
    seeds: tuple[int, ...] = tuple(range(10))
    topology_seed: int = 0
    horizon: float = 200000.0
    model_refresh: float = 4.0
    downtime: float = 4.0
    workers: int = 1

    def __post_init__(self) -> None:
        if self.clusters < 3:
            raise ValueError("need at least three clusters")
        if self.jobs < 1:
            raise ValueError("need at least one job")
        if self.lam <= 0.0:
            raise ValueError("arrival rate must be positive")
        if self.scheduler not in SCHEDULERS:
            raise ValueError(f"unknown scheduler {self.scheduler!r}")
        if self.reference not in SCHEDULERS:
            raise ValueError(f"unknown reference scheduler {self.reference!r}")
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError("epsilon must lie in (0, 1)")
        if not self.seeds:
            raise ValueError("need at least one seed")
        if self.model_refresh < 0.0:
            raise ValueError("model refresh must be non-negative")
        if self.downtime <= 0.0:
            raise ValueError("downtime must be positive")
        if self.workers < 1:
            raise ValueError("need at least one worker")
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["seeds"] = list(self.seeds)
        return d


def make_scheduler(name: str, epsilon: float = 0.6, variant: str | None = None):
    """Scheduler instance by registry name (plus ablation variant)."""
    if name == "insurance":
        if variant is None:
            return InsuranceScheduler(InsurancePolicy(epsilon=epsilon))
        round1, round2, allocation = ABLATION_VARIANTS[variant]
        return InsuranceScheduler(InsurancePolicy(
            epsilon=epsilon, round1=round1, round2=round2, allocation=allocation))
    if name == "greedy":
        return GreedyScheduler()
    if name == "speculative":
        return SpeculativeScheduler()
    if name == "cloning":
        return CloningScheduler()
    raise ValueError(f"unknown scheduler {name!r}")


def build_scenario(config: ExperimentConfig, seed: int) -> Scenario:
    """Topology fixed per experiment; job stream varies with the seed."""
    topo = gen_topology(TopologySpec.desk(config.clusters),
                        seed=config.topology_seed)
    jobs = gen_workload(WorkloadSpec.desk(config.jobs, config.lam), topo,
                        seed=100000 + seed)
    return Scenario(topo, jobs)


def run_single(config: ExperimentConfig, scheduler: str, seed: int,
               epsilon: float | None = None,
               variant: str | None = None) -> SimResult:
    scenario = build_scenario(config, seed)
    sched = make_scheduler(scheduler, epsilon if epsilon is not None else config.epsilon,
                           variant)
    engine_config = EngineConfig(horizon=config.horizon,
                                 model_refresh=config.model_refresh,
                                 downtime=config.downtime)
    return simulate(scenario, sched, seed=seed, config=engine_config)


def _run_point(args: tuple) -> tuple:
    config_dict, label, scheduler, seed, epsilon, variant = args
    config = ExperimentConfig.from_dict(config_dict)
    result = run_single(config, scheduler, seed, epsilon, variant)
    return (label, seed, result.flowtime_values(), sorted(result.flowtimes),
            result.makespan, result.copies_launched, result.copies_killed)


def _fan_out(config: ExperimentConfig, points: list[tuple]) -> dict:
    """Run (label, scheduler, seed, epsilon, variant) points, possibly pooled.

    Returns {(label, seed): run summary}; aggregation stays single-threaded
    and sorts by key so the pool never affects output order.
    """
    jobs = [(config.to_dict(),) + p for p in points]
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            raw = list(pool.map(_run_point, jobs))
    else:
        raw = [_run_point(j) for j in jobs]
    out = {}
    for label, seed, flows, job_ids, makespan, launched, killed in raw:
        out[(label, seed)] = {
            "flows": flows, "job_ids": job_ids, "makespan": makespan,
            "copies_launched": launched, "copies_killed": killed,
        }
    return out


def _percentile(values: list[float], q: float) -> float:
    return float(np.percentile(np.asarray(values, dtype=float), q))


def _metric_rows(label: str, runs: dict) -> list[dict]:
    """Per-seed and pooled statistics for one scheduler label."""
    rows = []
    pooled: list[float] = []
    makespans = []
    launched = 0
    for (lbl, seed), run in sorted(runs.items()):
        if lbl != label:
            continue
        flows = run["flows"]
        pooled.extend(flows)
        makespans.append(run["makespan"])
        launched += run["copies_launched"]
        rows.append({"scheduler": label, "seed": str(seed),
                     "statistic": "mean_flowtime",
                     "value": float(np.mean(flows))})
    rows.append({"scheduler": label, "seed": "all",
                 "statistic": "mean_flowtime", "value": float(np.mean(pooled))})
    rows.append({"scheduler": label, "seed": "all",
                 "statistic": "median_flowtime", "value": _percentile(pooled, 50.0)})
    rows.append({"scheduler": label, "seed": "all",
                 "statistic": "p95_flowtime", "value": _percentile(pooled, 95.0)})
    rows.append({"scheduler": label, "seed": "all",
                 "statistic": "mean_makespan", "value": float(np.mean(makespans))})
    rows.append({"scheduler": label, "seed": "all",
                 "statistic": "copies_launched", "value": float(launched)})
    return rows


def _cdf_rows(label: str, runs: dict) -> list[dict]:
    pooled: list[float] = []
    for (lbl, _), run in sorted(runs.items()):
        if lbl == label:
            pooled.extend(run["flows"])
    pooled.sort()
    n = len(pooled)
    return [{"scheduler": label, "flowtime": v, "fraction": (i + 1) / n}
            for i, v in enumerate(pooled)]


def _per_job_means(label: str, runs: dict) -> dict[str, float]:
    sums: dict[str, float] = {}
    counts: dict[str, int] = {}
    for (lbl, _), run in sorted(runs.items()):
        if lbl != label:
            continue
        for job_id, flow in zip(run["job_ids"], run["flows"]):
            sums[job_id] = sums.get(job_id, 0.0) + flow
            counts[job_id] = counts.get(job_id, 0) + 1
    return {j: sums[j] / counts[j] for j in sums}


@dataclass
class ComparisonResult:
    """All result tables of one scheduler comparison."""

    config: ExperimentConfig
    metrics: list[dict]
    cdf: list[dict]
    reduction: list[dict]
    means: dict[str, float] = field(default_factory=dict)


def compare_schedulers(config: ExperimentConfig,
                       schedulers: tuple[str, ...] = SCHEDULERS) -> ComparisonResult:
    """Paired comparison of schedulers over the config's seeds."""
    points = []
    for name in schedulers:
        for seed in config.seeds:
            points.append((name, name, seed, config.epsilon, None))
    runs = _fan_out(config, points)

    metrics: list[dict] = []
    cdf: list[dict] = []
    means: dict[str, float] = {}
    for name in schedulers:
        rows = _metric_rows(name, runs)
        metrics.extend(rows)
        means[name] = next(r["value"] for r in rows
                           if r["seed"] == "all" and r["statistic"] == "mean_flowtime")
        cdf.extend(_cdf_rows(name, runs))

    reduction: list[dict] = []
    if config.reference in means and config.scheduler in means:
        ref_means = _per_job_means(config.reference, runs)
        alg_means = _per_job_means(config.scheduler, runs)
        for job_id in sorted(ref_means):
            ref = ref_means[job_id]
            alg = alg_means.get(job_id, math.nan)
            reduction.append({
                "job": job_id, "reference": ref, "candidate": alg,
                "reduction": (ref - alg) / ref if ref > 0 else 0.0,
            })
    return ComparisonResult(config, metrics, cdf, reduction, means)


@dataclass
class SweepResult:
    """Mean flowtimes over an epsilon x arrival-rate grid."""

    config: ExperimentConfig
    epsilons: tuple[float, ...]
    lams: tuple[float, ...]
    table: dict[tuple[float, float], float]
    best_epsilon: dict[float, float]

    def rows(self) -> list[dict]:
        out = []
        for lam in self.lams:
            row = {"lam": lam}
            for eps in self.epsilons:
                row[f"eps_{eps:g}"] = self.table[(lam, eps)]
            row["best_epsilon"] = self.best_epsilon[lam]
            out.append(row)
        return out


def sweep_epsilon(config: ExperimentConfig,
                  epsilons: tuple[float, ...] = EPSILON_GRID,
                  lams: tuple[float, ...] = LAM_GRID) -> SweepResult:
    """Insurance mean flowtime across the epsilon x lam grid."""
    table: dict[tuple[float, float], float] = {}
    best: dict[float, float] = {}
    for lam in lams:
        cfg = replace(config, lam=lam)
        points = [(f"eps{eps:g}", "insurance", seed, eps, None)
                  for eps in epsilons for seed in cfg.seeds]
        runs = _fan_out(cfg, points)
        for eps in epsilons:
            pooled = []
            for seed in cfg.seeds:
                pooled.extend(runs[(f"eps{eps:g}", seed)]["flows"])
            table[(lam, eps)] = float(np.mean(pooled))
        best[lam] = min(epsilons, key=lambda e: (table[(lam, e)], e))
    return SweepResult(config, tuple(epsilons), tuple(lams), table, best)


@dataclass
class AblationResult:
    """Mean flowtime per insuring-principle variant."""

    config: ExperimentConfig
    means: dict[str, float]

    def rows(self) -> list[dict]:
        return [{"variant": v, "mean_flowtime": self.means[v]}
                for v in ABLATION_VARIANTS]


def ablate(config: ExperimentConfig) -> AblationResult:
    """Run the six insuring-principle variants; duplicates share runs."""
    by_policy: dict[tuple, str] = {}
    points = []
    for variant, policy in ABLATION_VARIANTS.items():
        if policy in by_policy:
            continue
        by_policy[policy] = variant
        for seed in config.seeds:
            points.append((variant, "insurance", seed, config.epsilon, variant))
    runs = _fan_out(config, points)
    means: dict[str, float] = {}
    for variant, policy in ABLATION_VARIANTS.items():
        label = by_policy[policy]
        pooled = []
        for seed in config.seeds:
            pooled.extend(runs[(label, seed)]["flows"])
        means[variant] = float(np.mean(pooled))
    return AblationResult(config, means)


def verify_suite(sequences: int = 100, instances: int = 30,
                 audit_seeds: tuple[int, ...] = (0, 1, 2),
                 seed: int = 0) -> dict:
    """Run the verification instruments and return a JSON-ready report."""
    rng = np.random.default_rng(seed)
    diminishing_ok = True
    worst_gap = 0.0
    for _ in range(sequences):
        report = check_diminishing_returns(random_rate_sequence(rng))
        gaps = [b - a for a, b in zip(report.shares, report.shares[1:])]
        worst_gap = max(worst_gap, max(gaps, default=0.0))
        diminishing_ok = diminishing_ok and report.ok

    config = ExperimentConfig(clusters=6, jobs=30, lam=MEDIUM_LAM,
                              seeds=tuple(audit_seeds))
    violations = 0
    audited = 0
    for name in SCHEDULERS:
        for s in config.seeds:
            scenario = build_scenario(config, s)
            result = simulate(scenario, make_scheduler(name, config.epsilon), seed=s,
                              config=EngineConfig(horizon=config.horizon,
                                                  model_refresh=config.model_refresh,
                                                  downtime=config.downtime))
            found = audit_constraints(result.trace, scenario)
            violations += len(found)
            audited += 1

    tiny = [random_tiny_instance(rng) for _ in range(instances)]
    competitive = competitive_check(tiny)
    checked = [e for e in competitive.entries if "ok" in e]

    ok = diminishing_ok and violations == 0 and competitive.all_ok
    return {
        "ok": ok,
        "diminishing": {"sequences": sequences, "ok": diminishing_ok,
                        "worst_share_increase": worst_gap},
        "audit": {"traces": audited, "violations": violations,
                  "ok": violations == 0},
        "competitive": {"instances": instances, "checked": len(checked),
                        "skipped": len(competitive.entries) - len(checked),
                        "ok": competitive.all_ok, "note": competitive.note},
    }


# ---------------------------------------------------------------------------
# result files

def _format_value(value) -> str:
    if isinstance(value, float):
        return format(value, ".10g")
    return str(value)


def write_csv(path: str, header: list[str], rows: list[dict]) -> None:
    """Stable CSV writer: fixed column order, fixed float formatting."""
    with open(path, "w", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_format_value(row[k]) for k in header])


def write_report(path: str, report: dict) -> None:
    with open(path, "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_comparison(out_dir: str, result: ComparisonResult) -> list[str]:
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    metrics = os.path.join(out_dir, "metrics.csv")
    write_csv(metrics, ["scheduler", "seed", "statistic", "value"], result.metrics)
    paths.append(metrics)
    cdf = os.path.join(out_dir, "cdf.csv")
    write_csv(cdf, ["scheduler", "flowtime", "fraction"], result.cdf)
    paths.append(cdf)
    reduction = os.path.join(out_dir, "reduction.csv")
    write_csv(reduction, ["job", "reference", "candidate", "reduction"],
              result.reduction)
    paths.append(reduction)
    return paths


def write_sweep(out_dir: str, result: SweepResult) -> list[str]:
    os.makedirs(out_dir, exist_ok=True)
    header = ["lam"] + [f"eps_{e:g}" for e in result.epsilons] + ["best_epsilon"]
    path = os.path.join(out_dir, "metrics.csv")
    write_csv(path, header, result.rows())
    return [path]


def write_ablation(out_dir: str, result: AblationResult) -> list[str]:
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "metrics.csv")
    write_csv(path, ["variant", "mean_flowtime"], result.rows())
    return [path]


def run_batch(config: ExperimentConfig) -> tuple[list[dict], list[SimResult]]:
    """Serial runs of the config's scheduler over its seeds, traces included."""
    results = []
    runs: dict[tuple[str, int], dict] = {}
    for seed in config.seeds:
        res = run_single(config, config.scheduler, seed)
        results.append(res)
        runs[(config.scheduler, seed)] = {
            "flows": res.flowtime_values(), "job_ids": sorted(res.flowtimes),
            "makespan": res.makespan, "copies_launched": res.copies_launched,
            "copies_killed": res.copies_killed,
        }
    return _metric_rows(config.scheduler, runs), results
