"""Topology and workload generation.

Clusters fall into three scale classes (a few big cloud sites, more medium
sites, many small edge sites) assigned by descending degree of a
heavy-tailed degree sequence. Per-cluster speeds and per-link bandwidths
are discretized truncated normals. Jobs arrive as a Poisson process and
carry layered task DAGs whose first stage reads inputs scattered over the
edge and medium clusters.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr, ndtri

from .dist import EmpiricalDistribution
from .perfmodel import ClusterModel, LinkModel

LARGE = "large"
MEDIUM = "medium"
SMALL = "small"

DEFAULT_OP = "compute"


def discretized_normal(mean: float, rsd: float, bins: int = 16,
                       floor_frac: float = 0.05) -> EmpiricalDistribution:
    """Equal-mass discretization of a normal truncated below at floor_frac * mean."""
    if mean <= 0 or rsd <= 0:
        raise ValueError("mean and relative standard deviation must be positive")
    sigma = rsd * mean
    tail = ndtr((floor_frac * mean - mean) / sigma)
    q = (np.arange(bins) + 0.5) / bins
    support = mean + sigma * ndtri(tail + q * (1.0 - tail))
    return EmpiricalDistribution.from_pairs(
        [(float(v), 1.0 / bins) for v in support])


@dataclass(frozen=True)
class ClassSpec:
    """Parameter ranges of one cluster scale class."""

    name: str
    fraction: float
    slots: tuple[int, int]
    gate_ratio: tuple[float, float]
    speed_mean: tuple[float, float]
    speed_rsd: tuple[float, float]
    failure: tuple[float, float]


@dataclass(frozen=True)
class TopologySpec:
    """Shape of a generated topology."""

    cluster_count: int
    classes: tuple[ClassSpec, ...]
    wan_mean: tuple[float, float] = (64.0, 256.0)
    wan_rsd: tuple[float, float] = (0.2, 0.5)
    speed_bins: int = 16
    degree_shape: float = 0.7

    def __post_init__(self) -> None:
        if self.cluster_count < 3:
            raise ValueError("need at least three clusters")
        if abs(sum(c.fraction for c in self.classes) - 1.0) > 1e-9:
            raise ValueError("class fractions must sum to 1")

    @classmethod
    def full(cls, cluster_count: int = 100) -> "TopologySpec":
        """Cloud-edge mix with the published parameter ranges."""
        return cls(
            cluster_count=cluster_count,
            classes=(
                ClassSpec(LARGE, 0.05, (500, 1500), (0.55, 0.75),
                          (174.0, 355.0), (0.25, 0.6), (0.002, 0.011)),
                ClassSpec(MEDIUM, 0.20, (50, 500), (0.65, 0.85),
                          (128.0, 241.0), (0.55, 0.85), (0.02, 0.2)),
                ClassSpec(SMALL, 0.75, (10, 50), (0.75, 0.95),
                          (68.0, 179.0), (0.35, 0.75), (0.05, 0.5)),
            ),
        )

    @classmethod
    def desk(cls, cluster_count: int = 10) -> "TopologySpec":
        """Small configuration with the same shape, sized for quick runs.

        At ten clusters the three classes are tuned to play distinct roles
        rather than shrink the full-scale ranges uniformly. Large clusters
        are scarce, fast and dependable, medium clusters are steady with a
        wide speed spread, and the many small edge clusters are quick but
        an order of magnitude more failure-prone. Copy placement therefore
        faces real trade-offs: stacking copies inside one edge cluster
        risks losing all of them to a single fault, while a cross-class
        backup copy survives it. Speed ranges are kept narrower than at
        full scale and the WAN floor higher, so that remote clusters stay
        inside the default admission threshold instead of collapsing every
        choice to one site.
        """
        return cls(
            cluster_count=cluster_count,
            classes=(
                ClassSpec(LARGE, 0.05, (14, 22), (0.55, 0.75),
                          (240.0, 320.0), (0.25, 0.6), (0.002, 0.01)),
                ClassSpec(MEDIUM, 0.20, (12, 18), (0.65, 0.85),
                          (160.0, 210.0), (0.30, 0.50), (0.006, 0.02)),
                ClassSpec(SMALL, 0.75, (4, 10), (0.75, 0.95),
                          (180.0, 260.0), (0.15, 0.35), (0.05, 0.15)),
            ),
            wan_mean=(160.0, 384.0),
        )


@dataclass
class Topology:
    """Generated clusters, links and bookkeeping for tests."""

    clusters: dict[str, ClusterModel]
    links: LinkModel
    classes: dict[str, str]
    degrees: dict[str, float]

    def total_slots(self) -> int:
        return sum(c.slots for c in self.clusters.values())

    def ids_of_class(self, *names: str) -> list[str]:
        return sorted(c for c, k in self.classes.items() if k in names)


def _class_counts(spec: TopologySpec) -> list[int]:
    counts = []
    for cs in spec.classes[:-1]:
        counts.append(max(1, int(cs.fraction * spec.cluster_count)))
    counts.append(spec.cluster_count - sum(counts))
    if counts[-1] < 1:
        raise ValueError("cluster count too small for the class fractions")
    return counts


def gen_topology(spec: TopologySpec, seed: int) -> Topology:
    """Deterministic topology draw for (spec, seed)."""
    rng = np.random.default_rng(seed)
    n = spec.cluster_count
    width = max(2, len(str(n - 1)))
    weights = 1.0 + rng.pareto(spec.degree_shape, n)
    order = np.argsort(-weights, kind="stable")
    ids = [f"c{i:0{width}d}" for i in range(n)]
    degrees = {ids[rank]: float(weights[pos]) for rank, pos in enumerate(order)}

    counts = _class_counts(spec)
    classes: dict[str, str] = {}
    rank = 0
    for cs, count in zip(spec.classes, counts):
        for _ in range(count):
            classes[ids[rank]] = cs.name
            rank += 1

    by_name = {cs.name: cs for cs in spec.classes}
    clusters: dict[str, ClusterModel] = {}
    for cid in ids:
        cs = by_name[classes[cid]]
        slots = int(rng.integers(cs.slots[0], cs.slots[1] + 1))
        ratio = float(rng.uniform(*cs.gate_ratio))
        mean = float(rng.uniform(*cs.speed_mean))
        rsd = float(rng.uniform(*cs.speed_rsd))
        failure = float(rng.uniform(*cs.failure))
        member_bw = float(rng.uniform(*spec.wan_mean))
        cap = ratio * slots * member_bw
        clusters[cid] = ClusterModel(
            cluster_id=cid,
            slots=slots,
            ingress_cap=cap,
            egress_cap=cap,
            failure_prob=failure,
            default_dist=discretized_normal(mean, rsd, spec.speed_bins),
        )

    link_dists: dict[tuple[str, str], EmpiricalDistribution] = {}
    for src in ids:
        for dst in ids:
            if src == dst:
                continue
            mean = float(rng.uniform(*spec.wan_mean))
            rsd = float(rng.uniform(*spec.wan_rsd))
            link_dists[(src, dst)] = discretized_normal(mean, rsd, spec.speed_bins)
    default = discretized_normal(
        (spec.wan_mean[0] + spec.wan_mean[1]) / 2.0,
        (spec.wan_rsd[0] + spec.wan_rsd[1]) / 2.0,
        spec.speed_bins,
    )
    return Topology(clusters=clusters, links=LinkModel(default, link_dists),
                    classes=classes, degrees=degrees)


@dataclass(frozen=True)
class TaskSpec:
    """One task of a job DAG."""

    task_id: str
    op_type: str
    datasize: float
    inputs: tuple[tuple[str, float], ...]
    preds: tuple[str, ...]
    stage: int


@dataclass(frozen=True)
class Job:
    job_id: str
    arrival: float
    tasks: tuple[TaskSpec, ...]

    def task_count(self) -> int:
        return len(self.tasks)


@dataclass(frozen=True)
class WorkloadSpec:
    """Shape of a generated job stream."""

    job_count: int
    lam: float
    mix: tuple[tuple[float, tuple[int, int]], ...]
    stage_range: tuple[int, int] = (2, 4)
    fanin_range: tuple[int, int] = (2, 4)
    datasize_range: tuple[float, float] = (60.0, 480.0)
    scatter_range: tuple[int, int] = (1, 3)
    op_type: str = DEFAULT_OP

    def __post_init__(self) -> None:
        if self.job_count < 0:
            raise ValueError("job count must be non-negative")
        if self.lam <= 0:
            raise ValueError("arrival rate must be positive")
        if abs(sum(f for f, _ in self.mix) - 1.0) > 1e-9:
            raise ValueError("mix fractions must sum to 1")

    @classmethod
    def full(cls, job_count: int, lam: float) -> "WorkloadSpec":
        """Published job-size mix: mostly small jobs, a heavy tail of large ones."""
        return cls(
            job_count=job_count,
            lam=lam,
            mix=((0.89, (1, 150)), (0.08, (151, 500)), (0.03, (501, 1000))),
        )

    @classmethod
    def desk(cls, job_count: int, lam: float) -> "WorkloadSpec":
        """Same mix shape with task counts and datasizes sized for quick runs.

        Datasizes run a few slots per task at desk-scale speeds, long enough
        for cluster faults to interrupt a meaningful share of copies; much
        shorter tasks would finish before failures matter and copy placement
        would stop having consequences.
        """
        return cls(
            job_count=job_count,
            lam=lam,
            mix=((0.89, (2, 12)), (0.08, (14, 40)), (0.03, (42, 80))),
            datasize_range=(150.0, 1200.0),
        )


def gen_workload(spec: WorkloadSpec, topology: Topology, seed: int) -> list[Job]:
    """Deterministic Poisson job stream with layered task DAGs."""
    rng = np.random.default_rng(seed)
    eligible = topology.ids_of_class(SMALL, MEDIUM)
    if not eligible:
        eligible = sorted(topology.clusters)
    fractions = [f for f, _ in spec.mix]
    jobs: list[Job] = []
    now = 0.0
    for j in range(spec.job_count):
        now += float(rng.exponential(1.0 / spec.lam))
        job_id = f"j{j:04d}"
        cls_idx = int(rng.choice(len(spec.mix), p=fractions))
        lo, hi = spec.mix[cls_idx][1]
        n_tasks = int(rng.integers(lo, hi + 1))
        n_stages = min(int(rng.integers(spec.stage_range[0], spec.stage_range[1] + 1)),
                       n_tasks)
        widths = [1] * n_stages
        spare = n_tasks - n_stages
        if spare > 0:
            extra = rng.multinomial(spare, [1.0 / n_stages] * n_stages)
            widths = [w + int(e) for w, e in zip(widths, extra)]
        tasks: list[TaskSpec] = []
        prev_stage: list[str] = []
        idx = 0
        for stage, width_s in enumerate(widths):
            stage_ids = []
            for _ in range(width_s):
                task_id = f"{job_id}.t{idx:03d}"
                datasize = float(rng.uniform(*spec.datasize_range))
                if stage == 0:
                    k = min(int(rng.integers(spec.scatter_range[0],
                                             spec.scatter_range[1] + 1)),
                            len(eligible))
                    picks = sorted(rng.choice(len(eligible), size=k, replace=False))
                    inputs = tuple((eligible[p], datasize / k) for p in picks)
                    preds: tuple[str, ...] = ()
                else:
                    f = min(int(rng.integers(spec.fanin_range[0],
                                             spec.fanin_range[1] + 1)),
                            len(prev_stage))
                    picks = sorted(rng.choice(len(prev_stage), size=f, replace=False))
                    preds = tuple(prev_stage[p] for p in picks)
                    inputs = ()
                tasks.append(TaskSpec(
                    task_id=task_id,
                    op_type=spec.op_type,
                    datasize=datasize,
                    inputs=inputs,
                    preds=preds,
                    stage=stage,
                ))
                stage_ids.append(task_id)
                idx += 1
            prev_stage = stage_ids
        jobs.append(Job(job_id=job_id, arrival=now, tasks=tuple(tasks)))
    return jobs
