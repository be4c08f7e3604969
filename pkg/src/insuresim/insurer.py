"""Multi-round insurance planning over per-slot snapshots.

Each scheduling slot, alive jobs are ranked by unprocessed datasize and the
front of the queue receives promissory slot budgets. Round one gives every
waiting task at most one copy, round two adds a hedge copy to the least
reliable single-copy tasks, and later rounds add copies only while the
expected slot-time spent keeps shrinking. Copies must pass slot, gate and
rate-floor admissibility; all ties break deterministically.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from .perfmodel import PerformanceModel

OK = "OK"
NO_SLOT = "NO_SLOT"
INGRESS = "INGRESS"
EGRESS = "EGRESS"
RATE_FLOOR = "RATE_FLOOR"

_GATE_TOL = 1e-9
_RATE_TOL = 1e-12

EFFICIENCY = "efficiency"
RELIABILITY = "reliability"
ROUND_MAJOR = "round-major"
JOB_MAJOR = "job-major"


@dataclass
class JobState:
    """Per-slot scheduling view of one alive job."""

    job_id: str
    arrival: float
    unprocessed: float
    running_copies: int
    promised: int = 0
    rank: int = -1


@dataclass(frozen=True)
class CopyView:
    """Observable state of one live copy (observation may lag)."""

    cluster: str
    start: float
    observed_rate: float | None = None
    observed_remaining: float | None = None


@dataclass(frozen=True)
class TaskView:
    """Immutable per-slot view of a ready or running task."""

    task_id: str
    job_id: str
    op_type: str
    datasize: float
    remaining: float
    input_locs: tuple[str, ...]
    placement: tuple[str, ...]
    topo_index: int
    copies: tuple[CopyView, ...] = ()
    total_launched: int = 0


@dataclass
class ClusterState:
    """Slot availability of one cluster at planning time."""

    cluster_id: str
    slots: int
    free_slots: int
    up: bool = True


@dataclass
class JobView:
    state: JobState
    tasks: list[TaskView]
    total_tasks: int


class GateLedger:
    """Reserved expected ingress/egress bandwidth per cluster.

    Reservations are held per copy for the copy's lifetime and released
    exactly once.
    """

    def __init__(self, ingress_caps: dict[str, float], egress_caps: dict[str, float]) -> None:
        self.ingress_caps = dict(ingress_caps)
        self.egress_caps = dict(egress_caps)
        self.reserved_in = {c: 0.0 for c in self.ingress_caps}
        self.reserved_out = {c: 0.0 for c in self.egress_caps}
        self._records: dict[object, tuple[str, tuple[tuple[str, float], ...]]] = {}

    def clone(self) -> "GateLedger":
        other = GateLedger(self.ingress_caps, self.egress_caps)
        other.reserved_in = dict(self.reserved_in)
        other.reserved_out = dict(self.reserved_out)
        other._records = dict(self._records)
        return other

    def fits(self, dst: str, demands: list[tuple[str, float]]) -> str | None:
        """None when the copy's demands fit, else the violated gate."""
        total_in = sum(amount for _, amount in demands)
        if self.reserved_in[dst] + total_in > self.ingress_caps[dst] + _GATE_TOL:
            return INGRESS
        per_src: dict[str, float] = {}
        for src, amount in demands:
            per_src[src] = per_src.get(src, 0.0) + amount
        for src, amount in per_src.items():
            if self.reserved_out[src] + amount > self.egress_caps[src] + _GATE_TOL:
                return EGRESS
        return None

    def reserve(self, key, dst: str, demands: list[tuple[str, float]]) -> None:
        if key in self._records:
            raise ValueError(f"duplicate reservation key {key!r}")
        for src, amount in demands:
            self.reserved_in[dst] += amount
            self.reserved_out[src] += amount
        self._records[key] = (dst, tuple(demands))

    def release(self, key) -> None:
        if key not in self._records:
            raise KeyError(f"unknown reservation {key!r}")
        dst, demands = self._records.pop(key)
        for src, amount in demands:
            self.reserved_in[dst] -= amount
            self.reserved_out[src] -= amount

    def usage(self) -> tuple[dict[str, float], dict[str, float]]:
        return dict(self.reserved_in), dict(self.reserved_out)


@dataclass
class PlanningSnapshot:
    """Immutable planning input: jobs, cluster availability, model, ledger."""

    t: float
    total_slots: int
    clusters: dict[str, ClusterState]
    model: PerformanceModel
    ledger: GateLedger
    jobs: list[JobView]
    extra_copies_live: int = 0


@dataclass(frozen=True)
class PlanEntry:
    task_id: str
    cluster: str
    copies: int = 1


@dataclass
class InsurancePlan:
    """Copies to launch this slot, in assignment order."""

    slot: float
    entries: list[PlanEntry] = field(default_factory=list)

    def add(self, task_id: str, cluster: str) -> None:
        if self.entries:
            last = self.entries[-1]
            if last.task_id == task_id and last.cluster == cluster:
                self.entries[-1] = PlanEntry(task_id, cluster, last.copies + 1)
                return
        self.entries.append(PlanEntry(task_id, cluster, 1))

    def total_copies(self) -> int:
        return sum(e.copies for e in self.entries)

    def to_json(self) -> str:
        return json.dumps(
            {
                "slot": self.slot,
                "entries": [
                    {"task": e.task_id, "cluster": e.cluster, "copies": e.copies}
                    for e in self.entries
                ],
            },
            indent=2,
        )


@dataclass(frozen=True)
class InsurancePolicy:
    """Knobs of the insurance scheduler."""

    epsilon: float = 0.6
    round1: str = EFFICIENCY
    round2: str = RELIABILITY
    allocation: str = ROUND_MAJOR

    def __post_init__(self) -> None:
        if not 0.0 < self.epsilon <= 1.0:
            raise ValueError("epsilon must lie in (0, 1]")
        if self.round1 not in (EFFICIENCY, RELIABILITY):
            raise ValueError(f"unknown round-1 principle {self.round1!r}")
        if self.round2 not in (EFFICIENCY, RELIABILITY):
            raise ValueError(f"unknown round-2 principle {self.round2!r}")
        if self.allocation not in (ROUND_MAJOR, JOB_MAJOR):
            raise ValueError(f"unknown allocation mode {self.allocation!r}")


def prioritize(states: list[JobState], epsilon: float, total_slots: int) -> list[JobState]:
    """Rank jobs by unprocessed datasize and hand out promissory budgets.

    The first ceil(epsilon * N) jobs are promised
    ceil(total_slots / (epsilon * N)) slots each; the rest are promised none.
    """
    if not 0.0 < epsilon <= 1.0:
        raise ValueError("epsilon must lie in (0, 1]")
    if total_slots < 0:
        raise ValueError("total slot count must be non-negative")
    order = sorted(states, key=lambda s: (s.unprocessed, s.arrival, s.job_id))
    n = len(order)
    if n == 0:
        return order
    front = max(1, math.ceil(epsilon * n))
    budget = math.ceil(total_slots / (epsilon * n))
    for rank, state in enumerate(order):
        state.rank = rank
        state.promised = budget if rank < front else 0
    return order


def admissible(task: TaskView, cluster: ClusterState, model: PerformanceModel,
               ledger: GateLedger, epsilon: float | None) -> tuple[bool, str]:
    """Can one more copy of this task run in this cluster right now?

    Checks a free slot, gate headroom for the copy's expected transfer
    demands, and (when epsilon is given) the rate floor: the cluster's
    expected single-copy rate must stay within (1 + epsilon) of the best any
    cluster could offer.
    """
    if not cluster.up or cluster.free_slots <= 0:
        return False, NO_SLOT
    demands = model.gate_demands(task.input_locs, cluster.cluster_id)
    reason = ledger.fits(cluster.cluster_id, demands)
    if reason is not None:
        return False, reason
    if epsilon is not None:
        floor = model.global_optimal_rate(task) / (1.0 + epsilon)
        if model.expected_rate(task, cluster.cluster_id) < floor - _RATE_TOL:
            return False, RATE_FLOOR
    return True, OK


class PlanBuilder:
    """Mutable working state shared by the planning rounds.

    Tracks copies planned so far this slot on top of the snapshot's live
    state, so admissibility and budgets see the plan as it grows.
    """

    def __init__(self, snapshot: PlanningSnapshot) -> None:
        self.snapshot = snapshot
        self.plan = InsurancePlan(slot=snapshot.t)
        self.planned: dict[str, list[str]] = {}
        self._next_key = 0

    def placement(self, task: TaskView) -> tuple[str, ...]:
        return task.placement + tuple(self.planned.get(task.task_id, ()))

    def copy_count(self, task: TaskView) -> int:
        return len(task.placement) + len(self.planned.get(task.task_id, ()))

    def admissible(self, task: TaskView, cluster_id: str,
                   epsilon: float | None) -> tuple[bool, str]:
        return admissible(task, self.snapshot.clusters[cluster_id],
                          self.snapshot.model, self.snapshot.ledger, epsilon)

    def admissible_clusters(self, task: TaskView, epsilon: float | None) -> list[str]:
        out = []
        for cluster_id in sorted(self.snapshot.clusters):
            ok, _ = self.admissible(task, cluster_id, epsilon)
            if ok:
                out.append(cluster_id)
        return out

    def assign(self, job: JobState | None, task: TaskView, cluster_id: str) -> None:
        model = self.snapshot.model
        demands = model.gate_demands(task.input_locs, cluster_id)
        self.snapshot.ledger.reserve(("plan", self._next_key), cluster_id, demands)
        self._next_key += 1
        self.snapshot.clusters[cluster_id].free_slots -= 1
        self.plan.add(task.task_id, cluster_id)
        self.planned.setdefault(task.task_id, []).append(cluster_id)
        if job is not None:
            job.running_copies += 1


def _budget(job: JobView) -> int:
    return job.state.promised - job.state.running_copies


def _round1_tasks(builder: PlanBuilder, job: JobView) -> list[TaskView]:
    waiting = [t for t in job.tasks if builder.copy_count(t) == 0]
    waiting.sort(key=lambda t: (t.topo_index, -t.datasize, t.task_id))
    return waiting


def _pick_best(builder: PlanBuilder, task: TaskView, candidates: list[str], score) -> tuple[str | None, float]:
    best_cluster = None
    best_score = -math.inf
    for cluster_id in candidates:
        s = score(cluster_id)
        if s > best_score + _RATE_TOL:
            best_score = s
            best_cluster = cluster_id
    return best_cluster, best_score


def _run_round1(builder: PlanBuilder, jobs: list[JobView], policy: InsurancePolicy) -> set[str]:
    """One copy for each waiting task, fastest (or safest) admissible cluster."""
    model = builder.snapshot.model
    assigned: set[str] = set()
    for job in jobs:
        for task in _round1_tasks(builder, job):
            if _budget(job) <= 0:
                break
            candidates = builder.admissible_clusters(task, policy.epsilon)
            if not candidates:
                continue
            if policy.round1 == EFFICIENCY:
                score = lambda c: model.expected_rate(task, c)
            else:
                score = lambda c: model.reliability(task, (c,))
            cluster_id, _ = _pick_best(builder, task, candidates, score)
            if cluster_id is None:
                continue
            builder.assign(job.state, task, cluster_id)
            assigned.add(task.task_id)
    return assigned


def _run_round2(builder: PlanBuilder, jobs: list[JobView], policy: InsurancePolicy) -> set[str]:
    """A hedge copy for single-copy tasks, least reliable first.

    The extra copy must strictly improve the round's objective; with the
    reliability principle and no failure risk anywhere, no copy is placed.
    """
    model = builder.snapshot.model
    assigned: set[str] = set()
    for job in jobs:
        singles = [t for t in job.tasks if builder.copy_count(t) == 1]
        singles.sort(key=lambda t: (model.reliability(t, builder.placement(t)),
                                    t.topo_index, t.task_id))
        for task in singles:
            if _budget(job) <= 0:
                break
            candidates = builder.admissible_clusters(task, policy.epsilon)
            if not candidates:
                continue
            placement = builder.placement(task)
            if policy.round2 == RELIABILITY:
                current = model.reliability(task, placement)
                score = lambda c: model.reliability(task, placement + (c,))
            else:
                current = model.exec_rate(task, placement)
                score = lambda c: model.exec_rate(task, placement + (c,))
            cluster_id, best = _pick_best(builder, task, candidates, score)
            if cluster_id is None or best <= current + _RATE_TOL:
                continue
            builder.assign(job.state, task, cluster_id)
            assigned.add(task.task_id)
    return assigned


def _run_saving_pass(builder: PlanBuilder, jobs: list[JobView], epsilon: float,
                     eligible: set[str]) -> set[str]:
    """One more copy per eligible task when it still saves total slot-time.

    The c-th copy is admitted only if the expected execution time with c-1
    copies exceeds (c+1)/c times the expected time with c copies.
    """
    model = builder.snapshot.model
    assigned: set[str] = set()
    for job in jobs:
        tasks = [t for t in job.tasks if t.task_id in eligible]
        tasks.sort(key=lambda t: (t.topo_index, -t.datasize, t.task_id))
        for task in tasks:
            if _budget(job) <= 0:
                break
            candidates = builder.admissible_clusters(task, epsilon)
            if not candidates:
                continue
            placement = builder.placement(task)
            c = len(placement) + 1
            if c < 3:
                continue
            cluster_id, _ = _pick_best(
                builder, task, candidates,
                lambda cl: model.exec_rate(task, placement + (cl,)))
            if cluster_id is None:
                continue
            est_prev = model.est_exec_time(task, placement)
            est_new = model.est_exec_time(task, placement + (cluster_id,))
            if est_prev > (c + 1) / c * est_new:
                builder.assign(job.state, task, cluster_id)
                assigned.add(task.task_id)
    return assigned


def _prioritized_views(snapshot: PlanningSnapshot, epsilon: float) -> list[JobView]:
    states = [jv.state for jv in snapshot.jobs]
    order = prioritize(states, epsilon, snapshot.total_slots)
    by_id = {jv.state.job_id: jv for jv in snapshot.jobs}
    return [by_id[s.job_id] for s in order]


def insure(snapshot: PlanningSnapshot, policy: InsurancePolicy) -> InsurancePlan:
    """Full planning pass for one slot under the given policy."""
    builder = PlanBuilder(snapshot)
    jobs = _prioritized_views(snapshot, policy.epsilon)
    if policy.allocation == JOB_MAJOR:
        for job in jobs:
            _run_round1(builder, [job], policy)
            last = _run_round2(builder, [job], policy)
            while last:
                last = _run_saving_pass(builder, [job], policy.epsilon, last)
    else:
        _run_round1(builder, jobs, policy)
        last = _run_round2(builder, jobs, policy)
        while last:
            last = _run_saving_pass(builder, jobs, policy.epsilon, last)
    return builder.plan


def efficiency_round(snapshot: PlanningSnapshot, epsilon: float) -> InsurancePlan:
    """Round one alone (fastest admissible cluster per waiting task)."""
    builder = PlanBuilder(snapshot)
    policy = InsurancePolicy(epsilon=epsilon)
    _run_round1(builder, _prioritized_views(snapshot, epsilon), policy)
    return builder.plan


def reliability_round(snapshot: PlanningSnapshot, epsilon: float) -> InsurancePlan:
    """Round two alone (hedge copies for single-copy tasks)."""
    builder = PlanBuilder(snapshot)
    policy = InsurancePolicy(epsilon=epsilon)
    _run_round2(builder, _prioritized_views(snapshot, epsilon), policy)
    return builder.plan


def saving_round(snapshot: PlanningSnapshot, epsilon: float,
                 eligible: set[str] | None = None) -> InsurancePlan:
    """Saving passes alone, starting from the given eligible task set."""
    builder = PlanBuilder(snapshot)
    jobs = _prioritized_views(snapshot, epsilon)
    if eligible is None:
        eligible = {t.task_id for jv in snapshot.jobs for t in jv.tasks
                    if len(t.placement) >= 2}
    last = set(eligible)
    while last:
        last = _run_saving_pass(builder, jobs, epsilon, last)
    return builder.plan


class InsuranceScheduler:
    """Engine-facing adapter running the full multi-round plan each slot."""

    name = "insurance"

    def __init__(self, policy: InsurancePolicy | None = None) -> None:
        self.policy = policy or InsurancePolicy()

    def plan(self, snapshot: PlanningSnapshot) -> InsurancePlan:
        return insure(snapshot, self.policy)
