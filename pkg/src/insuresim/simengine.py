"""Discrete-event simulation of copy execution across clusters.

Jobs arrive over continuous time; a scheduler is consulted at every integer
slot boundary and returns copies to launch. Each copy samples its processing
speed and per-source bandwidths from the ground-truth distributions at
launch, runs at the bottleneck rate, and reports the unscaled draws back to
the performance model when it finishes. The first copy of a task to finish
completes the task and kills its siblings; a cluster failure kills every
copy in the cluster and takes its slots offline for the rest of the slot.
Tasks keep no checkpoint: when the last copy of a task dies the full
datasize must be redone.

Event ordering at equal times is fixed: arrivals, then cluster failures,
then copy completions, then the slot tick. Failure trials for a slot are
drawn one slot ahead so their events sort before that slot's completions.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from heapq import heappop, heappush

import numpy as np

from .insurer import (
    ClusterState,
    CopyView,
    GateLedger,
    InsurancePlan,
    JobState,
    JobView,
    PlanningSnapshot,
    TaskView,
)
from .perfmodel import DEFAULT_WINDOW, ExecutionRecord, PerformanceModel
from .workload import Job, TaskSpec, Topology

ARRIVAL = 0
FAILURE = 1
COMPLETE = 2
TICK = 3

KILLED_SIBLING = "killed_sibling"
KILLED_FAILURE = "killed_failure"

DROP_STATE = "state"
DROP_DOWN = "down"
DROP_SLOT = "slot"


class HorizonExceededError(RuntimeError):
    """Raised when the simulation reaches its horizon with jobs unfinished."""


@dataclass(frozen=True)
class EngineConfig:
    """Runtime knobs of the simulation."""

    horizon: float = 50000.0
    monitor_delay: float = 2.0
    speed_factor: float = 1.0
    downtime: float = 1.0
    window: float = DEFAULT_WINDOW
    record_slots: bool = True
    model_refresh: float = 0.0

    def __post_init__(self) -> None:
        if self.horizon <= 0:
            raise ValueError("horizon must be positive")
        if self.monitor_delay < 0:
            raise ValueError("monitor delay must be non-negative")
        if self.speed_factor <= 0:
            raise ValueError("speed factor must be positive")
        if self.downtime < 0:
            raise ValueError("downtime must be non-negative")
        if self.model_refresh < 0:
            raise ValueError("model refresh must be non-negative")


@dataclass(frozen=True)
class Scenario:
    """One simulation input: a topology plus the jobs that will arrive."""

    topology: Topology
    jobs: tuple[Job, ...]

    def __post_init__(self) -> None:
        seen_jobs = set()
        for job in self.jobs:
            if job.job_id in seen_jobs:
                raise ValueError(f"duplicate job id {job.job_id!r}")
            seen_jobs.add(job.job_id)
            if job.arrival < 0:
                raise ValueError(f"job {job.job_id!r} arrives before time zero")
            seen_tasks: set[str] = set()
            for spec in job.tasks:
                if spec.task_id in seen_tasks:
                    raise ValueError(f"duplicate task id {spec.task_id!r}")
                if spec.datasize <= 0:
                    raise ValueError(f"task {spec.task_id!r} has no data to process")
                for pred in spec.preds:
                    if pred not in seen_tasks:
                        raise ValueError(
                            f"task {spec.task_id!r} lists {pred!r} before it is defined")
                for src, size in spec.inputs:
                    if src not in self.topology.clusters:
                        raise ValueError(f"task {spec.task_id!r} reads unknown cluster {src!r}")
                    if size <= 0:
                        raise ValueError(f"task {spec.task_id!r} has an empty input")
                seen_tasks.add(spec.task_id)


class _Copy:
    """One running copy of a task."""

    __slots__ = ("copy_id", "task_id", "job_id", "cluster", "start", "work",
                 "proc_draw", "link_draws", "rate", "finish", "alive")

    def __init__(self, copy_id: int, task_id: str, job_id: str, cluster: str,
                 start: float, work: float, proc_draw: float,
                 link_draws: dict[str, float], rate: float) -> None:
        self.copy_id = copy_id
        self.task_id = task_id
        self.job_id = job_id
        self.cluster = cluster
        self.start = start
        self.work = work
        self.proc_draw = proc_draw
        self.link_draws = link_draws
        self.rate = rate
        self.finish = start + work / rate
        self.alive = True

    def remaining(self, t: float) -> float:
        return max(0.0, self.work - self.rate * (t - self.start))


class _TaskRun:
    """Mutable runtime state of one task."""

    __slots__ = ("spec", "job_id", "topo_index", "pending_preds", "input_locs",
                 "copies", "total_launched", "done", "completion", "output_cluster")

    def __init__(self, spec: TaskSpec, job_id: str, topo_index: int) -> None:
        self.spec = spec
        self.job_id = job_id
        self.topo_index = topo_index
        self.pending_preds = set(spec.preds)
        self.input_locs: list[str] = [src for src, _ in spec.inputs]
        self.copies: list[_Copy] = []
        self.total_launched = 0
        self.done = False
        self.completion: float | None = None
        self.output_cluster: str | None = None

    def ready(self) -> bool:
        return not self.done and not self.pending_preds

    def remaining(self, t: float) -> float:
        if self.done:
            return 0.0
        if not self.copies:
            return self.spec.datasize
        return min(c.remaining(t) for c in self.copies)


class _JobRun:
    __slots__ = ("spec", "tasks", "arrived", "done_tasks", "completion")

    def __init__(self, spec: Job, tasks: list[_TaskRun]) -> None:
        self.spec = spec
        self.tasks = tasks
        self.arrived = False
        self.done_tasks = 0
        self.completion: float | None = None

    def alive(self) -> bool:
        return self.arrived and self.completion is None


@dataclass
class SimResult:
    """Everything one run produced."""

    scheduler: str
    seed: int
    flowtimes: dict[str, float]
    completions: dict[str, float]
    makespan: float
    copies_launched: int
    copies_completed: int
    copies_killed: int
    plans_dropped: int
    trace: list[dict] = field(repr=False, default_factory=list)

    def mean_flowtime(self) -> float:
        if not self.flowtimes:
            return 0.0
        return sum(self.flowtimes.values()) / len(self.flowtimes)

    def flowtime_values(self) -> list[float]:
        """Flowtimes ordered by job id."""
        return [self.flowtimes[j] for j in sorted(self.flowtimes)]

    def to_jsonl(self) -> str:
        return "\n".join(json.dumps(e, sort_keys=True) for e in self.trace)


class Engine:
    """One simulation run bound to a scenario, a scheduler and a seed."""

    def __init__(self, scenario: Scenario, scheduler, seed: int = 0,
                 config: EngineConfig | None = None) -> None:
        self.scenario = scenario
        self.scheduler = scheduler
        self.seed = int(seed)
        self.config = config or EngineConfig()
        topo = scenario.topology
        self.model = PerformanceModel(topo.clusters, topo.links,
                                      window=self.config.window,
                                      refresh_interval=self.config.model_refresh)
        self.ledger = GateLedger(
            {c: m.ingress_cap for c, m in topo.clusters.items()},
            {c: m.egress_cap for c, m in topo.clusters.items()})
        self.cluster_ids = sorted(topo.clusters)
        self.total_slots = topo.total_slots()
        self.jobs: list[_JobRun] = []
        self.job_index: dict[str, _JobRun] = {}
        self.tasks: dict[str, _TaskRun] = {}
        self.successors: dict[str, list[_TaskRun]] = {}
        for job in scenario.jobs:
            runs = [_TaskRun(spec, job.job_id, i) for i, spec in enumerate(job.tasks)]
            self.jobs.append(_JobRun(job, runs))
            self.job_index[job.job_id] = self.jobs[-1]
            for run in runs:
                self.tasks[run.spec.task_id] = run
                for pred in run.spec.preds:
                    self.successors.setdefault(pred, []).append(run)
        ss = np.random.SeedSequence(self.seed)
        child_fail, child_rate = ss.spawn(2)
        self.rng_failures = np.random.default_rng(child_fail)
        self.rng_rates = np.random.default_rng(child_rate)
        self.heap: list[tuple] = []
        self._seq = 0
        self.live_copies: dict[int, _Copy] = {}
        self.live_on = {c: 0 for c in self.cluster_ids}
        self.down_until = {c: -math.inf for c in self.cluster_ids}
        self._next_copy_id = 0
        self.jobs_completed = 0
        self.trace: list[dict] = []
        self.copies_launched = 0
        self.copies_completed = 0
        self.copies_killed = 0
        self.plans_dropped = 0

    def _push(self, time: float, rank: int, kind: str, payload) -> None:
        heappush(self.heap, (time, rank, self._seq, kind, payload))
        self._seq += 1

    def _emit(self, record: dict) -> None:
        self.trace.append(record)

    def run(self) -> SimResult:
        if self.jobs:
            for idx, job in enumerate(self.jobs):
                self._push(job.spec.arrival, ARRIVAL, "arrival", idx)
            self._draw_failures(0.0)
            self._push(0.0, TICK, "tick", 0)
        while self.heap:
            time, _, _, kind, payload = heappop(self.heap)
            if kind == "arrival":
                self._on_arrival(time, payload)
            elif kind == "failure":
                self._on_failure(time, payload)
            elif kind == "complete":
                self._on_complete(time, payload)
            else:
                self._on_tick(time, payload)
            if self.jobs_completed == len(self.jobs):
                break
        return self._result()

    def _result(self) -> SimResult:
        flowtimes = {}
        completions = {}
        for job in self.jobs:
            if job.completion is not None:
                completions[job.spec.job_id] = job.completion
                flowtimes[job.spec.job_id] = job.completion - job.spec.arrival
        makespan = max(completions.values(), default=0.0)
        return SimResult(
            scheduler=getattr(self.scheduler, "name", "unknown"),
            seed=self.seed,
            flowtimes=flowtimes,
            completions=completions,
            makespan=makespan,
            copies_launched=self.copies_launched,
            copies_completed=self.copies_completed,
            copies_killed=self.copies_killed,
            plans_dropped=self.plans_dropped,
            trace=self.trace,
        )

    def _draw_failures(self, slot_time: float) -> None:
        """Bernoulli failure trials for the slot starting at slot_time."""
        draws = self.rng_failures.random(len(self.cluster_ids))
        for cid, u in zip(self.cluster_ids, draws):
            if u < self.scenario.topology.clusters[cid].failure_prob:
                self._push(slot_time, FAILURE, "failure", cid)

    def _on_arrival(self, t: float, idx: int) -> None:
        job = self.jobs[idx]
        job.arrived = True
        self._emit({"t": t, "kind": "arrival", "job": job.spec.job_id})

    def _on_failure(self, t: float, cluster: str) -> None:
        if self.down_until[cluster] > t:
            return
        self.down_until[cluster] = t + self.config.downtime
        self._emit({"t": t, "kind": "failure", "cluster": cluster,
                    "until": t + self.config.downtime})
        victims = sorted((c for c in self.live_copies.values() if c.cluster == cluster),
                         key=lambda c: c.copy_id)
        for copy in victims:
            self._kill(t, copy, KILLED_FAILURE)

    def _kill(self, t: float, copy: _Copy, cause: str) -> None:
        copy.alive = False
        del self.live_copies[copy.copy_id]
        self.live_on[copy.cluster] -= 1
        self.ledger.release(("copy", copy.copy_id))
        task = self.tasks[copy.task_id]
        task.copies = [c for c in task.copies if c.copy_id != copy.copy_id]
        self.copies_killed += 1
        self._emit({"t": t, "kind": "kill", "task": copy.task_id, "job": copy.job_id,
                    "copy": copy.copy_id, "cluster": copy.cluster, "cause": cause})

    def _on_complete(self, t: float, copy_id: int) -> None:
        copy = self.live_copies.get(copy_id)
        if copy is None or not copy.alive:
            return
        task = self.tasks[copy.task_id]
        copy.alive = False
        del self.live_copies[copy_id]
        self.live_on[copy.cluster] -= 1
        self.ledger.release(("copy", copy_id))
        task.copies = [c for c in task.copies if c.copy_id != copy_id]
        self.copies_completed += 1
        self.model.ingest(ExecutionRecord(copy.cluster, task.spec.op_type,
                                          speed=copy.proc_draw, transfer=None, time=t))
        for src in sorted(copy.link_draws):
            self.model.ingest(ExecutionRecord(
                copy.cluster, task.spec.op_type, speed=None,
                transfer=(src, copy.cluster, copy.link_draws[src]), time=t))
        task.done = True
        task.completion = t
        task.output_cluster = copy.cluster
        self._emit({"t": t, "kind": "complete", "task": task.spec.task_id,
                    "job": copy.job_id, "copy": copy_id, "cluster": copy.cluster})
        for sibling in sorted(task.copies, key=lambda c: c.copy_id):
            self._kill(t, sibling, KILLED_SIBLING)
        for succ in self.successors.get(task.spec.task_id, ()):
            succ.pending_preds.discard(task.spec.task_id)
            succ.input_locs.append(copy.cluster)
        job = self.job_index[copy.job_id]
        job.done_tasks += 1
        if job.done_tasks == len(job.tasks):
            job.completion = t
            self.jobs_completed += 1
            self._emit({"t": t, "kind": "job_done", "job": job.spec.job_id,
                        "flowtime": t - job.spec.arrival})

    def _on_tick(self, t: float, slot: int) -> None:
        if t > self.config.horizon:
            unfinished = len(self.jobs) - self.jobs_completed
            raise HorizonExceededError(
                f"{unfinished} jobs unfinished at horizon {self.config.horizon}")
        self.model.advance(t)
        alive = [j for j in self.jobs if j.alive()]
        planned = 0
        dropped = 0
        if alive:
            snapshot = self.build_snapshot(t)
            plan = self.scheduler.plan(snapshot)
            planned = plan.total_copies()
            dropped = self.apply_plan(t, plan)
        if self.config.record_slots and (alive or self.live_copies):
            gates_in, gates_out = self.ledger.usage()
            self._emit({
                "t": t, "kind": "slot",
                "occupancy": {c: self.live_on[c] for c in self.cluster_ids},
                "gates_in": {c: round(gates_in[c], 9) for c in self.cluster_ids},
                "gates_out": {c: round(gates_out[c], 9) for c in self.cluster_ids},
                "planned": planned, "dropped": dropped,
            })
        self._draw_failures(t + 1.0)
        self._push(t + 1.0, TICK, "tick", slot + 1)

    def build_snapshot(self, t: float) -> PlanningSnapshot:
        """Planning view of the current state; scratch copies are isolated."""
        clusters = {}
        for cid in self.cluster_ids:
            model = self.scenario.topology.clusters[cid]
            clusters[cid] = ClusterState(
                cluster_id=cid, slots=model.slots,
                free_slots=model.slots - self.live_on[cid],
                up=self.down_until[cid] <= t)
        views = []
        extra = 0
        for job in self.jobs:
            if not job.alive():
                continue
            unprocessed = 0.0
            running = 0
            task_views = []
            for task in job.tasks:
                if task.done:
                    continue
                unprocessed += task.remaining(t)
                running += len(task.copies)
                extra += max(0, len(task.copies) - 1)
                if not task.ready():
                    continue
                task_views.append(self._task_view(t, task))
            state = JobState(job_id=job.spec.job_id, arrival=job.spec.arrival,
                             unprocessed=unprocessed, running_copies=running)
            views.append(JobView(state=state, tasks=task_views,
                                 total_tasks=len(job.tasks)))
        return PlanningSnapshot(
            t=t, total_slots=self.total_slots, clusters=clusters,
            model=self.model, ledger=self.ledger.clone(), jobs=views,
            extra_copies_live=extra)

    def _task_view(self, t: float, task: _TaskRun) -> TaskView:
        copy_views = []
        for copy in task.copies:
            observable = t - copy.start >= self.config.monitor_delay
            copy_views.append(CopyView(
                cluster=copy.cluster, start=copy.start,
                observed_rate=copy.rate if observable else None,
                observed_remaining=copy.remaining(t) if observable else None))
        return TaskView(
            task_id=task.spec.task_id, job_id=task.job_id,
            op_type=task.spec.op_type, datasize=task.spec.datasize,
            remaining=task.remaining(t), input_locs=tuple(task.input_locs),
            placement=tuple(c.cluster for c in task.copies),
            topo_index=task.topo_index, copies=tuple(copy_views),
            total_launched=task.total_launched)

    def apply_plan(self, t: float, plan: InsurancePlan) -> int:
        """Launch the plan's copies, dropping entries that are infeasible now."""
        dropped = 0
        for entry in plan.entries:
            for _ in range(entry.copies):
                reason = self._launch_blocker(t, entry.task_id, entry.cluster)
                if reason is None:
                    self._launch(t, self.tasks[entry.task_id], entry.cluster)
                else:
                    dropped += 1
                    self.plans_dropped += 1
                    self._emit({"t": t, "kind": "drop", "task": entry.task_id,
                                "cluster": entry.cluster, "reason": reason})
        return dropped

    def _launch_blocker(self, t: float, task_id: str, cluster: str) -> str | None:
        task = self.tasks.get(task_id)
        if task is None or not task.ready() or task.remaining(t) <= 0:
            return DROP_STATE
        if cluster not in self.live_on:
            return DROP_STATE
        if self.down_until[cluster] > t:
            return DROP_DOWN
        if self.live_on[cluster] >= self.scenario.topology.clusters[cluster].slots:
            return DROP_SLOT
        demands = self.model.gate_demands(tuple(task.input_locs), cluster)
        return self.ledger.fits(cluster, demands)

    def _launch(self, t: float, task: _TaskRun, cluster: str) -> None:
        copy_id = self._next_copy_id
        self._next_copy_id += 1
        demands = self.model.gate_demands(tuple(task.input_locs), cluster)
        self.ledger.reserve(("copy", copy_id), cluster, demands)
        topo = self.scenario.topology
        spec = task.spec
        cluster_model = topo.clusters[cluster]
        proc_dist = cluster_model.op_dists.get(spec.op_type, cluster_model.default_dist)
        proc_draw = proc_dist.sample(self.rng_rates)
        link_draws: dict[str, float] = {}
        parts = []
        for src in sorted(set(task.input_locs)):
            if src == cluster:
                parts.append(self.model.local_read_bw)
            else:
                bw = topo.links.get(src, cluster).sample(self.rng_rates)
                link_draws[src] = bw
                parts.append(bw)
        raw = min(proc_draw, sum(parts) / len(parts)) if parts else proc_draw
        rate = raw * self.config.speed_factor
        work = task.remaining(t)
        copy = _Copy(copy_id, spec.task_id, task.job_id, cluster, t, work,
                     proc_draw, link_draws, rate)
        task.copies.append(copy)
        task.total_launched += 1
        self.live_copies[copy_id] = copy
        self.live_on[cluster] += 1
        self.copies_launched += 1
        self._push(copy.finish, COMPLETE, "complete", copy_id)
        self._emit({"t": t, "kind": "launch", "task": spec.task_id,
                    "job": task.job_id, "copy": copy_id, "cluster": cluster,
                    "work": work, "rate": rate,
                    "demands": [[src, amt] for src, amt in demands]})


def simulate(scenario: Scenario, scheduler, seed: int = 0,
             config: EngineConfig | None = None) -> SimResult:
    """Run one simulation to completion and return its result."""
    return Engine(scenario, scheduler, seed, config).run()
