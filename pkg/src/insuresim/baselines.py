"""Reference schedulers the insurance planner is compared against.

All three share the same per-slot planning surface as the insurance
scheduler but skip its promissory budgets and rate floor: any copy that
physically fits (slot plus gate headroom) may launch.

greedy       places one copy per waiting task, longest estimated work first,
             on the cluster finishing it soonest, and never adds copies.
speculative  is greedy plus a single restart copy for a running task whose
             observed finish estimate exceeds a fresh copy's by a factor.
cloning      launches every task of a small job in several clusters at once,
             under a global budget of extra copies, and degrades to greedy
             placement for everything else.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import floor

from .insurer import InsurancePlan, PlanBuilder, PlanningSnapshot, TaskView, _pick_best


@dataclass(frozen=True)
class BaselinePolicy:
    """Shared knobs of the reference schedulers."""

    speculation_factor: float = 2.0
    clone_factor: int = 2
    budget_fraction: float = 0.05
    small_job_threshold: int = 10

    def __post_init__(self) -> None:
        if self.speculation_factor <= 1.0:
            raise ValueError("speculation factor must exceed one")
        if self.clone_factor < 2:
            raise ValueError("clone factor must be at least two")
        if not 0.0 <= self.budget_fraction <= 1.0:
            raise ValueError("budget fraction must lie in [0, 1]")
        if self.small_job_threshold < 1:
            raise ValueError("small-job threshold must be positive")


def _fifo_jobs(snapshot: PlanningSnapshot):
    return sorted(snapshot.jobs, key=lambda jv: (jv.state.arrival, jv.state.job_id))


def _waiting_longest_first(builder: PlanBuilder, job) -> list[TaskView]:
    model = builder.snapshot.model
    waiting = [t for t in job.tasks if builder.copy_count(t) == 0]

    def best_est(task: TaskView) -> float:
        rate = model.global_optimal_rate(task)
        return task.remaining / rate if rate > 0 else float("inf")

    waiting.sort(key=lambda t: (-best_est(t), t.topo_index, t.task_id))
    return waiting


def _place_one(builder: PlanBuilder, job, task: TaskView) -> str | None:
    """One copy on the admissible cluster with the soonest estimated finish."""
    model = builder.snapshot.model
    candidates = builder.admissible_clusters(task, None)
    if not candidates:
        return None
    cluster_id, _ = _pick_best(builder, task, candidates,
                               lambda c: model.expected_rate(task, c))
    if cluster_id is None:
        return None
    builder.assign(job.state, task, cluster_id)
    return cluster_id


def stage_greedy_plan(snapshot: PlanningSnapshot) -> InsurancePlan:
    """One copy per waiting task, longest estimated work first, no clones."""
    builder = PlanBuilder(snapshot)
    for job in _fifo_jobs(snapshot):
        for task in _waiting_longest_first(builder, job):
            _place_one(builder, job, task)
    return builder.plan


def speculative_plan(snapshot: PlanningSnapshot,
                     policy: BaselinePolicy | None = None) -> InsurancePlan:
    """Greedy placement plus restart copies for observably slow tasks.

    A running task qualifies when its only copy has been observable for the
    monitoring delay and a fresh copy is expected to finish more than
    `speculation_factor` times sooner.
    """
    policy = policy or BaselinePolicy()
    builder = PlanBuilder(snapshot)
    jobs = _fifo_jobs(snapshot)
    for job in jobs:
        for task in _waiting_longest_first(builder, job):
            _place_one(builder, job, task)
    model = snapshot.model
    laggards = []
    for job in jobs:
        for task in job.tasks:
            if builder.copy_count(task) != 1 or task.total_launched != 1:
                continue
            copy = task.copies[0] if task.copies else None
            if copy is None or copy.observed_rate is None:
                continue
            t_rem = copy.observed_remaining / copy.observed_rate
            laggards.append((-t_rem, task.task_id, task, job, t_rem))
    laggards.sort(key=lambda item: (item[0], item[1]))
    for _, _, task, job, t_rem in laggards:
        candidates = builder.admissible_clusters(task, None)
        if not candidates:
            continue
        cluster_id, rate = _pick_best(builder, task, candidates,
                                      lambda c: model.expected_rate(task, c))
        if cluster_id is None or rate <= 0:
            continue
        t_new = task.copies[0].observed_remaining / rate
        if policy.speculation_factor * t_new < t_rem:
            builder.assign(job.state, task, cluster_id)
    return builder.plan


def cloning_plan(snapshot: PlanningSnapshot,
                 policy: BaselinePolicy | None = None) -> InsurancePlan:
    """Proactive clones for small jobs under a global extra-copy budget."""
    policy = policy or BaselinePolicy()
    builder = PlanBuilder(snapshot)
    model = snapshot.model
    budget = floor(policy.budget_fraction * snapshot.total_slots)
    extras_left = max(0, budget - snapshot.extra_copies_live)
    for job in _fifo_jobs(snapshot):
        small = job.total_tasks <= policy.small_job_threshold
        for task in _waiting_longest_first(builder, job):
            placed = _place_one(builder, job, task)
            if placed is None or not small:
                continue
            while builder.copy_count(task) < policy.clone_factor and extras_left > 0:
                used = set(builder.placement(task))
                candidates = [c for c in builder.admissible_clusters(task, None)
                              if c not in used]
                if not candidates:
                    break
                cluster_id, _ = _pick_best(builder, task, candidates,
                                           lambda c: model.expected_rate(task, c))
                if cluster_id is None:
                    break
                builder.assign(job.state, task, cluster_id)
                extras_left -= 1
    return builder.plan


class GreedyScheduler:
    """Engine adapter for the no-copy greedy baseline."""

    name = "greedy"

    def plan(self, snapshot: PlanningSnapshot) -> InsurancePlan:
        return stage_greedy_plan(snapshot)


class SpeculativeScheduler:
    """Engine adapter for the restart-on-slow baseline."""

    name = "speculative"

    def __init__(self, policy: BaselinePolicy | None = None) -> None:
        self.policy = policy or BaselinePolicy()

    def plan(self, snapshot: PlanningSnapshot) -> InsurancePlan:
        return speculative_plan(snapshot, self.policy)


class CloningScheduler:
    """Engine adapter for the proactive-clone baseline."""

    name = "cloning"

    def __init__(self, policy: BaselinePolicy | None = None) -> None:
        self.policy = policy or BaselinePolicy()

    def plan(self, snapshot: PlanningSnapshot) -> InsurancePlan:
        return cloning_plan(snapshot, self.policy)
