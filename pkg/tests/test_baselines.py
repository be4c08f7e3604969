"""Reference scheduler behaviour on hand-built planning snapshots."""

import pytest

from insuresim.baselines import (
    BaselinePolicy,
    CloningScheduler,
    GreedyScheduler,
    SpeculativeScheduler,
    cloning_plan,
    speculative_plan,
    stage_greedy_plan,
)
from insuresim.dist import EmpiricalDistribution
from insuresim.insurer import (
    ClusterState,
    CopyView,
    GateLedger,
    JobState,
    JobView,
    PlanEntry,
    PlanningSnapshot,
    TaskView,
    efficiency_round,
)
from insuresim.perfmodel import ClusterModel, LinkModel, PerformanceModel
from insuresim.simengine import Scenario, simulate
from insuresim.workload import Job, TaskSpec, Topology

point = EmpiricalDistribution.point


def make_snapshot(clusters, jobs, t=0.0, extra_live=0, caps=1000.0):
    """clusters maps id -> (rate, slots, free_slots)."""
    models = {}
    states = {}
    for cid, (rate, slots, free) in clusters.items():
        models[cid] = ClusterModel(cid, slots, caps, caps, 0.0, point(rate))
        states[cid] = ClusterState(cid, slots, free)
    model = PerformanceModel(models, LinkModel(point(20.0)))
    ledger = GateLedger({c: caps for c in clusters}, {c: caps for c in clusters})
    return PlanningSnapshot(
        t=t, total_slots=sum(s for _, s, _ in clusters.values()),
        clusters=states, model=model, ledger=ledger, jobs=jobs,
        extra_copies_live=extra_live)


def task(task_id, datasize=10.0, remaining=None, locs=("c1",), placement=(),
         topo=0, copies=(), launched=None, job_id="j1"):
    if remaining is None:
        remaining = datasize
    if launched is None:
        launched = len(placement)
    return TaskView(task_id=task_id, job_id=job_id, op_type="compute",
                    datasize=datasize, remaining=remaining, input_locs=locs,
                    placement=placement, topo_index=topo, copies=copies,
                    total_launched=launched)


def job_view(tasks, job_id="j1", arrival=0.0, total=None):
    unprocessed = sum(t.remaining for t in tasks)
    running = sum(len(t.placement) for t in tasks)
    state = JobState(job_id, arrival, unprocessed, running)
    return JobView(state=state, tasks=list(tasks), total_tasks=total or len(tasks))


def test_greedy_spreads_over_free_clusters():
    snap = make_snapshot({"c1": (10.0, 1, 1), "c2": (5.0, 1, 1)},
                         [job_view([task("j1.t1"), task("j1.t2", topo=1)])])
    plan = stage_greedy_plan(snap)
    assert plan.entries == [PlanEntry("j1.t1", "c1", 1), PlanEntry("j1.t2", "c2", 1)]


def test_greedy_longest_estimated_work_first():
    snap = make_snapshot({"c1": (10.0, 1, 1)},
                         [job_view([task("j1.small", datasize=10.0),
                                    task("j1.big", datasize=100.0)])])
    plan = stage_greedy_plan(snap)
    assert plan.entries == [PlanEntry("j1.big", "c1", 1)]


def test_greedy_never_adds_copies():
    snap = make_snapshot({"c1": (10.0, 2, 1), "c2": (5.0, 2, 2)},
                         [job_view([task("j1.t1", placement=("c1",),
                                         copies=(CopyView("c1", 0.0, 10.0, 5.0),))])])
    assert stage_greedy_plan(snap).entries == []


def test_greedy_fifo_over_jobs():
    early = job_view([task("j2.t1", job_id="j2")], job_id="j2", arrival=0.0)
    late = job_view([task("j1.t1", job_id="j1")], job_id="j1", arrival=1.0)
    snap = make_snapshot({"c1": (10.0, 1, 1)}, [late, early])
    plan = stage_greedy_plan(snap)
    assert plan.entries == [PlanEntry("j2.t1", "c1", 1)]


def test_speculation_triggers_on_slow_copy():
    running = task("j1.t1", remaining=10.0, placement=("c1",),
                   copies=(CopyView("c1", 0.0, observed_rate=1.0,
                                    observed_remaining=10.0),))
    snap = make_snapshot({"c1": (1.0, 2, 1), "c2": (4.0, 1, 1)},
                         [job_view([running])], t=2.0)
    plan = speculative_plan(snap)
    assert plan.entries == [PlanEntry("j1.t1", "c2", 1)]


def test_speculation_respects_threshold():
    running = task("j1.t1", remaining=10.0, placement=("c1",),
                   copies=(CopyView("c1", 0.0, observed_rate=1.0,
                                    observed_remaining=10.0),))
    snap = make_snapshot({"c1": (1.0, 2, 1), "c2": (1.5, 1, 1)},
                         [job_view([running])], t=2.0)
    assert speculative_plan(snap).entries == []


def test_speculation_waits_for_observation():
    fresh = task("j1.t1", remaining=10.0, placement=("c1",),
                 copies=(CopyView("c1", 0.0, None, None),))
    snap = make_snapshot({"c1": (1.0, 2, 1), "c2": (8.0, 1, 1)},
                         [job_view([fresh])], t=1.0)
    assert speculative_plan(snap).entries == []


def test_speculation_is_one_shot():
    relaunched = task("j1.t1", remaining=10.0, placement=("c1",),
                      copies=(CopyView("c1", 0.0, 1.0, 10.0),), launched=2)
    snap = make_snapshot({"c1": (1.0, 2, 1), "c2": (8.0, 1, 1)},
                         [job_view([relaunched])], t=2.0)
    assert speculative_plan(snap).entries == []


def test_cloning_uses_top_rate_clusters():
    snap = make_snapshot({"c1": (10.0, 10, 2), "c2": (8.0, 10, 2), "c3": (6.0, 10, 2)},
                         [job_view([task("j1.t1")])])
    plan = cloning_plan(snap)
    assert plan.entries == [PlanEntry("j1.t1", "c1", 1), PlanEntry("j1.t1", "c2", 1)]


def test_cloning_budget_and_size_limits():
    # budget already consumed by live extras: no clone
    snap = make_snapshot({"c1": (10.0, 10, 2), "c2": (8.0, 10, 2), "c3": (6.0, 10, 2)},
                         [job_view([task("j1.t1")])], extra_live=5)
    assert cloning_plan(snap).entries == [PlanEntry("j1.t1", "c1", 1)]
    # job above the small-job threshold never clones
    big = job_view([task("j1.t1")], total=40)
    snap = make_snapshot({"c1": (10.0, 10, 2), "c2": (8.0, 10, 2), "c3": (6.0, 10, 2)},
                         [big])
    assert cloning_plan(snap).entries == [PlanEntry("j1.t1", "c1", 1)]


def test_baselines_skip_rate_floor():
    clusters = {"c1": (100.0, 1, 0), "c2": (1.0, 1, 1)}
    snap = make_snapshot(clusters, [job_view([task("j1.t1")])])
    assert stage_greedy_plan(snap).entries == [PlanEntry("j1.t1", "c2", 1)]
    snap2 = make_snapshot(clusters, [job_view([task("j1.t1")])])
    assert efficiency_round(snap2, epsilon=0.5).entries == []


def test_policy_validation():
    with pytest.raises(ValueError):
        BaselinePolicy(speculation_factor=1.0)
    with pytest.raises(ValueError):
        BaselinePolicy(clone_factor=1)
    with pytest.raises(ValueError):
        BaselinePolicy(budget_fraction=1.5)


def test_schedulers_run_end_to_end():
    clusters = {
        cid: ClusterModel(cid, 3, 1000.0, 1000.0, fail, point(rate))
        for cid, rate, fail in [("c1", 4.0, 0.0), ("c2", 3.0, 0.05), ("c3", 2.0, 0.1)]
    }
    topo = Topology(clusters=clusters, links=LinkModel(point(20.0)),
                    classes={c: "small" for c in clusters},
                    degrees={c: 1.0 for c in clusters})
    jobs = []
    for j in range(3):
        t1 = TaskSpec(f"j{j}.t1", "compute", 12.0, (("c2", 12.0),), (), 0)
        t2 = TaskSpec(f"j{j}.t2", "compute", 8.0, (), (f"j{j}.t1",), 1)
        jobs.append(Job(f"j{j}", float(j), (t1, t2)))
    scenario = Scenario(topo, tuple(jobs))
    for scheduler in (GreedyScheduler(), SpeculativeScheduler(), CloningScheduler()):
        result = simulate(scenario, scheduler, seed=5)
        assert result.scheduler == scheduler.name
        assert len(result.flowtimes) == 3
