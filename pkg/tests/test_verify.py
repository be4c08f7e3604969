"""Checks for the verification harness itself."""

import numpy as np
import pytest

from insuresim.baselines import GreedyScheduler
from insuresim.dist import EmpiricalDistribution
from insuresim.insurer import InsuranceScheduler
from insuresim.simengine import Scenario, simulate
from insuresim.verify import (
    CompetitiveBound,
    OptimalWitness,
    SearchOverflowError,
    TinyInstance,
    TinyJob,
    audit_constraints,
    brute_force_optimal,
    check_diminishing_returns,
    competitive_check,
    random_rate_sequence,
    random_tiny_instance,
    tiny_scenario,
)
from insuresim.workload import TopologySpec, WorkloadSpec, gen_topology, gen_workload

point = EmpiricalDistribution.point
from_pairs = EmpiricalDistribution.from_pairs


def test_diminishing_returns_frozen_examples():
    d = from_pairs({2.0: 0.5, 4.0: 0.5})
    report = check_diminishing_returns([d, d, d])
    assert report.rates == pytest.approx([3.0, 3.5, 3.75])
    assert report.shares == pytest.approx([3.0, 1.75, 1.25])
    assert report.ok

    deterministic = check_diminishing_returns([point(10.0)] * 3)
    assert deterministic.rates == pytest.approx([10.0, 10.0, 10.0])
    assert deterministic.shares == pytest.approx([10.0, 5.0, 10.0 / 3.0])
    assert deterministic.ok


def test_diminishing_returns_rejects_bad_order():
    with pytest.raises(ValueError, match="non-increasing"):
        check_diminishing_returns([point(5.0), point(10.0)])
    with pytest.raises(ValueError, match="at least one"):
        check_diminishing_returns([])


def test_diminishing_returns_detects_violations():
    # equal means, but a rare-spike third copy adds a burst of extra rate
    # that breaks the per-copy share ordering: the checker must report it.
    flat = point(1.0)
    spike = from_pairs({0.01: 0.99, 99.01: 0.01})
    report = check_diminishing_returns([flat, flat, spike])
    assert not report.ok
    assert report.shares[2] > report.shares[1]


def test_diminishing_returns_random_sequences():
    rng = np.random.default_rng(101)
    for _ in range(30):
        report = check_diminishing_returns(random_rate_sequence(rng))
        assert report.ok


def small_scenario(seed=0):
    topo = gen_topology(TopologySpec.desk(4), seed=seed)
    jobs = gen_workload(WorkloadSpec.desk(job_count=6, lam=0.2), topo, seed=seed + 1)
    return Scenario(topo, jobs)


def test_audit_clean_on_engine_traces():
    scenario = small_scenario()
    for scheduler in (InsuranceScheduler(), GreedyScheduler()):
        result = simulate(scenario, scheduler, seed=2)
        assert audit_constraints(result.trace, scenario) == []


def flat_scenario(slots=2, ingress=1000.0, egress=1000.0, n_tasks=3, preds=False):
    from insuresim.perfmodel import ClusterModel, LinkModel
    from insuresim.workload import Job, TaskSpec, Topology

    clusters = {
        "c1": ClusterModel("c1", slots, ingress, egress, 0.0, point(2.0)),
        "c2": ClusterModel("c2", slots, ingress, egress, 0.0, point(2.0)),
    }
    topo = Topology(clusters=clusters, links=LinkModel(point(20.0)),
                    classes={"c1": "small", "c2": "small"},
                    degrees={"c1": 1.0, "c2": 1.0})
    tasks = []
    for i in range(n_tasks):
        pred = (f"j1.t{i - 1}",) if preds and i > 0 else ()
        tasks.append(TaskSpec(f"j1.t{i}", "compute", 4.0, (), pred, i if preds else 0))
    return Scenario(topo, (Job("j1", 1.0, tuple(tasks)),))


def launch(t, task, copy, cluster, demands=()):
    return {"t": t, "kind": "launch", "task": task, "copy": copy,
            "cluster": cluster, "demands": [list(d) for d in demands]}


def complete(t, task, copy, cluster):
    return {"t": t, "kind": "complete", "task": task, "copy": copy,
            "cluster": cluster}


def test_audit_flags_slot_overflow():
    scenario = flat_scenario(slots=2)
    trace = [launch(1.0, f"j1.t{i}", i, "c1") for i in range(3)]
    violations = audit_constraints(trace, scenario)
    assert [v.constraint for v in violations] == ["slot-capacity"]
    assert violations[0].magnitude == 1


def test_audit_flags_early_start():
    scenario = flat_scenario()
    violations = audit_constraints([launch(0.0, "j1.t0", 0, "c1")], scenario)
    assert [v.constraint for v in violations] == ["start-before-arrival"]


def test_audit_flags_precedence_break():
    scenario = flat_scenario(preds=True, n_tasks=2)
    trace = [launch(1.0, "j1.t0", 0, "c1"),
             launch(2.0, "j1.t1", 1, "c1")]  # t0 never completed
    violations = audit_constraints(trace, scenario)
    assert [v.constraint for v in violations] == ["precedence"]
    ok_trace = [launch(1.0, "j1.t0", 0, "c1"),
                complete(3.0, "j1.t0", 0, "c1"),
                launch(3.0, "j1.t1", 1, "c1")]
    assert audit_constraints(ok_trace, scenario) == []


def test_audit_flags_gate_overflows():
    scenario = flat_scenario(ingress=30.0, egress=25.0)
    too_much_in = [launch(1.0, "j1.t0", 0, "c1", demands=(("c2", 31.0),))]
    kinds = [v.constraint for v in audit_constraints(too_much_in, scenario)]
    assert kinds == ["ingress-cap", "egress-cap"]
    split = [launch(1.0, "j1.t0", 0, "c1", demands=(("c2", 15.0),)),
             launch(1.0, "j1.t1", 1, "c1", demands=(("c2", 14.0),))]
    kinds = [v.constraint for v in audit_constraints(split, scenario)]
    assert kinds == ["egress-cap"]


def test_audit_flags_job_completion_mismatch():
    scenario = flat_scenario(n_tasks=1)
    trace = [launch(1.0, "j1.t0", 0, "c1"),
             complete(3.0, "j1.t0", 0, "c1"),
             {"t": 4.0, "kind": "job_done", "job": "j1", "flowtime": 3.0}]
    kinds = [v.constraint for v in audit_constraints(trace, scenario)]
    assert kinds == ["job-completion-max"]


def test_audit_rejects_malformed_traces():
    scenario = flat_scenario()
    with pytest.raises(ValueError, match="not running"):
        audit_constraints([complete(2.0, "j1.t0", 7, "c1")], scenario)
    twice = [launch(1.0, "j1.t0", 0, "c1"), complete(2.0, "j1.t0", 0, "c1"),
             launch(2.0, "j1.t0", 1, "c1"), complete(3.0, "j1.t0", 1, "c1")]
    with pytest.raises(ValueError, match="completed twice"):
        audit_constraints(twice, scenario)


def test_brute_force_shortest_first():
    instance = TinyInstance(rates=(1.0,), slots=(1,),
                            jobs=(TinyJob(0, (1,)), TinyJob(0, (2,))))
    witness = brute_force_optimal(instance)
    assert witness.value == pytest.approx(4.0)
    assert witness.max_copies == 1


def test_brute_force_single_task():
    instance = TinyInstance(rates=(2.0,), slots=(1,), jobs=(TinyJob(0, (10,)),))
    witness = brute_force_optimal(instance)
    assert witness.value == pytest.approx(5.0)
    assert witness.assignments == (("j0.t0", (0,), 0, 5.0),)


def test_brute_force_cloning_never_helps_when_deterministic():
    instance = TinyInstance(rates=(2.0, 2.0), slots=(1, 1), jobs=(TinyJob(0, (10,)),))
    witness = brute_force_optimal(instance)
    assert witness.value == pytest.approx(5.0)
    assert witness.max_copies == 1


def test_brute_force_chain():
    instance = TinyInstance(rates=(2.0,), slots=(1,),
                            jobs=(TinyJob(0, (2, 2), chain=True),))
    witness = brute_force_optimal(instance)
    assert witness.value == pytest.approx(2.0)


def test_brute_force_uses_deliberate_idling():
    # waiting for the short job about to arrive beats starting the long one
    instance = TinyInstance(rates=(1.0,), slots=(1,),
                            jobs=(TinyJob(0, (5,)), TinyJob(1, (1,))))
    witness = brute_force_optimal(instance)
    assert witness.value == pytest.approx(8.0)


def test_brute_force_invariances():
    base = TinyInstance(rates=(1.0, 2.0), slots=(1, 1),
                        jobs=(TinyJob(0, (2,)), TinyJob(1, (3,))))
    relabeled = TinyInstance(rates=(1.0, 2.0), slots=(1, 1),
                             jobs=(TinyJob(1, (3,)), TinyJob(0, (2,))))
    scaled = TinyInstance(rates=(3.0, 6.0), slots=(1, 1),
                          jobs=(TinyJob(0, (6,)), TinyJob(1, (9,))))
    w0 = brute_force_optimal(base)
    w1 = brute_force_optimal(relabeled)
    w2 = brute_force_optimal(scaled)
    assert w0.value == pytest.approx(w1.value)
    assert w0.value == pytest.approx(w2.value)
    assert sorted(s for _, _, s, _ in w0.assignments) == \
        sorted(s for _, _, s, _ in w1.assignments)
    assert (w0.max_copies, w1.max_copies, w2.max_copies) == (1, 1, 1)
    starts0 = {name: s for name, _, s, _ in w0.assignments}
    starts2 = {name: s for name, _, s, _ in w2.assignments}
    assert starts0 == starts2


def test_brute_force_overflow():
    instance = TinyInstance(rates=(1.0, 1.0, 1.0), slots=(2, 2, 2),
                            jobs=(TinyJob(0, (3, 3), chain=False),
                                  TinyJob(1, (2, 2), chain=False),
                                  TinyJob(2, (1, 1), chain=False)))
    with pytest.raises(SearchOverflowError):
        brute_force_optimal(instance, node_budget=10)


def test_competitive_bound_values():
    assert CompetitiveBound(0.5, 1.0, 1).value == pytest.approx(10.0)
    assert CompetitiveBound(0.8, 1.0, 1).value == pytest.approx(2.8 / 0.64)
    with pytest.raises(ValueError):
        CompetitiveBound(0.5, 1.0 / 1.5, 1)
    with pytest.raises(ValueError):
        CompetitiveBound(1.2, 1.0, 1)


def test_competitive_check_trivial_instance():
    instance = TinyInstance(rates=(2.0, 2.0), slots=(1, 1), jobs=(TinyJob(0, (4,)),))
    report = competitive_check([instance], epsilons=(0.5,))
    assert report.all_ok
    entry = report.entries[0]
    assert entry["alpha"] == pytest.approx(1.0)
    assert entry["bound"] == pytest.approx(10.0)
    assert entry["ratio"] <= 1.0


def test_competitive_check_random_batch():
    rng = np.random.default_rng(55)
    instances = [random_tiny_instance(rng) for _ in range(8)]
    report = competitive_check(instances)
    assert report.all_ok
    checked = [e for e in report.entries if "ok" in e]
    assert checked, "every instance was skipped"


def test_tiny_scenario_matches_oracle_semantics():
    instance = TinyInstance(rates=(2.0,), slots=(1,), jobs=(TinyJob(0, (10,)),))
    scenario = tiny_scenario(instance)
    result = simulate(scenario, GreedyScheduler(), seed=0)
    assert result.flowtimes["j0"] == pytest.approx(5.0)
    witness = brute_force_optimal(instance)
    assert witness.value == pytest.approx(sum(result.flowtimes.values()))
