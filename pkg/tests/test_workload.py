"""Topology and workload generator tests."""

from __future__ import annotations

import numpy as np
import pytest

from insuresim.workload import (
    LARGE,
    MEDIUM,
    SMALL,
    TopologySpec,
    WorkloadSpec,
    discretized_normal,
    gen_topology,
    gen_workload,
)


def test_class_counts_match_fractions():
    topo = gen_topology(TopologySpec.full(100), seed=1)
    counts = {LARGE: 0, MEDIUM: 0, SMALL: 0}
    for k in topo.classes.values():
        counts[k] += 1
    assert counts == {LARGE: 5, MEDIUM: 20, SMALL: 75}


def test_classes_assigned_by_descending_degree():
    topo = gen_topology(TopologySpec.full(100), seed=2)
    smallest_large = min(topo.degrees[c] for c in topo.ids_of_class(LARGE))
    largest_small = max(topo.degrees[c] for c in topo.ids_of_class(SMALL))
    assert smallest_large >= largest_small


def test_large_class_parameter_ranges():
    topo = gen_topology(TopologySpec.full(100), seed=3)
    for cid in topo.ids_of_class(LARGE):
        c = topo.clusters[cid]
        assert 500 <= c.slots <= 1500
        assert 0.002 <= c.failure_prob <= 0.011
        # expectation of the truncated normal stays near the drawn mean
        assert 170.0 <= c.default_dist.expectation() <= 370.0


def test_gate_caps_scale_with_slots_and_member_bandwidth():
    spec = TopologySpec.full(100)
    topo = gen_topology(spec, seed=4)
    for cid, cm in topo.clusters.items():
        hi = 0.95 * cm.slots * 256.0
        lo = 0.55 * cm.slots * 64.0
        assert lo <= cm.ingress_cap <= hi
        assert cm.ingress_cap == cm.egress_cap


def test_degree_sequence_heavy_tail():
    spec = TopologySpec.full(100)
    shares = []
    for seed in range(25):
        topo = gen_topology(spec, seed)
        deg = sorted(topo.degrees.values(), reverse=True)
        shares.append(sum(deg[:5]) / sum(deg))
    shares = np.array(shares)
    assert shares.mean() >= 0.30
    assert (shares >= 0.30).mean() >= 0.8


def test_topology_determinism():
    spec = TopologySpec.desk(10)
    a = gen_topology(spec, seed=9)
    b = gen_topology(spec, seed=9)
    assert a.classes == b.classes
    for cid in a.clusters:
        ca, cb = a.clusters[cid], b.clusters[cid]
        assert ca.slots == cb.slots
        assert ca.ingress_cap == cb.ingress_cap
        assert ca.failure_prob == cb.failure_prob
        assert ca.default_dist.to_pairs() == cb.default_dist.to_pairs()
    pair = ("c01", "c02")
    assert a.links.get(*pair).to_pairs() == b.links.get(*pair).to_pairs()


def test_topology_rejects_tiny_cluster_count():
    with pytest.raises(ValueError):
        TopologySpec.desk(2)


def test_discretized_normal_shape():
    d = discretized_normal(100.0, 0.4, bins=16)
    assert len(d) == 16
    assert d.support[0] >= 5.0
    assert d.expectation() == pytest.approx(100.0, rel=0.12)


def test_job_mix_statistics():
    topo = gen_topology(TopologySpec.desk(10), seed=0)
    spec = WorkloadSpec.desk(1000, lam=0.1)
    jobs = gen_workload(spec, topo, seed=5)
    counts = [0, 0, 0]
    for job in jobs:
        n = job.task_count()
        if n <= 12:
            counts[0] += 1
        elif n <= 40:
            counts[1] += 1
        else:
            counts[2] += 1
    # within 3 sigma of the multinomial expectation
    for got, p in zip(counts, (0.89, 0.08, 0.03)):
        sigma = (1000 * p * (1 - p)) ** 0.5
        assert abs(got - 1000 * p) <= 3 * sigma


def test_poisson_interarrival_mean():
    topo = gen_topology(TopologySpec.desk(10), seed=0)
    spec = WorkloadSpec.desk(1000, lam=0.05)
    jobs = gen_workload(spec, topo, seed=6)
    arrivals = [j.arrival for j in jobs]
    gaps = np.diff([0.0] + arrivals)
    assert np.mean(gaps) == pytest.approx(20.0, rel=0.1)
    assert arrivals[0] > 0.0


def test_dag_layering_and_inputs():
    topo = gen_topology(TopologySpec.desk(10), seed=0)
    spec = WorkloadSpec.desk(50, lam=0.1)
    edge_ids = set(topo.ids_of_class(SMALL, MEDIUM))
    for job in gen_workload(spec, topo, seed=7):
        by_id = {t.task_id: t for t in job.tasks}
        stages = {}
        for t in job.tasks:
            stages.setdefault(t.stage, []).append(t)
            if t.stage == 0:
                assert t.preds == ()
                assert t.inputs
                assert {src for src, _ in t.inputs} <= edge_ids
            else:
                assert t.preds
                assert t.inputs == ()
                for p in t.preds:
                    assert by_id[p].stage == t.stage - 1
        assert min(stages) == 0
        assert all(stages[s] for s in stages)
        lo, hi = spec.datasize_range
        assert all(lo <= t.datasize <= hi for t in job.tasks)


def test_workload_determinism():
    topo = gen_topology(TopologySpec.desk(10), seed=0)
    spec = WorkloadSpec.desk(30, lam=0.2)
    a = gen_workload(spec, topo, seed=11)
    b = gen_workload(spec, topo, seed=11)
    assert a == b


def test_workload_validation():
    with pytest.raises(ValueError):
        WorkloadSpec.desk(10, lam=0.0)
    with pytest.raises(ValueError):
        WorkloadSpec(job_count=1, lam=0.1, mix=((0.5, (1, 2)),))
