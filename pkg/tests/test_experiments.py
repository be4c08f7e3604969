"""Experiment drivers: determinism, table shapes and the verification suite."""

import pytest

from insuresim.experiments import (
    ABLATION_VARIANTS,
    EPSILON_GRID,
    SCHEDULERS,
    ExperimentConfig,
    ablate,
    compare_schedulers,
    sweep_epsilon,
    verify_suite,
    write_comparison,
)


def tiny_config(**overrides):
    base = dict(clusters=4, jobs=5, lam=2.0, seeds=(0, 1))
    base.update(overrides)
    return ExperimentConfig(**base)


def test_config_roundtrip_through_dict():
    cfg = tiny_config(epsilon=0.4, reference="cloning")
    assert ExperimentConfig.from_dict(cfg.to_dict()) == cfg


def test_config_rejects_unknown_keys():
    with pytest.raises(ValueError, match="unknown config"):
        ExperimentConfig.from_dict({"cluster_count": 5})


@pytest.mark.parametrize("bad", [
    {"clusters": 2},
    {"jobs": 0},
    {"lam": 0.0},
    {"scheduler": "mystery"},
    {"reference": "mystery"},
    {"epsilon": 1.0},
    {"seeds": ()},
    {"model_refresh": -1.0},
    {"downtime": 0.0},
    {"workers": 0},
])
def test_config_validation_rejects(bad):
    with pytest.raises(ValueError):
        tiny_config(**bad)


def test_comparison_tables_are_deterministic(tmp_path):
    cfg = tiny_config()
    dirs = []
    for name in ("a", "b"):
        out = tmp_path / name
        write_comparison(str(out), compare_schedulers(cfg))
        dirs.append(out)
    for fname in ("metrics.csv", "cdf.csv", "reduction.csv"):
        first = (dirs[0] / fname).read_bytes()
        second = (dirs[1] / fname).read_bytes()
        assert first == second, f"{fname} differs between identical runs"


def test_worker_pool_matches_single_threaded(tmp_path):
    serial = compare_schedulers(tiny_config(workers=1), schedulers=("greedy",))
    pooled = compare_schedulers(tiny_config(workers=2), schedulers=("greedy",))
    assert serial.metrics == pooled.metrics
    assert serial.cdf == pooled.cdf


def test_metrics_cover_every_scheduler_and_seed():
    cfg = tiny_config()
    result = compare_schedulers(cfg)
    for name in SCHEDULERS:
        per_seed = [r for r in result.metrics
                    if r["scheduler"] == name and r["seed"] != "all"]
        assert [r["seed"] for r in per_seed] == [str(s) for s in cfg.seeds]
        pooled = {r["statistic"] for r in result.metrics
                  if r["scheduler"] == name and r["seed"] == "all"}
        assert pooled == {"mean_flowtime", "median_flowtime", "p95_flowtime",
                          "mean_makespan", "copies_launched"}


def test_cdf_is_monotone_and_reaches_one():
    result = compare_schedulers(tiny_config(), schedulers=("greedy", "insurance"))
    for name in ("greedy", "insurance"):
        rows = [r for r in result.cdf if r["scheduler"] == name]
        flows = [r["flowtime"] for r in rows]
        fracs = [r["fraction"] for r in rows]
        assert flows == sorted(flows)
        assert all(b >= a for a, b in zip(fracs, fracs[1:]))
        assert fracs[-1] == pytest.approx(1.0)


def test_reduction_pairs_jobs_of_reference_and_candidate():
    cfg = tiny_config(scheduler="insurance", reference="greedy")
    result = compare_schedulers(cfg, schedulers=("insurance", "greedy"))
    assert len(result.reduction) == cfg.jobs
    for row in result.reduction:
        expected = (row["reference"] - row["candidate"]) / row["reference"]
        assert row["reduction"] == pytest.approx(expected)


def test_sweep_reports_best_epsilon_per_lam():
    cfg = tiny_config()
    result = sweep_epsilon(cfg, epsilons=(0.4, 0.8), lams=(2.0,))
    rows = result.rows()
    assert len(rows) == 1
    row = rows[0]
    assert set(row) == {"lam", "eps_0.4", "eps_0.8", "best_epsilon"}
    best = row["best_epsilon"]
    assert row[f"eps_{best:g}"] == min(row["eps_0.4"], row["eps_0.8"])


def test_ablation_emits_all_six_variants():
    result = ablate(tiny_config())
    rows = result.rows()
    assert [r["variant"] for r in rows] == list(ABLATION_VARIANTS)
    # duplicate policies must share runs, not diverge
    means = {r["variant"]: r["mean_flowtime"] for r in rows}
    assert means["round-major"] == means["eff-reli"]


def test_verify_suite_reports_ok():
    report = verify_suite(sequences=5, instances=4, audit_seeds=(0,))
    assert report["ok"] is True
    assert report["diminishing"]["ok"] is True
    assert report["audit"]["violations"] == 0
    assert report["audit"]["traces"] == len(SCHEDULERS)
    assert report["competitive"]["ok"] is True


def test_epsilon_grid_lies_inside_open_interval():
    assert all(0.0 < e < 1.0 for e in EPSILON_GRID)
