"""Deterministic simulator of geo-distributed analytics with insured task copies.

The package models clusters joined by wide-area links, jobs arriving as
Poisson streams of task DAGs, and schedulers that place task copies under
slot, bandwidth and precedence constraints. The insurance scheduler grants
each queued job a promissory copy budget and spends it over efficiency,
reliability and saving rounds; baselines cover greedy single-copy
placement, speculative re-execution and eager cloning. Verification
instruments audit traces against the declared constraints and compare
scheduler output with brute-force optima on tiny instances.
"""

from .baselines import CloningScheduler, GreedyScheduler, SpeculativeScheduler
from .dist import (
    DEFAULT_BIN_CAP,
    EmpiricalDistribution,
    max_compose,
    mean_compose,
    min_compose,
    rebin,
)
from .experiments import (
    ABLATION_VARIANTS,
    BASELINES,
    EPSILON_GRID,
    LAM_GRID,
    SCHEDULERS,
    AblationResult,
    ComparisonResult,
    ExperimentConfig,
    SweepResult,
    ablate,
    build_scenario,
    compare_schedulers,
    make_scheduler,
    run_single,
    sweep_epsilon,
    verify_suite,
)
from .insurer import (
    EFFICIENCY,
    JOB_MAJOR,
    RELIABILITY,
    ROUND_MAJOR,
    InsurancePolicy,
    InsuranceScheduler,
)
from .perfmodel import (
    ClusterModel,
    ExecutionRecord,
    InfeasiblePlacementError,
    LinkModel,
    PerformanceModel,
    TaskQuery,
)
from .simengine import Engine, EngineConfig, Scenario, SimResult, simulate
from .verify import (
    CompetitiveBound,
    CompetitiveReport,
    DiminishingReport,
    OptimalWitness,
    TinyInstance,
    Violation,
    audit_constraints,
    brute_force_optimal,
    check_diminishing_returns,
    competitive_check,
    random_rate_sequence,
    random_tiny_instance,
    tiny_scenario,
)
from .workload import (
    Job,
    TaskSpec,
    Topology,
    TopologySpec,
    WorkloadSpec,
    discretized_normal,
    gen_topology,
    gen_workload,
)

__all__ = [
    "ABLATION_VARIANTS",
    "BASELINES",
    "DEFAULT_BIN_CAP",
    "EFFICIENCY",
    "EPSILON_GRID",
    "JOB_MAJOR",
    "LAM_GRID",
    "RELIABILITY",
    "ROUND_MAJOR",
    "SCHEDULERS",
    "AblationResult",
    "CloningScheduler",
    "ClusterModel",
    "CompetitiveBound",
    "CompetitiveReport",
    "ComparisonResult",
    "DiminishingReport",
    "EmpiricalDistribution",
    "Engine",
    "EngineConfig",
    "ExecutionRecord",
    "ExperimentConfig",
    "GreedyScheduler",
    "InfeasiblePlacementError",
    "InsurancePolicy",
    "InsuranceScheduler",
    "Job",
    "LinkModel",
    "OptimalWitness",
    "PerformanceModel",
    "Scenario",
    "SimResult",
    "SpeculativeScheduler",
    "SweepResult",
    "TaskQuery",
    "TaskSpec",
    "TinyInstance",
    "Topology",
    "TopologySpec",
    "Violation",
    "WorkloadSpec",
    "ablate",
    "audit_constraints",
    "brute_force_optimal",
    "build_scenario",
    "check_diminishing_returns",
    "compare_schedulers",
    "competitive_check",
    "discretized_normal",
    "gen_topology",
    "gen_workload",
    "make_scheduler",
    "max_compose",
    "mean_compose",
    "min_compose",
    "random_rate_sequence",
    "random_tiny_instance",
    "rebin",
    "run_single",
    "simulate",
    "sweep_epsilon",
    "tiny_scenario",
    "verify_suite",
]

__version__ = "0.1.0"
