"""Simulation and MAC-cost accounting engine for pooled neural screening."""

from .cost_model import (
    CacheState,
    CostProfile,
    DesignSpec,
    GroupCost,
    boundary_fractions,
    group_test_cost,
    individual_cost,
    load_cost_profile,
    save_cost_profile,
)
from .harness import (
    ExperimentConfig,
    RunMetrics,
    compute_metrics,
    expected_tests_two_round,
    run_experiment,
    run_trial,
    sweep_prevalence,
    validate_table,
)
from .oracle import (
    OracleProfile,
    TestOutcome,
    group_truth,
    load_profile,
    perfect_profile,
    respond,
    save_profile,
)
from .population import (
    GroupAssignment,
    Population,
    assign_groups,
    generate_population,
)
from .strategies import (
    RunResult,
    TestEvent,
    decode_double_pool,
    export_log,
    run_multi_round,
    run_one_round_double_pool,
    run_two_round,
)
from .streams import TestStream, spawn_seed

__version__ = "0.1.0"
