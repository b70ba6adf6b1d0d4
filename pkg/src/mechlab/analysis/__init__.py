"""Classification, summary statistics, regressions and rank tests on simulated sessions."""
from .frames import (
    OutcomeClass,
    DataIntegrityError,
    beginner_frame,
    classify,
    expert_claim_histogram,
    group_frame,
    summary_rates,
    worker_frame,
)
from .ranktests import (
    InsufficientSessionsError,
    kruskal_wallis_exact,
    mann_whitney_exact,
    rank_tests,
    session_rates,
)
from .regression import (
    ClusterError,
    FitResult,
    RankDeficientError,
    RegressionSpec,
    fit_interval,
    fit_lpm,
    fit_models,
    results_table,
)
