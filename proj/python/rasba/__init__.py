"""Collaborative batch-size search for federated learning (simulator).

Thin Python layer over the C++ core. Strategies are passed as labels:
``"rasba"``, ``"single_prober"`` or ``"fixed(<b>)"``.
"""

from ._core import (
    MONTE_CARLO_HEADER,
    SWEEP_HEADER,
    TRACE_HEADER,
    BoundsState,
    ClientProfile,
    ConfigError,
    ExperimentConfig,
    ExperimentTrace,
    FederationConfig,
    MonteCarloSummary,
    NonFiniteLoss,
    ProbeOutcome,
    SweepRow,
    TraceRow,
    apply_outcome,
    epoch_time,
    failed_attempt_time,
    init_bounds,
    load_config,
    make_profile,
    max_feasible_batch,
    memory_usage_mb,
    merge,
    monte_carlo_to_csv,
    parse_config,
    run_experiment,
    run_monte_carlo,
    run_search,
    run_sweep,
    sample_probe,
    sweep_to_csv,
    try_batch,
    validate_config,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
