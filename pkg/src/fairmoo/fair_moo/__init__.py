from .bundle import ObjectiveBundle, ObjectiveError
from .mpd import (
    FairWeights,
    IndefiniteGramError,
    OracleError,
    SolverConfig,
    check_psd,
    gram,
    mpd_weights_closed,
    mpd_weights_oracle,
    residual,
)
from .pareto import DelayDiagnostics, delay_diagnostics, min_norm_weights, pareto_stationarity
from .step import aggregate_direction, update_step
from .strategies import STRATEGIES, StrategyError, StrategyState, WeightStrategy, baseline_weights
