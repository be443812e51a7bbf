from .compare import ComparisonTable, compare_strategies
from .config import OUT_ENV, AdapterConfig, RunConfig, ScheduleConfig, StrategyOptions, dump_config, load_config
from .training import (
    EVAL_HEADER,
    METRICS_HEADER,
    MetricsRecord,
    RunIOError,
    RunRecord,
    TrainingAborted,
    build_model,
    datasets,
    evaluate,
    evaluation_timesteps,
    run_training,
    schedule_of,
)
