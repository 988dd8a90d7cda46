from nlmc.runner.config import ConfigError, ExperimentConfig
from nlmc.runner.experiments import (
    run_decay_study,
    run_static_experiment,
    run_sweep,
    run_transient_experiment,
)

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "run_decay_study",
    "run_static_experiment",
    "run_sweep",
    "run_transient_experiment",
]
