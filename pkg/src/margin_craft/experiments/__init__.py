from .facade import experiment_types, run_experiment

__all__ = [
    "experiment_types",
    "run_experiment",
]
