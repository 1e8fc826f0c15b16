from .config import ConfigError, RunConfig, TrainConfig, load_run_config
from .loops import (TrainResult, evaluate_gcn, evaluate_kg, evaluate_transformer, load_model,
                    save_model, train_gcn, train_kg, train_transformer)
from .metrics import accuracy, f1_macro, harmonic_baseline_mrr, roc_auc
from .optim import Adam, NumericalAbort, RiemannianSGD, clip_global_norm, make_optimizer

__all__ = [
    "ConfigError", "RunConfig", "TrainConfig", "load_run_config", "TrainResult",
    "evaluate_gcn", "evaluate_kg", "evaluate_transformer", "load_model", "save_model",
    "train_gcn", "train_kg", "train_transformer", "accuracy", "f1_macro",
    "harmonic_baseline_mrr", "roc_auc", "Adam", "NumericalAbort", "RiemannianSGD",
    "clip_global_norm", "make_optimizer",
]
