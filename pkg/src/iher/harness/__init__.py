from .config import TrainConfig, defaults_for, load_config
from .trainer import MetricsRow, Trainer, evaluate, steps_to_success, train

__all__ = ["TrainConfig", "defaults_for", "load_config", "MetricsRow", "Trainer", "evaluate",
           "steps_to_success", "train"]
