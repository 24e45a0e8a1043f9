"""Point-set network, training loop and checkpoint format."""
from .model import EncoderConfig, LevelConfig, ModelConfig, MultiStreamModel
from .train import Sample, TrainConfig, evaluate, prepare_sample, train

__all__ = ["EncoderConfig", "LevelConfig", "ModelConfig", "MultiStreamModel",
           "Sample", "TrainConfig", "evaluate", "prepare_sample", "train"]
