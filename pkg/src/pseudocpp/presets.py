"""Named configuration presets.

``base`` mirrors the selected full-scale setup (4 layers, d_model 128,
dropout 0.1, 30 epochs, batch 16, 1000 warmup steps). ``small`` is the
desk-scale counterpart used by the regression suites: a two-layer model with a
short warmup so that a 50-program corpus is memorized within the standard
30-epoch budget.
"""

from __future__ import annotations

from .model import ModelConfig
from .training import TrainConfig


def base_model(src_vocab: int, tgt_vocab: int, seed: int = 0) -> ModelConfig:
    return ModelConfig(
        src_vocab=src_vocab,
        tgt_vocab=tgt_vocab,
        num_layers=4,
        d_model=128,
        num_heads=8,
        dropout_rate=0.1,
        max_positions=2048,
        seed=seed,
    )


def base_train(seed: int = 0) -> TrainConfig:
    return TrainConfig(epochs=30, batch_size=16, warmup_steps=1000, lr_scale=1.0, seed=seed)


def small_model(src_vocab: int, tgt_vocab: int, seed: int = 0) -> ModelConfig:
    return ModelConfig(
        src_vocab=src_vocab,
        tgt_vocab=tgt_vocab,
        num_layers=2,
        d_model=64,
        num_heads=4,
        d_ff=256,
        dropout_rate=0.0,
        max_positions=512,
        seed=seed,
    )


def small_train(seed: int = 0) -> TrainConfig:
    return TrainConfig(epochs=30, batch_size=16, warmup_steps=60, lr_scale=0.5, seed=seed)


MODEL_PRESETS = {"base": base_model, "small": small_model}
TRAIN_PRESETS = {"base": base_train, "small": small_train}
