"""Training machinery: sparse cross-entropy with padding exclusion, analytic
gradients via the model's backward pass, Adam with an inverse-sqrt warmup
schedule, the teacher-forced epoch loop, random hyperparameter search, and a
finite-difference gradient checker.
"""

from __future__ import annotations

import math
import random
import time
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .model import (
    ModelConfig,
    Parameters,
    backward_from_cache,
    forward_with_cache,
    init_params,
    param_count,
)
from .tokenizer import PAD_ID


class AllPositionsMaskedError(ValueError):
    """Loss requested over a batch with no unmasked positions."""


class NonFiniteGradientError(RuntimeError):
    """A gradient array contains NaN or infinity."""


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 30
    batch_size: int = 16
    warmup_steps: int = 1000
    lr_scale: float = 1.0  # multiplies the d_model-keyed inverse-sqrt schedule
    seed: int = 0

    def __post_init__(self) -> None:
        if self.epochs < 1 or self.batch_size < 1 or self.warmup_steps < 1:
            raise ValueError("epochs, batch_size and warmup_steps must all be >= 1")

    def to_dict(self) -> dict:
        return {
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "warmup_steps": self.warmup_steps,
            "lr_scale": self.lr_scale,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class SearchSpace:
    num_layers: tuple[int, int] = (4, 6)
    d_model_choices: tuple[int, ...] = (128, 256)
    dropout: tuple[float, float] = (0.1, 0.2)
    iterations: int = 5

    def __post_init__(self) -> None:
        if self.num_layers[0] > self.num_layers[1] or not self.d_model_choices:
            raise ValueError("empty search space")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")


@dataclass
class TrainHistory:
    train_loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    epoch_seconds: list[float] = field(default_factory=list)
    best_epoch: int = -1

    def to_dict(self) -> dict:
        return {
            "train_loss": self.train_loss,
            "val_loss": self.val_loss,
            "epoch_seconds": self.epoch_seconds,
            "best_epoch": self.best_epoch,
        }


EncodedPair = tuple[tuple[int, ...], tuple[int, ...]]


@dataclass
class EncodedCorpus:
    """Token-id training data; each pair is (source ids, target ids) with
    START/END already attached."""

    train: list[EncodedPair]
    validation: list[EncodedPair]


# --- Loss ------------------------------------------------------------------


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def _nll_sum(logits: np.ndarray, targets: np.ndarray, valid: np.ndarray) -> tuple[float, int]:
    log_probs = _log_softmax(logits)
    b_idx, l_idx = np.indices(targets.shape)
    token_nll = -log_probs[b_idx, l_idx, targets]
    return float(token_nll[valid].sum()), int(valid.sum())


def sparse_ce_loss(logits: np.ndarray, targets: np.ndarray, pad_mask: np.ndarray) -> float:
    """Mean negative log-likelihood of integer target classes; positions where
    ``pad_mask`` is True are excluded from both the sum and the count."""
    logits = np.asarray(logits, dtype=np.float64)
    targets = np.asarray(targets)
    valid = ~np.asarray(pad_mask, dtype=bool)
    if not valid.any():
        raise AllPositionsMaskedError("no unmasked positions to average over")
    total, count = _nll_sum(logits, targets, valid)
    return total / count


def _loss_and_dlogits(logits, targets, valid) -> tuple[float, np.ndarray]:
    log_probs = _log_softmax(logits)
    b_idx, l_idx = np.indices(targets.shape)
    count = int(valid.sum())
    loss = float(-log_probs[b_idx, l_idx, targets][valid].sum()) / count
    dlogits = np.exp(log_probs)
    dlogits[b_idx, l_idx, targets] -= 1.0
    dlogits *= valid[:, :, None] / count
    return loss, dlogits


def grads(
    params: Parameters,
    config: ModelConfig,
    batch: tuple[np.ndarray, np.ndarray],
    dropout_rng: np.random.Generator | None = None,
) -> tuple[float, Parameters]:
    """Teacher-forced loss and its analytic gradient for one (src, tgt) batch.

    The decoder consumes tgt[:, :-1] and is scored against tgt[:, 1:]; PAD
    targets carry no loss and no gradient. Passing a generator enables dropout
    with a replayable mask stream.
    """
    src_ids, tgt_ids = (np.asarray(a) for a in batch)
    tgt_in = tgt_ids[:, :-1]
    tgt_out = tgt_ids[:, 1:]
    valid = tgt_out != PAD_ID
    if not valid.any():
        raise AllPositionsMaskedError("batch contains no target tokens")
    training = config.dropout_rate > 0.0 and dropout_rng is not None
    logits, cache = forward_with_cache(params, config, src_ids, tgt_in, training, dropout_rng)
    loss, dlogits = _loss_and_dlogits(logits, tgt_out, valid)
    return loss, backward_from_cache(params, cache, dlogits)


# --- Optimizer --------------------------------------------------------------


def lr_schedule(step: int, d_model: int, warmup: int) -> float:
    """Inverse-sqrt schedule: linear ramp over ``warmup`` steps, then decay;
    peak value d_model^-0.5 * warmup^-0.5 exactly at step == warmup."""
    if step < 1:
        raise ValueError("step must be >= 1")
    return d_model**-0.5 * min(step**-0.5, step * warmup**-1.5)


@dataclass(frozen=True)
class OptimizerHyper:
    d_model: int
    warmup_steps: int = 1000
    beta1: float = 0.9
    beta2: float = 0.98
    eps: float = 1e-9
    lr_scale: float = 1.0


@dataclass
class AdamMoments:
    m: Parameters
    v: Parameters

    @classmethod
    def zeros_like(cls, params: Parameters) -> "AdamMoments":
        return cls(
            m={k: np.zeros_like(p) for k, p in params.items()},
            v={k: np.zeros_like(p) for k, p in params.items()},
        )


def optimizer_step(
    params: Parameters,
    grad_set: Parameters,
    moments: AdamMoments,
    step: int,
    hyper: OptimizerHyper,
) -> tuple[Parameters, AdamMoments]:
    """One bias-corrected adaptive-moment update at the scheduled rate."""
    for name, g in grad_set.items():
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradientError(f"non-finite gradient in {name}")
    lr = hyper.lr_scale * lr_schedule(step, hyper.d_model, hyper.warmup_steps)
    b1, b2 = hyper.beta1, hyper.beta2
    new_params: Parameters = {}
    new_m: Parameters = {}
    new_v: Parameters = {}
    for name, p in params.items():
        g = grad_set[name]
        m = b1 * moments.m[name] + (1.0 - b1) * g
        v = b2 * moments.v[name] + (1.0 - b2) * g * g
        m_hat = m / (1.0 - b1**step)
        v_hat = v / (1.0 - b2**step)
        new_params[name] = p - lr * m_hat / (np.sqrt(v_hat) + hyper.eps)
        new_m[name] = m
        new_v[name] = v
    return new_params, AdamMoments(m=new_m, v=new_v)


# --- Epoch loop --------------------------------------------------------------


def _pad_batch(pairs: Sequence[EncodedPair]) -> tuple[np.ndarray, np.ndarray]:
    src_len = max(len(s) for s, _ in pairs)
    tgt_len = max(len(t) for _, t in pairs)
    src = np.full((len(pairs), src_len), PAD_ID, dtype=np.int64)
    tgt = np.full((len(pairs), tgt_len), PAD_ID, dtype=np.int64)
    for row, (s, t) in enumerate(pairs):
        src[row, : len(s)] = s
        tgt[row, : len(t)] = t
    return src, tgt


def dataset_loss(
    params: Parameters,
    config: ModelConfig,
    pairs: Sequence[EncodedPair],
    batch_size: int = 16,
) -> float:
    """Per-token mean NLL over a pair list, dropout off."""
    total = 0.0
    count = 0
    for lo in range(0, len(pairs), batch_size):
        src, tgt = _pad_batch(pairs[lo : lo + batch_size])
        tgt_in, tgt_out = tgt[:, :-1], tgt[:, 1:]
        valid = tgt_out != PAD_ID
        logits, _ = forward_with_cache(params, config, src, tgt_in, training=False)
        batch_total, batch_count = _nll_sum(logits, tgt_out, valid)
        total += batch_total
        count += batch_count
    if count == 0:
        raise AllPositionsMaskedError("dataset contains no target tokens")
    return total / count


def train(
    model_config: ModelConfig,
    train_config: TrainConfig,
    corpus: EncodedCorpus,
    log: Callable[[str], None] | None = None,
) -> tuple[Parameters, TrainHistory]:
    """Teacher-forced training; keeps the parameters of the best validation
    epoch. Fully determined by (seed, corpus, configs)."""
    if not corpus.train or not corpus.validation:
        raise ValueError("train and validation sets must both be non-empty")
    params = init_params(model_config)
    moments = AdamMoments.zeros_like(params)
    hyper = OptimizerHyper(
        d_model=model_config.d_model,
        warmup_steps=train_config.warmup_steps,
        lr_scale=train_config.lr_scale,
    )
    order_rng = random.Random(train_config.seed)
    history = TrainHistory()
    best_val = math.inf
    best_params = {k: p.copy() for k, p in params.items()}
    step = 0
    for epoch in range(train_config.epochs):
        started = time.perf_counter()
        order = list(range(len(corpus.train)))
        order_rng.shuffle(order)
        epoch_nll = 0.0
        epoch_tokens = 0
        for lo in range(0, len(order), train_config.batch_size):
            batch_pairs = [corpus.train[i] for i in order[lo : lo + train_config.batch_size]]
            batch = _pad_batch(batch_pairs)
            step += 1
            dropout_rng = None
            if model_config.dropout_rate > 0.0:
                dropout_rng = np.random.default_rng(
                    np.random.SeedSequence([train_config.seed, epoch, step])
                )
            loss, grad_set = grads(params, model_config, batch, dropout_rng)
            token_count = int((batch[1][:, 1:] != PAD_ID).sum())
            epoch_nll += loss * token_count
            epoch_tokens += token_count
            params, moments = optimizer_step(params, grad_set, moments, step, hyper)
        train_loss = epoch_nll / epoch_tokens
        val_loss = dataset_loss(params, model_config, corpus.validation, train_config.batch_size)
        history.train_loss.append(train_loss)
        history.val_loss.append(val_loss)
        history.epoch_seconds.append(time.perf_counter() - started)
        if val_loss < best_val:
            best_val = val_loss
            best_params = {k: p.copy() for k, p in params.items()}
            history.best_epoch = epoch
        if log is not None:
            log(
                f"epoch {epoch + 1}/{train_config.epochs} "
                f"train_loss={train_loss:.4f} val_loss={val_loss:.4f} "
                f"({history.epoch_seconds[-1]:.1f}s)"
            )
    return best_params, history


# --- Random search ------------------------------------------------------------


@dataclass
class SearchTrial:
    config: ModelConfig
    val_loss: float
    parameters: int
    order: int

    def to_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "val_loss": self.val_loss,
            "parameters": self.parameters,
            "order": self.order,
        }


def rank_trials(trials: list[SearchTrial]) -> list[SearchTrial]:
    """Ascending validation loss; ties prefer fewer parameters, then earlier
    sample order."""
    return sorted(trials, key=lambda t: (t.val_loss, t.parameters, t.order))


def random_search(
    space: SearchSpace,
    trial_epochs: int,
    corpus: EncodedCorpus,
    seed: int,
    model_template: ModelConfig,
    train_template: TrainConfig | None = None,
    log: Callable[[str], None] | None = None,
) -> list[SearchTrial]:
    """Uniformly sample ``space.iterations`` configurations, train each for
    ``trial_epochs`` epochs, and rank by best validation loss."""
    rng = random.Random(seed)
    train_template = train_template or TrainConfig()
    trials: list[SearchTrial] = []
    for order in range(space.iterations):
        num_layers = rng.randint(*space.num_layers)
        d_model = rng.choice(space.d_model_choices)
        dropout = rng.uniform(*space.dropout)
        config = replace(
            model_template,
            num_layers=num_layers,
            d_model=d_model,
            d_ff=4 * d_model,
            dropout_rate=dropout,
        )
        trial_train = replace(train_template, epochs=trial_epochs)
        _, history = train(config, trial_train, corpus)
        trial = SearchTrial(
            config=config,
            val_loss=min(history.val_loss),
            parameters=param_count(config),
            order=order,
        )
        trials.append(trial)
        if log is not None:
            log(
                f"trial {order + 1}/{space.iterations}: layers={num_layers} "
                f"d_model={d_model} dropout={dropout:.3f} val_loss={trial.val_loss:.4f}"
            )
    return rank_trials(trials)


# --- Gradient checking ---------------------------------------------------------


@dataclass
class GradCheckReport:
    per_array: dict[str, float]
    worst_name: str
    max_rel_error: float

    def passed(self, tolerance: float = 1e-4) -> bool:
        return self.max_rel_error < tolerance


def gradient_check(
    config: ModelConfig,
    batch: tuple[np.ndarray, np.ndarray],
    epsilon: float = 1e-4,
    dropout_seed: int | None = None,
) -> GradCheckReport:
    """Compare analytic gradients against central finite differences over
    every element of every parameter array.

    The relative error per array is ||g_a - g_fd||2 / max(||g_a||2 +
    ||g_fd||2, 1e-12). Dropout, when enabled, replays an identical mask stream
    for every evaluation so both sides see the same function.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")

    def make_rng() -> np.random.Generator | None:
        if dropout_seed is None:
            return None
        return np.random.default_rng(dropout_seed)

    src_ids, tgt_ids = (np.asarray(a) for a in batch)
    tgt_in, tgt_out = tgt_ids[:, :-1], tgt_ids[:, 1:]
    valid = tgt_out != PAD_ID

    params = init_params(config)
    _, analytic = grads(params, config, (src_ids, tgt_ids), make_rng())

    def loss_at(p: Parameters) -> float:
        training = config.dropout_rate > 0.0 and dropout_seed is not None
        logits, _ = forward_with_cache(p, config, src_ids, tgt_in, training, make_rng())
        loss, _ = _loss_and_dlogits(logits, tgt_out, valid)
        return loss

    per_array: dict[str, float] = {}
    for name, array in params.items():
        fd = np.zeros_like(array)
        flat = array.reshape(-1)
        fd_flat = fd.reshape(-1)
        for idx in range(flat.size):
            original = flat[idx]
            flat[idx] = original + epsilon
            upper = loss_at(params)
            flat[idx] = original - epsilon
            lower = loss_at(params)
            flat[idx] = original
            fd_flat[idx] = (upper - lower) / (2.0 * epsilon)
        ga = analytic[name]
        denom = max(float(np.linalg.norm(ga) + np.linalg.norm(fd)), 1e-12)
        per_array[name] = float(np.linalg.norm(ga - fd)) / denom
    worst = max(per_array, key=per_array.get)
    return GradCheckReport(per_array=per_array, worst_name=worst, max_rel_error=per_array[worst])
