"""Checkpoint container: model config, both vocabularies, and every weight
array in one .npz file with a version tag. Loading validates array shapes
against the stored config."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .model import ModelConfig, Parameters, validate_params
from .tokenizer import Vocabulary

CHECKPOINT_VERSION = 1
_PARAM_PREFIX = "param:"


@dataclass
class Checkpoint:
    params: Parameters
    config: ModelConfig
    src_vocab: Vocabulary
    tgt_vocab: Vocabulary
    checkpoint_id: str = ""


def save_checkpoint(
    path: str | Path,
    params: Parameters,
    config: ModelConfig,
    src_vocab: Vocabulary,
    tgt_vocab: Vocabulary,
    checkpoint_id: str = "",
) -> None:
    meta = {
        "version": CHECKPOINT_VERSION,
        "config": config.to_dict(),
        "src_vocab": src_vocab.to_json(),
        "tgt_vocab": tgt_vocab.to_json(),
        "checkpoint_id": checkpoint_id or Path(path).stem,
    }
    arrays = {_PARAM_PREFIX + name: value for name, value in params.items()}
    np.savez(path, meta=np.frombuffer(json.dumps(meta).encode("utf-8"), dtype=np.uint8), **arrays)


def load_checkpoint(path: str | Path) -> Checkpoint:
    with np.load(path) as bundle:
        meta = json.loads(bytes(bundle["meta"]).decode("utf-8"))
        if meta.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {meta.get('version')}")
        params = {
            key[len(_PARAM_PREFIX):]: bundle[key]
            for key in bundle.files
            if key.startswith(_PARAM_PREFIX)
        }
    config = ModelConfig.from_dict(meta["config"])
    validate_params(params, config)
    src_vocab = Vocabulary.from_json(meta["src_vocab"])
    tgt_vocab = Vocabulary.from_json(meta["tgt_vocab"])
    if len(src_vocab) != config.src_vocab or len(tgt_vocab) != config.tgt_vocab:
        raise ValueError("vocabulary sizes disagree with the stored config")
    return Checkpoint(
        params=params,
        config=config,
        src_vocab=src_vocab,
        tgt_vocab=tgt_vocab,
        checkpoint_id=meta.get("checkpoint_id", ""),
    )
