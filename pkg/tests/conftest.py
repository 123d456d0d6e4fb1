from __future__ import annotations

from pathlib import Path

import pytest

from pseudocpp import dataset
from pseudocpp.checkpoint import save_checkpoint
from pseudocpp.model import ModelConfig
from pseudocpp.pipeline import build_vocabularies, encode_pair
from pseudocpp.training import EncodedCorpus, TrainConfig, train

FIXTURES = Path(__file__).parent / "fixtures"
GOLDEN = FIXTURES / "golden"


@pytest.fixture(scope="session")
def golden_programs() -> dict[str, str]:
    return {path.stem: path.read_text(encoding="utf-8") for path in sorted(GOLDEN.glob("*.cpp"))}


def load_fixture_pairs(name: str) -> list[dataset.ProgramPair]:
    with open(FIXTURES / name, encoding="utf-8") as fh:
        records = dataset.parse_spoc_tsv(fh)
    return dataset.aggregate_programs(records)


@pytest.fixture(scope="session")
def overfit_pairs() -> list[dataset.ProgramPair]:
    return load_fixture_pairs("overfit.tsv")


@pytest.fixture(scope="session")
def single_pair_setup(overfit_pairs):
    """A tiny model memorizing one program; shared by decode/service tests."""
    pair = overfit_pairs[0]
    src_vocab, tgt_vocab = build_vocabularies([pair])
    encoded = encode_pair(pair, src_vocab, tgt_vocab)
    corpus = EncodedCorpus(train=[encoded] * 4, validation=[encoded])
    config = ModelConfig(
        src_vocab=len(src_vocab), tgt_vocab=len(tgt_vocab), num_layers=1, d_model=32,
        num_heads=4, d_ff=128, dropout_rate=0.0, max_positions=128, seed=0,
    )
    train_config = TrainConfig(epochs=60, batch_size=4, warmup_steps=40, lr_scale=1.0, seed=0)
    params, history = train(config, train_config, corpus)
    return {
        "pair": pair,
        "params": params,
        "config": config,
        "src_vocab": src_vocab,
        "tgt_vocab": tgt_vocab,
        "encoded": encoded,
        "history": history,
    }


@pytest.fixture(scope="session")
def single_pair_checkpoint(single_pair_setup, tmp_path_factory) -> Path:
    path = tmp_path_factory.mktemp("ckpt") / "single.npz"
    save_checkpoint(
        path,
        single_pair_setup["params"],
        single_pair_setup["config"],
        single_pair_setup["src_vocab"],
        single_pair_setup["tgt_vocab"],
        checkpoint_id="single-pair-overfit",
    )
    return path
