"""Glue between the text corpus and the numeric trainer: vocabulary
construction from the training split, pair encoding, and the length filter
that drops pairs exceeding the model's position budget."""

from __future__ import annotations

from .dataset import Corpus, ProgramPair
from .model import ModelConfig, Parameters, greedy_decode
from .tokenizer import Vocabulary, build_vocab, decode, encode, postprocess_code
from .training import EncodedCorpus, EncodedPair


def build_vocabularies(
    pairs: list[ProgramPair], min_count: int = 1
) -> tuple[Vocabulary, Vocabulary]:
    """Source vocabulary from pseudocode, target vocabulary from code."""
    src = build_vocab([p.pseudocode for p in pairs], min_count)
    tgt = build_vocab([p.code for p in pairs], min_count)
    return src, tgt


def encode_pair(pair: ProgramPair, src_vocab: Vocabulary, tgt_vocab: Vocabulary) -> EncodedPair:
    return (
        encode(src_vocab, pair.pseudocode, side="source").ids,
        encode(tgt_vocab, pair.code, side="target").ids,
    )


def _encode_split(
    pairs: list[ProgramPair],
    src_vocab: Vocabulary,
    tgt_vocab: Vocabulary,
    max_positions: int,
    split_name: str,
    diagnostics: list[str] | None,
) -> list[EncodedPair]:
    encoded = []
    for pair in pairs:
        src_ids, tgt_ids = encode_pair(pair, src_vocab, tgt_vocab)
        if len(src_ids) > max_positions or len(tgt_ids) > max_positions:
            if diagnostics is not None:
                diagnostics.append(
                    f"{split_name}: {pair.id_str} exceeds {max_positions} positions; dropped"
                )
            continue
        encoded.append((src_ids, tgt_ids))
    return encoded


def encode_corpus(
    corpus: Corpus,
    src_vocab: Vocabulary,
    tgt_vocab: Vocabulary,
    max_positions: int = 2048,
    diagnostics: list[str] | None = None,
) -> EncodedCorpus:
    """Encode train/validation splits, dropping pairs whose encoded length
    exceeds the position budget (each drop is reported)."""
    return EncodedCorpus(
        train=_encode_split(
            corpus.train, src_vocab, tgt_vocab, max_positions, "train", diagnostics
        ),
        validation=_encode_split(
            corpus.validation, src_vocab, tgt_vocab, max_positions, "valid", diagnostics
        ),
    )


def generate_code(
    params: Parameters,
    config: ModelConfig,
    src_vocab: Vocabulary,
    tgt_vocab: Vocabulary,
    pseudocode: str,
    max_len: int = 512,
) -> str:
    """encode -> greedy decode -> detokenize -> whitespace repair."""
    source = encode(src_vocab, pseudocode)
    decoded = greedy_decode(params, config, source, max_len)
    return postprocess_code(decode(tgt_vocab, decoded))
