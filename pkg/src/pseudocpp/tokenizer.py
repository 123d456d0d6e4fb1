"""Corpus-built tokenizer: punctuation-aware splitting, vocabularies with
reserved ids, encode/decode, and whitespace repair for generated code.

Tokenization is deterministic and total: split on whitespace, then carve each
chunk into identifier/number runs and operator tokens via longest match over a
fixed table. Newlines survive as an explicit ``<NL>`` token so whole-program
line structure round-trips through the model.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

PAD_ID, START_ID, END_ID, UNK_ID = 0, 1, 2, 3
SPECIAL_TOKENS: tuple[str, ...] = ("<PAD>", "<START>", "<END>", "<UNK>")
NEWLINE_TOKEN = "<NL>"

# Multi-character C++ operators, longest first so longest-match is a simple
# ordered scan.
OPERATOR_TOKENS: tuple[str, ...] = (
    "<<=", ">>=",
    "<<", ">>", "<=", ">=", "==", "!=", "&&", "||", "++", "--",
    "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "::", "->",
)


class EmptyCorpusError(ValueError):
    """No texts were provided to build a vocabulary from."""


class UnknownIdError(ValueError):
    """A token id lies outside the vocabulary."""


def _is_word_char(ch: str) -> bool:
    return ch.isalnum() or ch == "_"


def _tokenize_chunk(chunk: str, out: list[str]) -> None:
    i = 0
    n = len(chunk)
    while i < n:
        if _is_word_char(chunk[i]):
            j = i + 1
            while j < n and _is_word_char(chunk[j]):
                j += 1
            out.append(chunk[i:j])
            i = j
            continue
        for op in OPERATOR_TOKENS:
            if chunk.startswith(op, i):
                out.append(op)
                i += len(op)
                break
        else:
            out.append(chunk[i])
            i += 1


def tokenize(text: str) -> list[str]:
    """Split text into word/operator tokens; newlines become ``<NL>``."""
    tokens: list[str] = []
    for lineno, line in enumerate(text.split("\n")):
        if lineno:
            tokens.append(NEWLINE_TOKEN)
        for chunk in line.split():
            _tokenize_chunk(chunk, tokens)
    return tokens


class Vocabulary:
    """Bijective token<->id table with PAD/START/END/UNK at ids 0-3."""

    def __init__(self, tokens: Sequence[str]):
        tokens = tuple(tokens)
        if tokens[:4] != SPECIAL_TOKENS:
            raise ValueError("ids 0-3 must be the reserved special tokens")
        if len(set(tokens)) != len(tokens):
            raise ValueError("duplicate token in vocabulary")
        self.id_to_token: tuple[str, ...] = tokens
        self.token_to_id: dict[str, int] = {t: i for i, t in enumerate(tokens)}

    def __len__(self) -> int:
        return len(self.id_to_token)

    def __eq__(self, other) -> bool:
        return isinstance(other, Vocabulary) and self.id_to_token == other.id_to_token

    def id_for(self, token: str) -> int:
        return self.token_to_id.get(token, UNK_ID)

    def token_for(self, token_id: int) -> str:
        if not 0 <= token_id < len(self.id_to_token):
            raise UnknownIdError(f"id {token_id} outside vocabulary of size {len(self)}")
        return self.id_to_token[token_id]

    def to_json(self) -> dict:
        return {
            "specials": list(SPECIAL_TOKENS),
            "tokens": list(self.id_to_token[len(SPECIAL_TOKENS):]),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Vocabulary":
        return cls(tuple(obj["specials"]) + tuple(obj["tokens"]))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), ensure_ascii=False), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "Vocabulary":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass(frozen=True)
class TokenSequence:
    ids: tuple[int, ...]
    side: str = "source"

    def __len__(self) -> int:
        return len(self.ids)


def build_vocab(texts: Iterable[str], min_count: int = 1) -> Vocabulary:
    """Build a vocabulary from raw texts.

    Tokens seen fewer than ``min_count`` times are left out and map to UNK at
    encode time. Ordering is frequency-descending with the token string as a
    tie-break, which makes the result independent of input order.
    """
    if min_count < 1:
        raise ValueError("min_count must be >= 1")
    texts = list(texts)
    if not texts:
        raise EmptyCorpusError("cannot build a vocabulary from zero texts")
    counts: Counter[str] = Counter()
    for text in texts:
        counts.update(tokenize(text))
    kept = sorted(
        (t for t, c in counts.items() if c >= min_count and t not in SPECIAL_TOKENS),
        key=lambda t: (-counts[t], t),
    )
    return Vocabulary(SPECIAL_TOKENS + tuple(kept))


def encode(vocab: Vocabulary, text: str, side: str = "source") -> TokenSequence:
    ids = (START_ID,) + tuple(vocab.id_for(t) for t in tokenize(text)) + (END_ID,)
    return TokenSequence(ids=ids, side=side)


def decode(vocab: Vocabulary, ids: TokenSequence | Sequence[int]) -> str:
    """Render ids back to text: tokens space-joined, ``<NL>`` as a newline,
    reserved tokens dropped."""
    raw = ids.ids if isinstance(ids, TokenSequence) else ids
    lines: list[list[str]] = [[]]
    for token_id in raw:
        token = vocab.token_for(int(token_id))
        if token in SPECIAL_TOKENS:
            continue
        if token == NEWLINE_TOKEN:
            lines.append([])
        else:
            lines[-1].append(token)
    return "\n".join(" ".join(line) for line in lines)


_NO_SPACE_BEFORE = {";", ",", ")", "]", "++", "--"}
_NO_SPACE_AFTER = {"(", "["}


def _word_like(token: str) -> bool:
    return bool(token) and _is_word_char(token[-1])


def _glue(prev: str, cur: str) -> bool:
    if cur in _NO_SPACE_BEFORE or prev in _NO_SPACE_AFTER:
        pass
    elif prev == "::" or cur == "::":
        pass
    elif cur in ("()", "[") and _word_like(prev):
        pass
    else:
        return False
    # Joining must never merge tokens: re-lex the joined pair and require the
    # same split (guards cases like "-" followed by "--").
    joined: list[str] = []
    _tokenize_chunk(prev + cur, joined)
    separate: list[str] = []
    _tokenize_chunk(prev, separate)
    _tokenize_chunk(cur, separate)
    return joined == separate


def _render_include(toks: list[str]) -> str | None:
    """Collapse '# include < name >' to '#include <name>' when doing so
    preserves the token stream."""
    glued = "".join(toks[2:])
    flattened: list[str] = []
    _tokenize_chunk("#include" + glued, flattened)
    if flattened == toks:
        return "#include " + glued if glued else "#include"
    return None


def postprocess_code(spaced: str) -> str:
    """Repair the uniform spacing of decoded token text into readable C++.

    Applies a fixed rule table (no space before ``;``/``,``/``)``/``++``, none
    after ``(``, tight ``::``, empty argument lists collapse onto the callee,
    include directives re-join); token content is provably unchanged because
    every join is re-lex checked.
    """
    out_lines: list[str] = []
    for line in spaced.split("\n"):
        toks = line.split()
        if toks[:2] == ["#", "include"]:
            rendered = _render_include(toks)
            if rendered is not None:
                out_lines.append(rendered)
                continue
        merged: list[str] = []
        i = 0
        while i < len(toks):
            if toks[i] == "(" and i + 1 < len(toks) and toks[i + 1] == ")":
                merged.append("()")
                i += 2
            else:
                merged.append(toks[i])
                i += 1
        parts: list[str] = []
        for j, tok in enumerate(merged):
            if j and not _glue(merged[j - 1], tok):
                parts.append(" ")
            parts.append(tok)
        out_lines.append("".join(parts))
    return "\n".join(out_lines)
