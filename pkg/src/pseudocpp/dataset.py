"""SPoC-style dataset handling: TSV parsing, whole-program aggregation, splits.

The raw data is line-aligned: each TSV row holds one pseudocode/code statement
pair plus the ids of the submission it belongs to. Training works on whole
programs, so rows are regrouped per submission, rendered with indentation, and
prefixed with a fixed header preamble so generated output is compilable as-is.
"""

from __future__ import annotations

import json
import random
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Iterable

DEFAULT_PREAMBLE: tuple[str, ...] = ("#include <iostream>", "using namespace std;")
REQUIRED_COLUMNS: tuple[str, ...] = (
    "text",
    "code",
    "workerid",
    "probid",
    "subid",
    "line",
    "indent",
)
INDENT_UNIT = "    "

SPLIT_FILES = {"train": "train.jsonl", "valid": "valid.jsonl", "test": "test.jsonl"}


class MissingColumnError(ValueError):
    """TSV header lacks one of the required columns."""


class InsufficientProblemsError(ValueError):
    """Too few distinct problems to build disjoint splits."""


@dataclass(frozen=True)
class SpocRecord:
    """One statement-level row: aligned pseudocode and code with its position."""

    text: str
    code: str
    workerid: str
    probid: str
    subid: str
    line: int
    indent: int


@dataclass(frozen=True)
class ProgramPair:
    """A whole program: multi-line pseudocode and its reference C++ source."""

    id: tuple[str, str, str]  # (probid, subid, workerid)
    pseudocode: str
    code: str

    @property
    def probid(self) -> str:
        return self.id[0]

    @property
    def id_str(self) -> str:
        return "/".join(self.id)


@dataclass
class Corpus:
    train: list[ProgramPair]
    validation: list[ProgramPair]
    test: list[ProgramPair]
    split_seed: int

    def splits(self) -> dict[str, list[ProgramPair]]:
        return {"train": self.train, "valid": self.validation, "test": self.test}


def parse_spoc_tsv(
    stream: IO[str] | Iterable[str], diagnostics: list[str] | None = None
) -> list[SpocRecord]:
    """Parse a tab-separated statement file into records.

    The header row fixes the column order. Rows with the wrong cell count or
    non-integer line/indent cells are skipped and reported through
    ``diagnostics``; a header missing a required column is fatal.
    """
    lines = iter(stream)
    try:
        header_line = next(lines)
    except StopIteration:
        raise MissingColumnError("empty input: no header row") from None
    header = header_line.rstrip("\n").split("\t")
    missing = [c for c in REQUIRED_COLUMNS if c not in header]
    if missing:
        raise MissingColumnError(f"header is missing column(s): {', '.join(missing)}")
    col = {name: header.index(name) for name in REQUIRED_COLUMNS}

    records: list[SpocRecord] = []
    for row_number, raw in enumerate(lines, start=2):
        line = raw.rstrip("\n")
        if line == "":
            continue
        cells = line.split("\t")
        if len(cells) != len(header):
            if diagnostics is not None:
                diagnostics.append(
                    f"row {row_number}: expected {len(header)} columns, got {len(cells)}; skipped"
                )
            continue
        try:
            line_idx = int(cells[col["line"]])
            indent = int(cells[col["indent"]])
        except ValueError:
            if diagnostics is not None:
                diagnostics.append(f"row {row_number}: non-integer line/indent; skipped")
            continue
        if line_idx < 0 or indent < 0:
            if diagnostics is not None:
                diagnostics.append(f"row {row_number}: negative line/indent; skipped")
            continue
        records.append(
            SpocRecord(
                text=cells[col["text"]],
                code=cells[col["code"]],
                workerid=cells[col["workerid"]],
                probid=cells[col["probid"]],
                subid=cells[col["subid"]],
                line=line_idx,
                indent=indent,
            )
        )
    return records


def _render_line(cell: str, indent: int) -> str:
    # Empty cells stay empty lines; no trailing whitespace is introduced.
    return INDENT_UNIT * indent + cell if cell else ""


def aggregate_programs(
    records: list[SpocRecord],
    preamble: tuple[str, ...] = DEFAULT_PREAMBLE,
    diagnostics: list[str] | None = None,
) -> list[ProgramPair]:
    """Regroup statement rows into whole-program pairs.

    Rows are grouped by (probid, subid, workerid) and ordered by line index.
    Code lines get the header preamble prepended; both sides are indented by
    four spaces per nesting level. A group with duplicated line indices is
    dropped with a diagnostic.
    """
    groups: dict[tuple[str, str, str], list[SpocRecord]] = {}
    for rec in records:
        groups.setdefault((rec.probid, rec.subid, rec.workerid), []).append(rec)

    pairs: list[ProgramPair] = []
    for key in sorted(groups):
        rows = sorted(groups[key], key=lambda r: r.line)
        indices = [r.line for r in rows]
        if len(set(indices)) != len(indices):
            if diagnostics is not None:
                diagnostics.append(
                    f"group {'/'.join(key)}: duplicate line index; group dropped"
                )
            continue
        code_lines = list(preamble) + [_render_line(r.code, r.indent) for r in rows]
        pseudo_lines = [_render_line(r.text, r.indent) for r in rows]
        pairs.append(
            ProgramPair(id=key, pseudocode="\n".join(pseudo_lines), code="\n".join(code_lines))
        )
    return pairs


def _split_counts(n: int, ratios: tuple[float, float, float]) -> list[int]:
    # Largest-remainder apportionment; every split with a positive ratio gets
    # at least one problem.
    raw = [r * n for r in ratios]
    counts = [int(x) for x in raw]
    order = sorted(range(3), key=lambda i: (-(raw[i] - counts[i]), i))
    for i in order[: n - sum(counts)]:
        counts[i] += 1
    for i in range(3):
        if ratios[i] > 0 and counts[i] == 0:
            donor = max(range(3), key=lambda k: counts[k])
            counts[donor] -= 1
            counts[i] += 1
    return counts


def split_corpus(
    pairs: list[ProgramPair], ratios: tuple[float, float, float], seed: int
) -> Corpus:
    """Partition pairs into problem-disjoint train/validation/test splits.

    Problems (not programs) are shuffled with a seeded PRNG and apportioned by
    ratio, so no problem ever leaks across splits.
    """
    if any(r < 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must be non-negative and sum to 1, got {ratios}")
    probids = sorted({p.probid for p in pairs})
    positive = sum(1 for r in ratios if r > 0)
    if len(probids) < max(3, positive):
        raise InsufficientProblemsError(
            f"need at least {max(3, positive)} distinct problems, got {len(probids)}"
        )
    rng = random.Random(seed)
    rng.shuffle(probids)
    counts = _split_counts(len(probids), tuple(ratios))
    train_ids = set(probids[: counts[0]])
    valid_ids = set(probids[counts[0] : counts[0] + counts[1]])
    test_ids = set(probids[counts[0] + counts[1] :])
    return Corpus(
        train=[p for p in pairs if p.probid in train_ids],
        validation=[p for p in pairs if p.probid in valid_ids],
        test=[p for p in pairs if p.probid in test_ids],
        split_seed=seed,
    )


def corpus_stats(pairs: list[ProgramPair]) -> dict:
    """Summarize a pair list: problem/program counts, per-problem histogram,
    and line-count percentiles for both sides."""
    per_problem = Counter(p.probid for p in pairs)
    histogram = Counter(per_problem.values())
    problems = len(per_problem)
    programs = len(pairs)

    def percentiles(values: list[int]) -> dict[str, int]:
        if not values:
            return {"p50": 0, "p90": 0, "p99": 0, "max": 0}
        ordered = sorted(values)
        pick = lambda q: ordered[min(len(ordered) - 1, int(q * (len(ordered) - 1) + 0.5))]
        return {"p50": pick(0.50), "p90": pick(0.90), "p99": pick(0.99), "max": ordered[-1]}

    return {
        "problems": problems,
        "programs": programs,
        "mean_programs_per_problem": programs / problems if problems else 0.0,
        "programs_per_problem": dict(sorted(histogram.items())),
        "code_lines": percentiles([p.code.count("\n") + 1 for p in pairs]),
        "pseudocode_lines": percentiles([p.pseudocode.count("\n") + 1 for p in pairs]),
    }


def write_corpus(corpus: Corpus, out_dir: str | Path) -> None:
    """Write train/valid/test .jsonl files, one {"id", "pseudocode", "code"}
    object per line, UTF-8 with LF newlines."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, pairs in corpus.splits().items():
        with open(out / SPLIT_FILES[name], "w", encoding="utf-8", newline="\n") as fh:
            for pair in pairs:
                fh.write(
                    json.dumps(
                        {"id": pair.id_str, "pseudocode": pair.pseudocode, "code": pair.code},
                        ensure_ascii=False,
                        sort_keys=True,
                    )
                )
                fh.write("\n")


def load_pairs_jsonl(path: str | Path) -> list[ProgramPair]:
    pairs = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            obj = json.loads(line)
            parts = tuple(obj["id"].split("/"))
            if len(parts) != 3:
                parts = (obj["id"], "", "")
            pairs.append(ProgramPair(id=parts, pseudocode=obj["pseudocode"], code=obj["code"]))
    return pairs

