"""Command-line entry point: preprocess, build-vocab, train, search, generate,
evaluate, serve, stats.

Every command merges an optional JSON config file with its flags (flags win),
echoes the effective settings to ``run-config.json`` in the output directory,
and uses exit codes 0 (ok), 2 (input error), 3 (self-check failure), and 4
(runtime error).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import dataset, presets
from .checkpoint import load_checkpoint, save_checkpoint
from .metrics import LengthMismatchError, MetricWeights, corpus_evaluate
from .model import ModelConfig
from .pipeline import build_vocabularies, encode_corpus, generate_code
from .tokenizer import Vocabulary
from .training import (
    EncodedCorpus,
    SearchSpace,
    TrainConfig,
    gradient_check,
    random_search,
    train,
)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_SELF_CHECK = 3
EXIT_RUNTIME = 4


class InputError(Exception):
    """User-facing input problem; maps to exit code 2."""


class SelfCheckError(Exception):
    """Gradient self-check failed; maps to exit code 3."""


# --- config plumbing --------------------------------------------------------


def _load_config_file(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError as err:
        raise InputError(f"config file not found: {path}") from err
    except json.JSONDecodeError as err:
        raise InputError(f"config file is not valid JSON: {err}") from err


def _effective(args: argparse.Namespace, keys: list[str]) -> dict:
    """Config-file values overridden by any flag the user actually set."""
    merged = _load_config_file(getattr(args, "config", None))
    for key in keys:
        value = getattr(args, key, None)
        if value is not None:
            merged[key] = value
    return merged


def _write_run_config(out_dir: Path, command: str, effective: dict) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    payload = {"command": command, "options": effective}
    (out_dir / "run-config.json").write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def _model_config(effective: dict, src_vocab: int, tgt_vocab: int) -> ModelConfig:
    preset = effective.get("preset", "base")
    if preset not in presets.MODEL_PRESETS:
        raise InputError(f"unknown preset '{preset}' (choose from {sorted(presets.MODEL_PRESETS)})")
    config = presets.MODEL_PRESETS[preset](src_vocab, tgt_vocab, seed=effective.get("seed", 0))
    overrides = {}
    for key in ("num_layers", "d_model", "num_heads", "d_ff", "dropout_rate", "max_positions"):
        if key in effective:
            overrides[key] = effective[key]
    if "d_model" in overrides and "d_ff" not in overrides:
        overrides["d_ff"] = 4 * overrides["d_model"]
    if overrides:
        base = config.to_dict()
        base.update(overrides)
        config = ModelConfig.from_dict(base)
    return config


def _train_config(effective: dict) -> TrainConfig:
    preset = effective.get("preset", "base")
    config = presets.TRAIN_PRESETS[preset](seed=effective.get("seed", 0))
    base = config.to_dict()
    for key in ("epochs", "batch_size", "warmup_steps", "lr_scale"):
        if key in effective:
            base[key] = effective[key]
    return TrainConfig(**base)


def _load_split(data_dir: Path, name: str) -> list[dataset.ProgramPair]:
    path = data_dir / dataset.SPLIT_FILES[name]
    if not path.exists():
        raise InputError(f"missing {path}")
    return dataset.load_pairs_jsonl(path)


# --- commands ----------------------------------------------------------------


def cmd_preprocess(args: argparse.Namespace) -> int:
    effective = _effective(args, ["input", "out", "split", "seed", "preamble"])
    out_dir = Path(effective["out"])
    ratios = effective.get("split", [0.8, 0.1, 0.1])
    if isinstance(ratios, str):
        ratios = [float(x) for x in ratios.split(",")]
    if len(ratios) != 3:
        raise InputError("--split needs exactly three comma-separated fractions")
    seed = effective.get("seed", 0)
    preamble = tuple(effective.get("preamble", dataset.DEFAULT_PREAMBLE))

    input_path = Path(effective["input"])
    if not input_path.exists():
        raise InputError(f"input not found: {input_path}")
    diagnostics: list[str] = []
    try:
        with open(input_path, encoding="utf-8") as fh:
            records = dataset.parse_spoc_tsv(fh, diagnostics)
        pairs = dataset.aggregate_programs(records, preamble, diagnostics)
        corpus = dataset.split_corpus(pairs, tuple(ratios), seed)
    except (dataset.MissingColumnError, dataset.InsufficientProblemsError, ValueError) as err:
        raise InputError(str(err)) from err

    dataset.write_corpus(corpus, out_dir)
    stats = dataset.corpus_stats(pairs)
    stats["diagnostics"] = diagnostics
    stats["split_sizes"] = {name: len(split) for name, split in corpus.splits().items()}
    (out_dir / "stats.json").write_text(
        json.dumps(_jsonable(stats), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    _write_run_config(out_dir, "preprocess", effective)
    for message in diagnostics:
        print(f"note: {message}", file=sys.stderr)
    print(
        f"{stats['programs']} programs over {stats['problems']} problems -> "
        f"{stats['split_sizes']}"
    )
    return EXIT_OK


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def cmd_build_vocab(args: argparse.Namespace) -> int:
    effective = _effective(args, ["data", "out", "min_count"])
    data_dir = Path(effective["data"])
    out_dir = Path(effective.get("out", data_dir))
    min_count = effective.get("min_count", 1)
    train_pairs = _load_split(data_dir, "train")
    if not train_pairs:
        raise InputError("train split is empty")
    src_vocab, tgt_vocab = build_vocabularies(train_pairs, min_count)
    out_dir.mkdir(parents=True, exist_ok=True)
    src_vocab.save(out_dir / "src_vocab.json")
    tgt_vocab.save(out_dir / "tgt_vocab.json")
    _write_run_config(out_dir, "build-vocab", effective)
    print(f"source vocabulary: {len(src_vocab)} tokens; target: {len(tgt_vocab)} tokens")
    return EXIT_OK


def _self_check() -> None:
    config = ModelConfig(
        src_vocab=20, tgt_vocab=20, num_layers=1, d_model=8, num_heads=2,
        d_ff=32, dropout_rate=0.0, max_positions=16, seed=7,
    )
    src = np.array([[1, 5, 6, 2, 0], [1, 7, 8, 9, 2]])
    tgt = np.array([[1, 10, 11, 2, 0], [1, 12, 2, 0, 0]])
    report = gradient_check(config, (src, tgt), epsilon=1e-4)
    if not report.passed(1e-4):
        raise SelfCheckError(
            f"gradient check failed: {report.worst_name} rel err {report.max_rel_error:.3e}"
        )
    print(f"self-check ok: max rel err {report.max_rel_error:.3e} ({report.worst_name})")


_TRAIN_KEYS = [
    "data", "out", "preset", "seed", "min_count",
    "epochs", "batch_size", "warmup_steps", "lr_scale",
    "num_layers", "d_model", "num_heads", "d_ff", "dropout_rate", "max_positions",
]


def _prepare_training(effective: dict) -> tuple[ModelConfig, TrainConfig, EncodedCorpus, Vocabulary, Vocabulary]:
    data_dir = Path(effective["data"])
    train_pairs = _load_split(data_dir, "train")
    valid_pairs = _load_split(data_dir, "valid")
    if not train_pairs:
        raise InputError("train split is empty")
    if not valid_pairs:
        valid_pairs = train_pairs  # tiny corpora: validate on train rather than fail
    src_vocab, tgt_vocab = build_vocabularies(train_pairs, effective.get("min_count", 1))
    model_config = _model_config(effective, len(src_vocab), len(tgt_vocab))
    train_config = _train_config(effective)
    diagnostics: list[str] = []
    corpus = dataset.Corpus(train=train_pairs, validation=valid_pairs, test=[], split_seed=0)
    encoded = encode_corpus(corpus, src_vocab, tgt_vocab, model_config.max_positions, diagnostics)
    for message in diagnostics:
        print(f"note: {message}", file=sys.stderr)
    if not encoded.train:
        raise InputError("no training pairs fit within max positions")
    return model_config, train_config, encoded, src_vocab, tgt_vocab


def cmd_train(args: argparse.Namespace) -> int:
    effective = _effective(args, _TRAIN_KEYS + ["self_check"])
    out_dir = Path(effective["out"])
    out_dir.mkdir(parents=True, exist_ok=True)
    if effective.get("self_check"):
        _self_check()
    model_config, train_config, encoded, src_vocab, tgt_vocab = _prepare_training(effective)

    log_path = out_dir / "train.log"
    with open(log_path, "w", encoding="utf-8") as log_file:

        def log(message: str) -> None:
            print(message)
            log_file.write(message + "\n")

        log(
            f"training: {len(encoded.train)} pairs, validating on {len(encoded.validation)}; "
            f"layers={model_config.num_layers} d_model={model_config.d_model} "
            f"dropout={model_config.dropout_rate}"
        )
        params, history = train(model_config, train_config, encoded, log)

    save_checkpoint(out_dir / "checkpoint.npz", params, model_config, src_vocab, tgt_vocab)
    (out_dir / "history.json").write_text(
        json.dumps(history.to_dict(), indent=2) + "\n", encoding="utf-8"
    )
    _write_run_config(out_dir, "train", effective)
    print(f"checkpoint written to {out_dir / 'checkpoint.npz'}")
    return EXIT_OK


def cmd_search(args: argparse.Namespace) -> int:
    effective = _effective(
        args,
        _TRAIN_KEYS + ["iterations", "trial_epochs", "layers_range", "d_model_choices", "dropout_range"],
    )
    out_dir = Path(effective["out"])
    model_config, train_config, encoded, _, _ = _prepare_training(effective)

    def _pair(key: str, default: tuple, cast) -> tuple:
        raw = effective.get(key)
        if raw is None:
            return default
        if isinstance(raw, str):
            raw = raw.split(",")
        return tuple(cast(x) for x in raw)

    space = SearchSpace(
        num_layers=_pair("layers_range", (4, 6), int),
        d_model_choices=_pair("d_model_choices", (128, 256), int),
        dropout=_pair("dropout_range", (0.1, 0.2), float),
        iterations=effective.get("iterations", 5),
    )
    trials = random_search(
        space,
        effective.get("trial_epochs", 1),
        encoded,
        effective.get("seed", 0),
        model_config,
        train_config,
        log=print,
    )
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "search.json").write_text(
        json.dumps([t.to_dict() for t in trials], indent=2) + "\n", encoding="utf-8"
    )
    _write_run_config(out_dir, "search", effective)
    best = trials[0]
    print(
        f"best: layers={best.config.num_layers} d_model={best.config.d_model} "
        f"dropout={best.config.dropout_rate:.3f} val_loss={best.val_loss:.4f}"
    )
    return EXIT_OK


def cmd_generate(args: argparse.Namespace) -> int:
    effective = _effective(args, ["checkpoint", "text", "input", "jsonl", "out", "max_len"])
    ckpt_path = Path(effective["checkpoint"])
    if not ckpt_path.exists():
        raise InputError(f"checkpoint not found: {ckpt_path}")
    ckpt = load_checkpoint(ckpt_path)
    max_len = effective.get("max_len") or min(512, ckpt.config.max_positions - 1)

    def run(pseudocode: str) -> str:
        return generate_code(
            ckpt.params, ckpt.config, ckpt.src_vocab, ckpt.tgt_vocab, pseudocode, max_len
        )

    if effective.get("jsonl"):
        pairs = dataset.load_pairs_jsonl(effective["jsonl"])
        out_path = Path(effective.get("out") or "candidates.jsonl")
        with open(out_path, "w", encoding="utf-8", newline="\n") as fh:
            for pair in pairs:
                fh.write(
                    json.dumps({"id": pair.id_str, "code": run(pair.pseudocode)}, sort_keys=True)
                )
                fh.write("\n")
        print(f"{len(pairs)} candidates written to {out_path}")
        return EXIT_OK

    if effective.get("text") is not None:
        pseudocode = effective["text"]
    elif effective.get("input"):
        source = Path(effective["input"])
        if not source.exists():
            raise InputError(f"input not found: {source}")
        pseudocode = source.read_text(encoding="utf-8")
    else:
        raise InputError("generate needs one of --text, --input, or --jsonl")
    code = run(pseudocode)
    if effective.get("out"):
        Path(effective["out"]).write_text(code + "\n", encoding="utf-8")
    else:
        print(code)
    return EXIT_OK


def _load_codes(path: Path) -> tuple[list[str], list[str]]:
    if not path.exists():
        raise InputError(f"file not found: {path}")
    ids, codes = [], []
    with open(path, encoding="utf-8") as fh:
        for i, line in enumerate(fh):
            if not line.strip():
                continue
            obj = json.loads(line)
            if "code" not in obj:
                raise InputError(f"{path}:{i + 1}: missing 'code' field")
            ids.append(str(obj.get("id", i)))
            codes.append(obj["code"])
    return ids, codes


_TABLE_ROWS = [
    ("Similarity Score", "similarity"),
    ("CodeBLEU", "codebleu"),
    ("Ngram Match Score", "ngram"),
    ("Weighted Ngram Match Score", "weighted_ngram"),
    ("Syntax Match Score", "syntax"),
    ("Dataflow Match Score", "dataflow"),
]


def _dump_trees(path: Path, ids: list[str], candidates: list[str], references: list[str]) -> None:
    from .cppast import extract_dataflow, lex_cpp, parse_cpp_subset

    def described(code: str) -> dict:
        tree, diagnostics = parse_cpp_subset(lex_cpp(code))
        return {
            "ast": tree.to_dict(),
            "dataflow": extract_dataflow(tree).to_dict(),
            "diagnostics": diagnostics,
        }

    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for pair_id, cand, ref in zip(ids, candidates, references):
            record = {"id": pair_id, "candidate": described(cand), "reference": described(ref)}
            fh.write(json.dumps(record, sort_keys=True))
            fh.write("\n")


def cmd_evaluate(args: argparse.Namespace) -> int:
    effective = _effective(
        args, ["candidates", "references", "out", "table", "keyword_boost", "debug_trees"]
    )
    ids, candidates = _load_codes(Path(effective["candidates"]))
    _, references = _load_codes(Path(effective["references"]))
    weights = MetricWeights(keyword_boost=effective.get("keyword_boost", 5.0))
    try:
        report = corpus_evaluate(candidates, references, weights, ids)
    except LengthMismatchError as err:
        raise InputError(str(err)) from err
    if effective.get("debug_trees"):
        _dump_trees(Path(effective["debug_trees"]), ids, candidates, references)
    payload = json.dumps(report.to_dict(), indent=2) + "\n"
    if effective.get("out"):
        out_path = Path(effective["out"])
        out_path.parent.mkdir(parents=True, exist_ok=True)
        out_path.write_text(payload, encoding="utf-8")
        print(f"report written to {out_path}")
    else:
        print(payload, end="")
    if effective.get("table"):
        width = max(len(label) for label, _ in _TABLE_ROWS)
        print(f"{'Metric'.ljust(width)}  Mean")
        for label, key in _TABLE_ROWS:
            value = report.means[key]
            rendered = "-" if value is None else f"{value:.4f}"
            print(f"{label.ljust(width)}  {rendered}")
    return EXIT_OK


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import create_app

    effective = _effective(args, ["checkpoint", "host", "port"])
    ckpt = effective.get("checkpoint")
    if ckpt is not None and not Path(ckpt).exists():
        raise InputError(f"checkpoint not found: {ckpt}")
    app = create_app(checkpoint_path=ckpt)
    uvicorn.run(app, host=effective.get("host", "127.0.0.1"), port=effective.get("port", 8000))
    return EXIT_OK


def _histogram_svg(histogram: dict[int, int], title: str) -> str:
    if not histogram:
        return '<svg xmlns="http://www.w3.org/2000/svg" width="400" height="60"><text x="10" y="30">no data</text></svg>'
    bar_w, chart_h, pad = 18, 220, 40
    keys = sorted(histogram)
    peak = max(histogram.values())
    width = pad * 2 + bar_w * len(keys)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{chart_h + 2 * pad}">',
        f'<text x="{pad}" y="{pad - 16}" font-size="13">{title}</text>',
    ]
    for i, key in enumerate(keys):
        h = round(histogram[key] / peak * chart_h)
        x = pad + i * bar_w
        y = pad + chart_h - h
        parts.append(f'<rect x="{x}" y="{y}" width="{bar_w - 3}" height="{h}" fill="#4477aa"/>')
        parts.append(
            f'<text x="{x}" y="{pad + chart_h + 14}" font-size="9">{key}</text>'
        )
    parts.append("</svg>")
    return "".join(parts)


def cmd_stats(args: argparse.Namespace) -> int:
    effective = _effective(args, ["input", "out", "svg", "preamble"])
    input_path = Path(effective["input"])
    if not input_path.exists():
        raise InputError(f"input not found: {input_path}")
    preamble = tuple(effective.get("preamble", dataset.DEFAULT_PREAMBLE))
    diagnostics: list[str] = []
    try:
        with open(input_path, encoding="utf-8") as fh:
            records = dataset.parse_spoc_tsv(fh, diagnostics)
        pairs = dataset.aggregate_programs(records, preamble, diagnostics)
    except dataset.MissingColumnError as err:
        raise InputError(str(err)) from err
    stats = dataset.corpus_stats(pairs)
    out_dir = Path(effective.get("out", "."))
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "stats.json").write_text(
        json.dumps(_jsonable(stats), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    if effective.get("svg"):
        svg = _histogram_svg(stats["programs_per_problem"], "programs per problem")
        (out_dir / "histogram.svg").write_text(svg, encoding="utf-8")
    _write_run_config(out_dir, "stats", effective)
    print(
        f"{stats['programs']} programs, {stats['problems']} problems, "
        f"mean {stats['mean_programs_per_problem']:.1f} programs/problem"
    )
    return EXIT_OK


# --- argument parsing ---------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pseudocpp", description="pseudocode-to-C++ workbench"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, func, configure) -> None:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON config file; flags override its values")
        configure(p)
        p.set_defaults(func=func)

    def conf_preprocess(p):
        p.add_argument("--input", required=True, help="statement-level TSV")
        p.add_argument("--out", required=True)
        p.add_argument("--split", help="three comma-separated fractions, default 0.8,0.1,0.1")
        p.add_argument("--seed", type=int)

    def conf_build_vocab(p):
        p.add_argument("--data", required=True, help="directory with train.jsonl")
        p.add_argument("--out")
        p.add_argument("--min-count", dest="min_count", type=int)

    def conf_train(p):
        p.add_argument("--data", required=True)
        p.add_argument("--out", required=True)
        p.add_argument("--preset", choices=sorted(presets.MODEL_PRESETS))
        p.add_argument("--seed", type=int)
        p.add_argument("--min-count", dest="min_count", type=int)
        p.add_argument("--epochs", type=int)
        p.add_argument("--batch-size", dest="batch_size", type=int)
        p.add_argument("--warmup-steps", dest="warmup_steps", type=int)
        p.add_argument("--lr-scale", dest="lr_scale", type=float)
        p.add_argument("--num-layers", dest="num_layers", type=int)
        p.add_argument("--d-model", dest="d_model", type=int)
        p.add_argument("--num-heads", dest="num_heads", type=int)
        p.add_argument("--d-ff", dest="d_ff", type=int)
        p.add_argument("--dropout", dest="dropout_rate", type=float)
        p.add_argument("--max-positions", dest="max_positions", type=int)
        p.add_argument(
            "--self-check",
            dest="self_check",
            action="store_const",
            const=True,
            help="run the finite-difference gradient suite before training",
        )

    def conf_search(p):
        conf_train(p)
        p.add_argument("--iterations", type=int)
        p.add_argument("--trial-epochs", dest="trial_epochs", type=int)
        p.add_argument("--layers-range", dest="layers_range", help="e.g. 4,6")
        p.add_argument("--d-model-choices", dest="d_model_choices", help="e.g. 128,256")
        p.add_argument("--dropout-range", dest="dropout_range", help="e.g. 0.1,0.2")

    def conf_generate(p):
        p.add_argument("--checkpoint", required=True)
        p.add_argument("--text", help="pseudocode given inline")
        p.add_argument("--input", help="file containing pseudocode")
        p.add_argument("--jsonl", help="jsonl with 'pseudocode' fields; emits candidates jsonl")
        p.add_argument("--out")
        p.add_argument("--max-len", dest="max_len", type=int)

    def conf_evaluate(p):
        p.add_argument("--candidates", required=True, help="jsonl with 'code' per line")
        p.add_argument("--references", required=True, help="jsonl with 'code' per line")
        p.add_argument("--out")
        p.add_argument("--table", action="store_const", const=True)
        p.add_argument("--keyword-boost", dest="keyword_boost", type=float)
        p.add_argument(
            "--debug-trees",
            dest="debug_trees",
            help="also write per-pair AST and dataflow JSON to this file",
        )

    def conf_serve(p):
        p.add_argument("--checkpoint")
        p.add_argument("--host")
        p.add_argument("--port", type=int)

    def conf_stats(p):
        p.add_argument("--input", required=True)
        p.add_argument("--out")
        p.add_argument("--svg", action="store_const", const=True)

    add("preprocess", cmd_preprocess, conf_preprocess)
    add("build-vocab", cmd_build_vocab, conf_build_vocab)
    add("train", cmd_train, conf_train)
    add("search", cmd_search, conf_search)
    add("generate", cmd_generate, conf_generate)
    add("evaluate", cmd_evaluate, conf_evaluate)
    add("serve", cmd_serve, conf_serve)
    add("stats", cmd_stats, conf_stats)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INPUT
    except SelfCheckError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_SELF_CHECK
    except KeyboardInterrupt:
        return EXIT_RUNTIME
    except Exception as err:  # single boundary mapping failures to an exit code
        print(f"error: {type(err).__name__}: {err}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
