"""The pipeline stages behind the CLI subcommands.

Every stage reads and writes only the documented files under
``config.out_dir``, so any stage can be rerun on its own::

    out/pairs.jsonl                 extract
    out/extract.summary.json        extract
    out/tokenizer.{source,asm}.json train-tokenizers
    out/dataset/                    build (pairs.{train,test}.jsonl, manifest.json, tokenizers)
    out/dataset/stats/              stats
    out/eval/<backend>/             eval
"""

from __future__ import annotations

import json
import re
import shlex
import shutil
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Optional

from . import asm, dataset, tokenizer
from .backend import ConstantBackend, EchoBackend, KNNDecompiler, SubprocessBackend, random_control, serve
from .config import PipelineConfig
from .dataset import FunctionPair, Provenance
from .metrics import EvalReport, evaluate
from .profiles import ProfileRegistry, preprocess

PAIRS_FILE = "pairs.jsonl"
SUMMARY_FILE = "extract.summary.json"
DATASET_DIR = "dataset"


class PipelineError(Exception):
    """A stage cannot run at all (missing inputs, nothing extractable)."""


def _out(config: PipelineConfig) -> Path:
    return Path(config.out_dir)


def _require(path: Path, stage: str) -> Path:
    if not path.exists():
        raise PipelineError(f"{path} not found; run `{stage}` first")
    return path


def _pairs_from_file(task) -> tuple:
    """Worker: extract one ``.s`` file into pairs. Must stay picklable."""
    asm_path, rel_path, source_root, language, profiles_file, keep_directives = task
    registry = ProfileRegistry.from_file(profiles_file) if profiles_file else ProfileRegistry()
    result = asm.extract_file(asm_path, rel_path)
    diag = result.diagnostics
    pairs = []
    for fn in result.functions:
        flags = {"perforated": fn.perforated, "multi_file": fn.multi_file, "zero_loc": fn.zero_loc, "suspect": False}
        asm_text = fn.asm_text(keep_directives)
        prov = Provenance(rel_path, fn.label, fn.source_file, tuple(fn.line_span))
        if fn.zero_loc:
            lang = language if language != "auto" else ""
            pairs.append(FunctionPair.create(lang, asm_text, "", provenance=prov, flags=flags))
            continue
        profile = registry.get(language) if language != "auto" else registry.for_path(fn.source_file)
        if profile is None:
            diag["dropped:unknown_language"] += 1
            continue
        try:
            raw = asm.resolve_source(fn, source_root)
        except asm.MissingSourceFile:
            diag["dropped:missing_source"] += 1
            continue
        except asm.SpanOutOfRange:
            diag["dropped:span_out_of_range"] += 1
            continue
        pre = preprocess(raw, profile)
        flags["suspect"] = pre.suspect
        if pre.suspect:
            diag["suspect"] += 1
        pairs.append(FunctionPair.create(profile.name, asm_text, pre.text, provenance=prov, flags=flags))
    return pairs, diag


def cmd_extract(config: PipelineConfig) -> tuple:
    """Walk ``asm_root`` for ``.s`` files and write ``pairs.jsonl``.

    Returns ``(pairs, diagnostics)``.  Raises :class:`PipelineError` only
    when nothing at all could be extracted.
    """
    if not config.asm_root:
        raise PipelineError("asm_root is not set")
    asm_root = Path(config.asm_root)
    source_root = config.source_root or config.asm_root
    files = sorted(p for p in asm_root.rglob("*.s") if p.is_file())
    if not files:
        raise PipelineError(f"no .s files under {asm_root}")
    tasks = [
        (str(p), p.relative_to(asm_root).as_posix(), source_root, config.language, config.profiles_file, config.keep_directives)
        for p in files
    ]
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(_pairs_from_file, tasks))
    else:
        results = [_pairs_from_file(t) for t in tasks]

    pairs = []
    diagnostics = asm.Diagnostics()
    for file_pairs, diag in results:
        pairs.extend(file_pairs)
        diagnostics.update(diag)
    diagnostics["files"] = len(files)
    diagnostics["pairs"] = len(pairs)
    if not pairs:
        raise PipelineError(f"no functions extracted from {len(files)} .s files")

    out = _out(config)
    out.mkdir(parents=True, exist_ok=True)
    dataset.write_jsonl(pairs, out / PAIRS_FILE)
    summary = dict(sorted(diagnostics.items()))
    (out / SUMMARY_FILE).write_text(json.dumps(summary, indent=2) + "\n")
    return pairs, diagnostics


def _usable(pairs: list, config: PipelineConfig) -> list:
    return [p for p in pairs if not any(p.flags.get(f) for f in config.flag_policy)]


def cmd_train_tokenizers(config: PipelineConfig) -> tuple:
    """Train the source (H) and asm (L) tokenizers on extracted pairs."""
    out = _out(config)
    pairs = _usable(dataset.read_jsonl(_require(out / PAIRS_FILE, "extract")), config)
    if not pairs:
        raise PipelineError("no pairs survive the flag policy")
    src_model = tokenizer.train((p.source_text for p in pairs), config.source_vocab, config.tokenizer_mode, "source")
    asm_model = tokenizer.train((p.asm_text for p in pairs), config.asm_vocab, config.tokenizer_mode, "asm")
    tokenizer.save(src_model, out / dataset.SOURCE_TOKENIZER_FILE)
    tokenizer.save(asm_model, out / dataset.ASM_TOKENIZER_FILE)
    return src_model, asm_model


def cmd_build(config: PipelineConfig) -> tuple:
    """Filter, split and export the dataset directory; returns (train, test, manifest)."""
    out = _out(config)
    pairs = dataset.read_jsonl(_require(out / PAIRS_FILE, "extract"))
    src_path = _require(out / dataset.SOURCE_TOKENIZER_FILE, "train-tokenizers")
    asm_path = _require(out / dataset.ASM_TOKENIZER_FILE, "train-tokenizers")
    src_model, asm_model = tokenizer.load(src_path), tokenizer.load(asm_path)

    included, manifest = dataset.build(
        pairs,
        src_model,
        asm_model,
        config.max_source_len,
        config.max_asm_len,
        config.flag_policy,
        name=config.dataset_name,
        language=config.language if config.language != "auto" else "",
    )
    train, test = dataset.split(included, config.test_fraction, config.seed)
    manifest.split = {
        "test_fraction": config.test_fraction,
        "seed": config.seed,
        "train_count": len(train),
        "test_count": len(test),
    }
    target = out / DATASET_DIR
    dataset.export(train, test, manifest, target)
    shutil.copyfile(src_path, target / dataset.SOURCE_TOKENIZER_FILE)
    shutil.copyfile(asm_path, target / dataset.ASM_TOKENIZER_FILE)
    return train, test, manifest


def _load_dataset(config: PipelineConfig) -> tuple:
    target = _require(_out(config) / DATASET_DIR, "build")
    train, test, manifest = dataset.import_dataset(target)
    src_model = tokenizer.load(target / dataset.SOURCE_TOKENIZER_FILE)
    asm_model = tokenizer.load(target / dataset.ASM_TOKENIZER_FILE)
    return train, test, manifest, src_model, asm_model


def manifest_table(manifest: dataset.DatasetManifest) -> str:
    row = manifest.table_row()
    head = "| " + " | ".join(row) + " |"
    rule = "|" + "---|" * len(row)
    body = "| " + " | ".join(str(v) for v in row.values()) + " |"
    return "\n".join([head, rule, body]) + "\n"


def cmd_stats(config: PipelineConfig) -> dict:
    """Write the manifest table, the contraction histogram and batch counts."""
    train, test, manifest, _, _ = _load_dataset(config)
    pairs = train + test
    stats = dataset.contraction_stats(pairs, bins=config.eta_bins)
    batches = dataset.batch_by_tokens(train, config.max_tokens, "asm") if train else []
    target = _out(config) / DATASET_DIR / "stats"
    target.mkdir(parents=True, exist_ok=True)
    stats.write_csv(target / "eta_hist.csv")
    table = manifest_table(manifest)
    (target / "table.md").write_text(table)
    summary = {
        "eta_direction": stats.direction,
        "eta_mean": stats.mean,
        "eta_stddev": stats.stddev,
        "eta_samples": len(stats.per_sample_eta),
        "eta_skipped": stats.skipped,
        "token_ratio": manifest.token_ratio,
        "train_batches": len(batches),
        "oversize_batches": sum(b.oversize for b in batches),
        "max_tokens": config.max_tokens,
    }
    (target / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    return {"table": table, "summary": summary, "stats": stats}


def make_backend(spec: str, train: list, asm_model, seed: int = 0, test: Optional[list] = None):
    """Backends by name: ``knn``, ``random[:SEED]``, ``echo``, ``empty``, ``cmd:COMMAND``."""
    if spec == "knn":
        return KNNDecompiler.from_pairs(train, asm_model)
    if spec == "random" or spec.startswith("random:"):
        return random_control(train, int(spec.split(":", 1)[1]) if ":" in spec else seed)
    if spec == "echo":
        return EchoBackend(test or [])
    if spec == "empty":
        return ConstantBackend("")
    if spec.startswith("cmd:"):
        return SubprocessBackend(shlex.split(spec[4:]))
    raise PipelineError(f"unknown backend {spec!r}")


def _safe_name(spec: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", spec)[:64] or "backend"


def cmd_eval(config: PipelineConfig, backend_spec: str = "knn") -> EvalReport:
    train, test, manifest, src_model, asm_model = _load_dataset(config)
    backend = make_backend(backend_spec, train, asm_model, config.seed, test)
    try:
        report = evaluate(
            backend, test, src_model, model=f"{manifest.name}/{backend_spec}", tokenizer_ref=dataset.SOURCE_TOKENIZER_FILE
        )
    finally:
        if isinstance(backend, SubprocessBackend):
            backend.close()
    report.write(_out(config) / "eval" / _safe_name(backend_spec))
    return report


def cmd_baseline_serve(config: PipelineConfig, in_stream, out_stream) -> int:
    train, _, _, _, asm_model = _load_dataset(config)
    return serve(KNNDecompiler.from_pairs(train, asm_model), in_stream, out_stream)


def run_all(config: PipelineConfig) -> dict:
    pairs, diagnostics = cmd_extract(config)
    cmd_train_tokenizers(config)
    train, test, manifest = cmd_build(config)
    stats = cmd_stats(config)
    return {"pairs": pairs, "diagnostics": diagnostics, "train": train, "test": test, "manifest": manifest, **stats}

