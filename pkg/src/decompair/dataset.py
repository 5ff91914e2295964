"""Filtering, splitting, batching and statistics over function pairs."""

from __future__ import annotations

import csv
import hashlib
import json
import math
import random
import statistics
from collections import Counter
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from .tokenizer import SubwordModel, encode
from .validation import check_choice, check_fraction, check_positive_int

FLAGS = ("perforated", "multi_file", "zero_loc", "suspect")
DEFAULT_EXCLUDED_FLAGS = ("multi_file", "zero_loc")

TRAIN_FILE = "pairs.train.jsonl"
TEST_FILE = "pairs.test.jsonl"
MANIFEST_FILE = "manifest.json"
SOURCE_TOKENIZER_FILE = "tokenizer.source.json"
ASM_TOKENIZER_FILE = "tokenizer.asm.json"


class DegenerateSplit(ValueError):
    pass


def pair_id(asm_text: str, source_text: str) -> str:
    h = hashlib.sha256()
    h.update(asm_text.encode("utf-8", "surrogatepass"))
    h.update(b"\0")
    h.update(source_text.encode("utf-8", "surrogatepass"))
    return h.hexdigest()[:20]


@dataclass
class Provenance:
    asm_path: str = ""
    function_label: str = ""
    source_path: str = ""
    line_span: tuple = (0, 0)


@dataclass
class FunctionPair:
    id: str
    language: str
    asm_text: str
    source_text: str
    src_tokens: Optional[int] = None
    asm_tokens: Optional[int] = None
    provenance: Provenance = field(default_factory=Provenance)
    flags: dict = field(default_factory=lambda: dict.fromkeys(FLAGS, False))

    @classmethod
    def create(cls, language: str, asm_text: str, source_text: str, **kwargs) -> "FunctionPair":
        return cls(pair_id(asm_text, source_text), language, asm_text, source_text, **kwargs)

    def to_dict(self) -> dict:
        doc = asdict(self)
        doc["provenance"]["line_span"] = list(self.provenance.line_span)
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "FunctionPair":
        doc = dict(doc)
        prov = dict(doc.pop("provenance", {}))
        prov["line_span"] = tuple(prov.get("line_span", (0, 0)))
        flags = dict.fromkeys(FLAGS, False)
        flags.update(doc.pop("flags", {}))
        return cls(provenance=Provenance(**prov), flags=flags, **doc)

    def length(self, side: str) -> int:
        n = self.src_tokens if side == "source" else self.asm_tokens
        if n is None:
            raise ValueError(f"pair {self.id} has no {side} token count; build the dataset first")
        return n


def write_jsonl(pairs: Iterable[FunctionPair], path: Union[str, Path]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for p in pairs:
            fh.write(json.dumps(p.to_dict(), ensure_ascii=False) + "\n")


def read_jsonl(path: Union[str, Path]) -> list:
    with open(path, encoding="utf-8") as fh:
        return [FunctionPair.from_dict(json.loads(line)) for line in fh if line.strip()]


@dataclass
class DatasetManifest:
    """Dataset-level statistics over exactly the included pairs.

    ``max_source_len``/``max_asm_len`` are the observed maxima (in tokens);
    the caps used for filtering are kept separately.
    """

    name: str
    language: str
    max_source_len: int = 0
    max_asm_len: int = 0
    source_vocab: int = 0
    asm_vocab: int = 0
    source_line_count: int = 0
    source_token_count: int = 0
    asm_token_count: int = 0
    function_count: int = 0
    source_len_cap: int = 0
    asm_len_cap: int = 0
    token_ratio: float = 0.0
    split: dict = field(default_factory=dict)
    tokenizer_refs: dict = field(default_factory=dict)
    tokenizer_mode: str = "bpe"
    flag_policy: list = field(default_factory=list)
    dropped: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> "DatasetManifest":
        return cls(**doc)

    def table_row(self) -> dict:
        """Summary columns for the dataset table, in display order."""
        return {
            "Dataset": self.name,
            "Max Source Length": self.max_source_len,
            "Max Asm Length": self.max_asm_len,
            "Source Vocab Size": self.source_vocab,
            "Asm Vocab Size": self.asm_vocab,
            "Source Line Count": self.source_line_count,
            "Source Token Count": self.source_token_count,
            "Asm Token Count": self.asm_token_count,
            "Function Count": self.function_count,
        }


def count_lines(text: str) -> int:
    return len(text.split("\n")) if text else 0


def summarize(pairs: Sequence[FunctionPair], manifest: DatasetManifest) -> DatasetManifest:
    """Fill the statistic fields of ``manifest`` from ``pairs`` in place."""
    manifest.function_count = len(pairs)
    manifest.max_source_len = max((p.src_tokens for p in pairs), default=0)
    manifest.max_asm_len = max((p.asm_tokens for p in pairs), default=0)
    manifest.source_line_count = sum(count_lines(p.source_text) for p in pairs)
    manifest.source_token_count = sum(p.src_tokens for p in pairs)
    manifest.asm_token_count = sum(p.asm_tokens for p in pairs)
    src = manifest.source_token_count
    manifest.token_ratio = manifest.asm_token_count / src if src else 0.0
    return manifest


def build(
    pairs: Iterable[FunctionPair],
    source_tokenizer: SubwordModel,
    asm_tokenizer: SubwordModel,
    max_src_len: int,
    max_asm_len: int,
    flag_policy: Iterable[str] = DEFAULT_EXCLUDED_FLAGS,
    name: str = "dataset",
    language: str = "",
) -> tuple:
    """Tokenize, filter and summarize.

    Returns ``(included, manifest)``.  Pairs are dropped for an excluded
    flag, for exceeding a length cap, or as a duplicate id (first one wins);
    ``manifest.dropped`` holds the count per reason.
    """
    if source_tokenizer.side != "source" or asm_tokenizer.side != "asm":
        raise ValueError("expected a source-side and an asm-side tokenizer")
    check_positive_int(max_src_len, "max_src_len")
    check_positive_int(max_asm_len, "max_asm_len")
    excluded = sorted(set(flag_policy))
    for flag in excluded:
        check_choice(flag, "flag", FLAGS)

    dropped = Counter()
    seen = set()
    included = []
    for pair in pairs:
        flagged = [f for f in excluded if pair.flags.get(f)]
        if flagged:
            dropped["flag:" + flagged[0]] += 1
            continue
        if pair.id in seen:
            dropped["duplicate"] += 1
            continue
        src_n = len(encode(source_tokenizer, pair.source_text))
        asm_n = len(encode(asm_tokenizer, pair.asm_text))
        if src_n > max_src_len or asm_n > max_asm_len:
            dropped["length"] += 1
            continue
        seen.add(pair.id)
        included.append(replace(pair, src_tokens=src_n, asm_tokens=asm_n))

    manifest = DatasetManifest(
        name=name,
        language=language or (included[0].language if included else ""),
        source_vocab=source_tokenizer.vocab_size,
        asm_vocab=asm_tokenizer.vocab_size,
        source_len_cap=max_src_len,
        asm_len_cap=max_asm_len,
        tokenizer_refs={"source": SOURCE_TOKENIZER_FILE, "asm": ASM_TOKENIZER_FILE},
        tokenizer_mode=source_tokenizer.mode,
        flag_policy=excluded,
        dropped=dict(sorted(dropped.items())),
    )
    return included, summarize(included, manifest)


def split(pairs: Iterable[FunctionPair], test_fraction: float, seed: int = 0) -> tuple:
    """Deterministic seeded split by pair id, after dropping duplicate ids.

    Both halves come back sorted by id.
    """
    check_fraction(test_fraction, "test_fraction")
    unique = {}
    for p in pairs:
        unique.setdefault(p.id, p)
    ids = sorted(unique)
    random.Random(seed).shuffle(ids)
    n_test = int(round(len(ids) * test_fraction))
    if n_test == 0 or n_test == len(ids):
        raise DegenerateSplit(f"{len(ids)} unique pairs at test_fraction={test_fraction} leaves one side empty")
    test_ids = set(ids[:n_test])
    train = [unique[i] for i in sorted(unique) if i not in test_ids]
    test = [unique[i] for i in sorted(test_ids)]
    return train, test


@dataclass
class Batch:
    sample_ids: list
    max_len_in_batch: int
    oversize: bool = False

    @property
    def padded_token_cost(self) -> int:
        return len(self.sample_ids) * self.max_len_in_batch


def batch_by_tokens(samples: Sequence[FunctionPair], max_tokens: int, side: str = "source") -> list:
    """Greedy length-sorted packing under a padded token budget.

    A batch costs ``len(batch) * longest``; samples are taken shortest first
    and a batch is closed as soon as the next sample would push the cost over
    ``max_tokens``.  A sample longer than the budget gets a batch of its own
    marked ``oversize``.
    """
    check_positive_int(max_tokens, "max_tokens")
    check_choice(side, "side", ("source", "asm"))
    order = sorted(range(len(samples)), key=lambda i: (samples[i].length(side), samples[i].id, i))
    batches = []
    current = []
    longest = 0
    for i in order:
        n = samples[i].length(side)
        if n > max_tokens:
            if current:
                batches.append(Batch(current, longest))
                current, longest = [], 0
            batches.append(Batch([samples[i].id], n, oversize=True))
            continue
        if current and (len(current) + 1) * max(longest, n) > max_tokens:
            batches.append(Batch(current, longest))
            current, longest = [], 0
        current.append(samples[i].id)
        longest = max(longest, n)
    if current:
        batches.append(Batch(current, longest))
    return batches


@dataclass
class ContractionStats:
    per_sample_eta: list
    mean: float
    stddev: float
    bin_edges: list
    counts: list
    skipped: int = 0
    direction: str = "asm/source"

    def histogram_rows(self) -> list:
        return [(self.bin_edges[k], self.bin_edges[k + 1], c) for k, c in enumerate(self.counts)]

    def write_csv(self, path: Union[str, Path]) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["bin_start", "bin_end", "count"])
            for lo, hi, c in self.histogram_rows():
                writer.writerow([repr(lo), repr(hi), c])


def contraction_stats(
    pairs: Iterable[FunctionPair],
    bins: Union[int, Sequence[float]] = 20,
    direction: str = "asm/source",
) -> ContractionStats:
    """Per-sample token ratio; ``asm/source`` is assembly tokens per source token.

    ``stddev`` is the population standard deviation.  Pairs with a zero
    denominator are skipped and counted.  With explicit bin edges, values
    outside them land in the first or last bin.
    """
    check_choice(direction, "direction", ("asm/source", "source/asm"))
    etas = []
    skipped = 0
    for p in pairs:
        num, den = (p.asm_tokens, p.src_tokens) if direction == "asm/source" else (p.src_tokens, p.asm_tokens)
        if not den:
            skipped += 1
            continue
        etas.append(num / den)
    if not etas:
        return ContractionStats([], math.nan, math.nan, [], [], skipped, direction)
    values = np.asarray(etas, dtype=float)
    if isinstance(bins, int):
        lo, hi = float(values.min()), float(values.max())
        if lo == hi:
            lo, hi = lo - 0.5, hi + 0.5
        edges = np.linspace(lo, hi, bins + 1)
    else:
        edges = np.asarray(bins, dtype=float)
        values = np.clip(values, edges[0], edges[-1])
    counts, edges = np.histogram(values, bins=edges)
    return ContractionStats(
        per_sample_eta=etas,
        mean=statistics.fmean(etas),
        stddev=statistics.pstdev(etas),
        bin_edges=[float(e) for e in edges],
        counts=[int(c) for c in counts],
        skipped=skipped,
        direction=direction,
    )


def export(
    train: Sequence[FunctionPair],
    test: Sequence[FunctionPair],
    manifest: DatasetManifest,
    directory: Union[str, Path],
) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    write_jsonl(train, directory / TRAIN_FILE)
    write_jsonl(test, directory / TEST_FILE)
    (directory / MANIFEST_FILE).write_text(
        json.dumps(manifest.to_dict(), indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
    )
    return directory


def import_dataset(directory: Union[str, Path]) -> tuple:
    """Read back ``(train, test, manifest)`` written by :func:`export`."""
    directory = Path(directory)
    manifest = DatasetManifest.from_dict(json.loads((directory / MANIFEST_FILE).read_text(encoding="utf-8")))
    return read_jsonl(directory / TRAIN_FILE), read_jsonl(directory / TEST_FILE), manifest
