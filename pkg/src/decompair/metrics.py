"""Token-level edit distance, AED and translation throughput."""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Sequence, Union

from .backend import TranslateRequest
from .dataset import FunctionPair
from .tokenizer import SubwordModel, encode


class EmptyTruth(ValueError):
    pass


def edit_distance(a: Sequence, b: Sequence) -> int:
    """Levenshtein distance with unit insert, delete and substitute costs."""
    a = list(a)
    b = list(b)
    if len(a) < len(b):
        a, b = b, a
    if not b:
        return len(a)
    prev = list(range(len(b) + 1))
    for i, x in enumerate(a, 1):
        cur = [i]
        for j, y in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (x != y)))
        prev = cur
    return prev[-1]


def normalized_ed(pred: Sequence, truth: Sequence) -> float:
    """Edit distance divided by the ground-truth length; not clamped to 1."""
    if len(truth) == 0:
        raise EmptyTruth("ground truth has no tokens")
    return edit_distance(pred, truth) / len(truth)


@dataclass
class SampleScore:
    pair_id: str
    edit_distance: int
    truth_len: int
    normalized: float


@dataclass
class EvalReport:
    model: str
    tokenizer: str
    per_sample: list = field(default_factory=list)
    aed: float = float("nan")
    functions_per_second: float = 0.0
    backend_seconds: float = 0.0
    sample_count: int = 0
    skipped: int = 0
    skip_reasons: dict = field(default_factory=dict)

    def to_dict(self, timing: bool = True) -> dict:
        doc = asdict(self)
        if not timing:
            del doc["functions_per_second"], doc["backend_seconds"]
        return doc

    def write(self, directory: Union[str, Path]) -> None:
        """Write ``report.json`` (reproducible), ``timing.json`` and ``table.md``.

        Wall-clock numbers live only in the latter two so that reruns give a
        byte-identical ``report.json``.
        """
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        (directory / "report.json").write_text(json.dumps(self.to_dict(timing=False), indent=2) + "\n")
        timing = {"functions_per_second": self.functions_per_second, "backend_seconds": self.backend_seconds}
        (directory / "timing.json").write_text(json.dumps(timing, indent=2) + "\n")
        (directory / "table.md").write_text(format_table([self]))


def format_table(reports: Sequence[EvalReport]) -> str:
    lines = ["| Model | Avg. Edit Dist. | Translation Speed (function/s) |", "|---|---|---|"]
    for r in reports:
        lines.append(f"| {r.model} | {r.aed:.2f} | {r.functions_per_second:.2f} |")
    return "\n".join(lines) + "\n"


def evaluate(
    backend,
    pairs: Sequence[FunctionPair],
    tokenizer: SubwordModel,
    clock: Callable[[], float] = time.perf_counter,
    model: str = "backend",
    tokenizer_ref: str = "",
) -> EvalReport:
    """Run ``backend`` over ``pairs`` and score it with the source tokenizer.

    ``backend.translate`` gets a :class:`TranslateRequest` per pair.  Only
    the time spent inside those calls counts toward throughput.  A call that
    raises, or a pair whose ground truth tokenizes to nothing, is skipped and
    its reason counted.
    """
    if not pairs:
        raise ValueError("no pairs to evaluate")
    rows = []
    reasons = {}
    elapsed = 0.0
    for request_id, pair in enumerate(pairs, 1):
        start = clock()
        try:
            response = backend.translate(TranslateRequest(request_id, pair.asm_text))
        except Exception as exc:  # backend failures are per-sample
            elapsed += clock() - start
            key = f"backend:{type(exc).__name__}"
            reasons[key] = reasons.get(key, 0) + 1
            continue
        elapsed += clock() - start
        truth = encode(tokenizer, pair.source_text).ids
        pred = encode(tokenizer, response.source_text).ids
        try:
            score = normalized_ed(pred, truth)
        except EmptyTruth:
            reasons["empty_truth"] = reasons.get("empty_truth", 0) + 1
            continue
        rows.append(SampleScore(pair.id, edit_distance(pred, truth), len(truth), score))

    rows.sort(key=lambda r: r.pair_id)
    n = len(rows)
    return EvalReport(
        model=model,
        tokenizer=tokenizer_ref,
        per_sample=rows,
        aed=sum(r.normalized for r in rows) / n if n else float("nan"),
        functions_per_second=n / elapsed if elapsed > 0 else float("inf"),
        backend_seconds=elapsed,
        sample_count=n,
        skipped=len(pairs) - n,
        skip_reasons=dict(sorted(reasons.items())),
    )
