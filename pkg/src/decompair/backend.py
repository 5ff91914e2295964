"""Translation backends and the line-delimited JSON protocol they speak.

Protocol v1, one JSON object per line in each direction::

    -> {"request_id": 1, "asm_text": "add:\\npushq %rbp\\n..."}
    <- {"request_id": 1, "source_text": "int add(int a, int b) {...", "token_probs": null}

Responses come back in request order, one per request line.  A line that
cannot be handled yields ``{"request_id": <id or null>, "error": "..."}``.
"""

from __future__ import annotations

import json
import random
import subprocess
from dataclasses import dataclass
from typing import IO, Optional, Sequence

from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .dataset import pair_id
from .tokenizer import SubwordModel, encode
from .validation import check_consistent_length, check_texts

PROTOCOL_VERSION = 1


class EmptyTrainSet(ValueError):
    pass


class ProtocolError(ValueError):
    def __init__(self, message: str, request_id: Optional[int] = None):
        super().__init__(message)
        self.request_id = request_id


class BackendFailure(RuntimeError):
    pass


@dataclass
class TranslateRequest:
    request_id: int
    asm_text: str

    def to_json(self) -> str:
        return json.dumps({"request_id": self.request_id, "asm_text": self.asm_text})

    @classmethod
    def from_json(cls, line: str) -> "TranslateRequest":
        try:
            doc = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ProtocolError(f"invalid JSON: {exc.msg}") from None
        if not isinstance(doc, dict):
            raise ProtocolError("request must be a JSON object")
        rid = doc.get("request_id")
        if isinstance(rid, bool) or not isinstance(rid, int):
            raise ProtocolError("request_id must be an integer")
        if not isinstance(doc.get("asm_text"), str):
            raise ProtocolError("asm_text must be a string", rid)
        return cls(rid, doc["asm_text"])


@dataclass
class TranslateResponse:
    request_id: int
    source_text: str
    token_probs: Optional[list] = None

    def to_json(self) -> str:
        return json.dumps(
            {"request_id": self.request_id, "source_text": self.source_text, "token_probs": self.token_probs}
        )

    @classmethod
    def from_json(cls, line: str) -> "TranslateResponse":
        try:
            doc = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ProtocolError(f"invalid JSON: {exc.msg}") from None
        if not isinstance(doc, dict):
            raise ProtocolError("response must be a JSON object")
        if "error" in doc:
            raise BackendFailure(f"request {doc.get('request_id')}: {doc['error']}")
        if not isinstance(doc.get("source_text"), str) or not isinstance(doc.get("request_id"), int):
            raise ProtocolError("response needs integer request_id and string source_text")
        probs = doc.get("token_probs")
        if probs is not None and (
            not isinstance(probs, list) or not all(isinstance(p, (int, float)) and 0 <= p <= 1 for p in probs)
        ):
            raise ProtocolError("token_probs must be a list of numbers in [0, 1]", doc["request_id"])
        return cls(doc["request_id"], doc["source_text"], probs)

    def check_probs(self, tokenizer: SubwordModel) -> bool:
        """True when ``token_probs`` is absent or has one entry per source token."""
        return self.token_probs is None or len(self.token_probs) == len(encode(tokenizer, self.source_text))


def _error_line(message: str, request_id: Optional[int]) -> str:
    return json.dumps({"request_id": request_id, "error": message})


def serve(backend, in_stream: IO[str], out_stream: IO[str]) -> int:
    """Answer requests from ``in_stream`` until EOF; returns the number served.

    Request ids must strictly increase within a session.
    """
    last_id = None
    served = 0
    for line in in_stream:
        rid = None
        try:
            request = TranslateRequest.from_json(line)
            rid = request.request_id
            if last_id is not None and rid <= last_id:
                raise ProtocolError(f"request_id {rid} not greater than {last_id}", rid)
            last_id = rid
            reply = backend.translate(request).to_json()
            served += 1
        except ProtocolError as exc:
            reply = _error_line(str(exc), exc.request_id)
        except Exception as exc:  # a failing backend must not end the session
            reply = _error_line(f"{type(exc).__name__}: {exc}", rid)
        out_stream.write(reply + "\n")
        out_stream.flush()
    return served


def jaccard(a: frozenset, b: frozenset) -> float:
    union = len(a | b)
    return len(a & b) / union if union else 1.0


@dataclass(frozen=True)
class IndexEntry:
    pair_id: str
    asm_tokens: frozenset
    source_text: str
    asm_text: str


@dataclass
class RetrievalIndex:
    entries: list
    built_from: str = ""

    def __post_init__(self):
        self.entries = sorted(self.entries, key=lambda e: e.pair_id)
        self._exact = {}
        for e in self.entries:
            self._exact.setdefault(e.asm_text, e)


def build_index(train_pairs: Sequence, tokenizer: SubwordModel, built_from: str = "") -> RetrievalIndex:
    if not train_pairs:
        raise EmptyTrainSet("cannot build a retrieval index from zero pairs")
    entries = [
        IndexEntry(p.id, frozenset(encode(tokenizer, p.asm_text).ids), p.source_text, p.asm_text)
        for p in train_pairs
    ]
    return RetrievalIndex(entries, built_from)


def knn_decompile(index: RetrievalIndex, asm_text: str, tokenizer: SubwordModel, request_id: int = 0) -> TranslateResponse:
    """Source of the entry whose asm token set is most Jaccard-similar.

    An entry with byte-identical assembly is returned outright; otherwise
    ties go to the lowest pair id.
    """
    if not index.entries:
        raise EmptyTrainSet("retrieval index is empty")
    exact = index._exact.get(asm_text)
    if exact is not None:
        return TranslateResponse(request_id, exact.source_text)
    query = frozenset(encode(tokenizer, asm_text).ids)
    best, best_score = index.entries[0], -1.0
    for entry in index.entries:
        score = jaccard(query, entry.asm_tokens)
        if score > best_score:
            best, best_score = entry, score
    return TranslateResponse(request_id, best.source_text)


class KNNDecompiler(BaseEstimator):
    """Nearest-neighbour baseline with the scikit-learn fit/predict shape.

    ``fit(asm_texts, source_texts)`` indexes the training pairs and
    ``predict(asm_texts)`` returns retrieved sources.  It also implements
    ``translate`` so it can be served or evaluated as a backend.
    """

    def __init__(self, tokenizer: Optional[SubwordModel] = None):
        self.tokenizer = tokenizer

    def fit(self, X, y, ids=None):
        X = check_texts(X)
        y = check_texts(y, "y")
        check_consistent_length(X, y)
        if not X:
            raise EmptyTrainSet("cannot fit on zero pairs")
        if self.tokenizer is None:
            raise ValueError("KNNDecompiler needs an asm-side tokenizer")
        if ids is None:
            ids = [pair_id(a, s) for a, s in zip(X, y)]
        entries = [
            IndexEntry(i, frozenset(encode(self.tokenizer, a).ids), s, a) for i, a, s in zip(ids, X, y)
        ]
        self.index_ = RetrievalIndex(entries)
        return self

    @classmethod
    def from_pairs(cls, pairs: Sequence, tokenizer: SubwordModel) -> "KNNDecompiler":
        est = cls(tokenizer)
        est.index_ = build_index(pairs, tokenizer)
        return est

    def predict(self, X):
        check_is_fitted(self, "index_")
        return [knn_decompile(self.index_, a, self.tokenizer).source_text for a in check_texts(X)]

    def translate(self, request: TranslateRequest) -> TranslateResponse:
        check_is_fitted(self, "index_")
        return knn_decompile(self.index_, request.asm_text, self.tokenizer, request.request_id)


class RandomControl:
    """Answers every request with a uniformly drawn training source."""

    def __init__(self, sources: Sequence[str], seed: int = 0):
        if not sources:
            raise EmptyTrainSet("random control needs at least one source")
        self.sources = list(sources)
        self.rng = random.Random(seed)

    def translate(self, request: TranslateRequest) -> TranslateResponse:
        return TranslateResponse(request.request_id, self.rng.choice(self.sources))


def random_control(train_pairs: Sequence, seed: int = 0) -> RandomControl:
    return RandomControl([p.source_text for p in sorted(train_pairs, key=lambda p: p.id)], seed)


class LookupBackend:
    """Returns a fixed answer per assembly text; unknown input gets ``default``."""

    def __init__(self, table: dict, default: str = ""):
        self.table = dict(table)
        self.default = default

    def translate(self, request: TranslateRequest) -> TranslateResponse:
        return TranslateResponse(request.request_id, self.table.get(request.asm_text, self.default))


class EchoBackend:
    """Oracle answering with the ground truth of the pairs being evaluated.

    Request ``k`` is matched to ``pairs[k - 1]``, the numbering
    :func:`~decompair.metrics.evaluate` uses, so pairs sharing assembly still
    get their own answer; otherwise it falls back to an assembly lookup.
    """

    def __init__(self, pairs: Sequence):
        self.pairs = list(pairs)
        self.by_asm = {}
        for p in self.pairs:
            self.by_asm.setdefault(p.asm_text, p.source_text)

    def translate(self, request: TranslateRequest) -> TranslateResponse:
        k = request.request_id - 1
        if 0 <= k < len(self.pairs) and self.pairs[k].asm_text == request.asm_text:
            return TranslateResponse(request.request_id, self.pairs[k].source_text)
        return TranslateResponse(request.request_id, self.by_asm.get(request.asm_text, ""))


class ConstantBackend:
    def __init__(self, text: str = ""):
        self.text = text

    def translate(self, request: TranslateRequest) -> TranslateResponse:
        return TranslateResponse(request.request_id, self.text)


class SubprocessBackend:
    """Client for an external process that speaks protocol v1 on stdin/stdout."""

    def __init__(self, command: Sequence[str]):
        self.command = list(command)
        self.proc = subprocess.Popen(
            self.command,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            text=True,
            encoding="utf-8",
            bufsize=1,
        )

    def translate(self, request: TranslateRequest) -> TranslateResponse:
        if self.proc.poll() is not None:
            raise BackendFailure(f"backend exited with status {self.proc.returncode}")
        self.proc.stdin.write(request.to_json() + "\n")
        self.proc.stdin.flush()
        line = self.proc.stdout.readline()
        if not line:
            raise BackendFailure("backend closed its output")
        response = TranslateResponse.from_json(line)
        if response.request_id != request.request_id:
            raise BackendFailure(f"expected response {request.request_id}, got {response.request_id}")
        return response

    def close(self) -> None:
        if self.proc.stdin and not self.proc.stdin.closed:
            self.proc.stdin.close()
        try:
            self.proc.wait(timeout=5)
        except subprocess.TimeoutExpired:
            self.proc.kill()
            self.proc.wait()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
