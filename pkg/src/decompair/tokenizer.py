"""Byte-level BPE and character tokenizers, trained per side.

Text is pre-split into words at spaces and newlines; each word keeps the
whitespace character that preceded it as a prefix byte, so decoding is a
plain concatenation.  Merges never cross a word boundary and never touch a
digit, which keeps every number spelled one digit per token.
"""

from __future__ import annotations

import heapq
import json
import re
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Union

from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .validation import check_choice, check_positive_int, check_texts

FORMAT = "decompair-subword"
FORMAT_VERSION = 1

SPECIALS = ("<pad>", "<unk>", "<s>", "</s>")
PAD_ID, UNK_ID, BOS_ID, EOS_ID = range(4)
NUM_SPECIALS = len(SPECIALS)
BASE_VOCAB = NUM_SPECIALS + 256

MODES = ("bpe", "char")
SIDES = ("source", "asm")

_WORD_RE = re.compile(r"[ \n]?[^ \n]+|[ \n]")
_DIGITS = frozenset(b"0123456789")


class EmptyCorpus(ValueError):
    pass


class InvalidId(ValueError):
    pass


class ModelFormatError(ValueError):
    pass


def split_words(text: str) -> list:
    return _WORD_RE.findall(text)


def _has_digit(token: bytes) -> bool:
    return not _DIGITS.isdisjoint(token)


@dataclass
class TokenSeq:
    ids: list
    side: str = "source"

    def __len__(self):
        return len(self.ids)

    def __iter__(self):
        return iter(self.ids)


@dataclass
class SubwordModel:
    """A trained tokenizer.

    Ids ``0..3`` are the specials; id ``NUM_SPECIALS + k`` is ``tokens[k]``.
    The first 256 tokens are the single bytes, in byte order.
    """

    mode: str
    side: str
    tokens: list
    merges: list = field(default_factory=list)
    specials: tuple = SPECIALS

    def __post_init__(self):
        self._ids = {tok: i + NUM_SPECIALS for i, tok in enumerate(self.tokens)}
        self._ranks = {pair: r for r, pair in enumerate(self.merges)}
        self._cache = {}

    @property
    def vocab_size(self) -> int:
        return NUM_SPECIALS + len(self.tokens)

    def token_to_id(self, token: bytes) -> Optional[int]:
        return self._ids.get(token)

    def id_to_token(self, idx: int):
        """Token for ``idx``: a special's name (str) or the token's bytes."""
        if not 0 <= idx < self.vocab_size:
            raise InvalidId(idx)
        return self.specials[idx] if idx < NUM_SPECIALS else self.tokens[idx - NUM_SPECIALS]

    def _encode_word(self, word: str) -> list:
        cached = self._cache.get(word)
        if cached is not None:
            return cached
        parts = [bytes([b]) for b in word.encode("utf-8", "surrogatepass")]
        ranks = self._ranks
        while len(parts) > 1:
            best = None
            for k in range(len(parts) - 1):
                r = ranks.get((parts[k], parts[k + 1]))
                if r is not None and (best is None or r < best[0]):
                    best = (r, k)
            if best is None:
                break
            _, k = best
            left, right = parts[k], parts[k + 1]
            merged = left + right
            out = []
            j = 0
            while j < len(parts):
                if j < len(parts) - 1 and parts[j] == left and parts[j + 1] == right:
                    out.append(merged)
                    j += 2
                else:
                    out.append(parts[j])
                    j += 1
            parts = out
        ids = [self._ids[p] for p in parts]
        if len(self._cache) < 200_000:
            self._cache[word] = ids
        return ids

    def __eq__(self, other):
        if not isinstance(other, SubwordModel):
            return NotImplemented
        return (self.mode, self.side, self.tokens, self.merges, tuple(self.specials)) == (
            other.mode,
            other.side,
            other.tokens,
            other.merges,
            tuple(other.specials),
        )


def _count_pairs(words: list, freqs: list):
    counts = Counter()
    where = defaultdict(set)
    for w, (symbols, freq) in enumerate(zip(words, freqs)):
        for a, b in zip(symbols, symbols[1:]):
            if _has_digit(a) or _has_digit(b):
                continue
            counts[(a, b)] += freq
            where[(a, b)].add(w)
    return counts, where


def _merge_word(symbols: tuple, left: bytes, right: bytes, merged: bytes) -> tuple:
    out = []
    j = 0
    while j < len(symbols):
        if j < len(symbols) - 1 and symbols[j] == left and symbols[j + 1] == right:
            out.append(merged)
            j += 2
        else:
            out.append(symbols[j])
            j += 1
    return tuple(out)


def _learn_merges(word_counts: Counter, n_merges: int) -> list:
    words = []
    freqs = []
    for word, freq in sorted(word_counts.items()):
        words.append(tuple(bytes([b]) for b in word.encode("utf-8", "surrogatepass")))
        freqs.append(freq)

    counts, where = _count_pairs(words, freqs)
    heap = [(-c, pair) for pair, c in counts.items()]
    heapq.heapify(heap)

    merges = []
    while len(merges) < n_merges and heap:
        neg, pair = heapq.heappop(heap)
        if counts.get(pair, 0) != -neg:
            continue  # stale entry
        if -neg < 2:
            break
        left, right = pair
        merged = left + right
        merges.append(pair)
        changed = set()
        for w in sorted(where.pop(pair, ())):
            old = words[w]
            new = _merge_word(old, left, right, merged)
            if new == old:
                continue
            freq = freqs[w]
            for a, b in zip(old, old[1:]):
                if _has_digit(a) or _has_digit(b):
                    continue
                counts[(a, b)] -= freq
                changed.add((a, b))
            for a, b in zip(new, new[1:]):
                if _has_digit(a) or _has_digit(b):
                    continue
                counts[(a, b)] += freq
                where[(a, b)].add(w)
                changed.add((a, b))
            words[w] = new
        counts.pop(pair, None)
        for p in changed:
            c = counts.get(p, 0)
            if c > 0:
                heapq.heappush(heap, (-c, p))
            else:
                counts.pop(p, None)
    return merges


def train(
    corpus: Iterable[str],
    target_vocab: int,
    mode: str = "bpe",
    side: str = "source",
) -> SubwordModel:
    """Learn a tokenizer from ``corpus``.

    In BPE mode the most frequent adjacent pair is merged until the
    vocabulary reaches ``target_vocab`` or no pair occurs twice; equal counts
    go to the lexicographically smallest ``(left, right)``.  Char mode keeps
    the 256 single-byte tokens and learns nothing.
    """
    check_choice(mode, "mode", MODES)
    check_choice(side, "side", SIDES)
    word_counts = Counter()
    for text in corpus:
        word_counts.update(split_words(text))
    if not word_counts:
        raise EmptyCorpus("cannot train a tokenizer on an empty corpus")

    base = [bytes([b]) for b in range(256)]
    if mode == "char":
        return SubwordModel("char", side, base)

    check_positive_int(target_vocab, "target_vocab", minimum=BASE_VOCAB + 1)
    merges = _learn_merges(word_counts, target_vocab - BASE_VOCAB)
    tokens = base + [a + b for a, b in merges]
    return SubwordModel("bpe", side, tokens, merges)


def encode(model: SubwordModel, text: str) -> TokenSeq:
    ids = []
    for word in split_words(text):
        ids.extend(model._encode_word(word))
    return TokenSeq(ids, model.side)


def decode(model: SubwordModel, seq) -> str:
    """Inverse of :func:`encode`. PAD/BOS/EOS decode to nothing, UNK to U+FFFD."""
    ids = seq.ids if isinstance(seq, TokenSeq) else seq
    out = bytearray()
    for idx in ids:
        if isinstance(idx, bool) or not isinstance(idx, int) or not 0 <= idx < model.vocab_size:
            raise InvalidId(idx)
        if idx >= NUM_SPECIALS:
            out.extend(model.tokens[idx - NUM_SPECIALS])
        elif idx == UNK_ID:
            out.extend("�".encode())
    return out.decode("utf-8", "replace")


def _token_str(tok: bytes) -> str:
    # latin-1 maps each byte to one code point, so this is lossless
    return tok.decode("latin-1")


def save(model: SubwordModel, path: Union[str, Path]) -> None:
    doc = {
        "format": FORMAT,
        "version": FORMAT_VERSION,
        "mode": model.mode,
        "side": model.side,
        "specials": list(model.specials),
        "vocab": list(model.specials) + [_token_str(t) for t in model.tokens],
        "merges": [[_token_str(a), _token_str(b)] for a, b in model.merges],
    }
    Path(path).write_text(json.dumps(doc, ensure_ascii=True, indent=0) + "\n", encoding="utf-8")


def load(path: Union[str, Path]) -> SubwordModel:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ModelFormatError(f"{path}: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("format") != FORMAT:
        raise ModelFormatError(f"{path}: not a {FORMAT} file")
    if doc.get("version") != FORMAT_VERSION:
        raise ModelFormatError(f"{path}: unsupported version {doc.get('version')!r}")
    try:
        specials = tuple(doc["specials"])
        vocab = doc["vocab"]
        mode, side = doc["mode"], doc["side"]
        tokens = [s.encode("latin-1") for s in vocab[len(specials) :]]
        merges = [(a.encode("latin-1"), b.encode("latin-1")) for a, b in doc["merges"]]
    except (KeyError, TypeError, ValueError, UnicodeEncodeError) as exc:
        raise ModelFormatError(f"{path}: {exc}") from exc
    if specials != SPECIALS or tuple(vocab[: len(specials)]) != specials:
        raise ModelFormatError(f"{path}: unexpected special tokens")
    if mode not in MODES or side not in SIDES:
        raise ModelFormatError(f"{path}: bad mode/side {mode!r}/{side!r}")
    if tokens[:256] != [bytes([b]) for b in range(256)]:
        raise ModelFormatError(f"{path}: byte alphabet missing or out of order")
    if tokens[256:] != [a + b for a, b in merges]:
        raise ModelFormatError(f"{path}: vocabulary does not match merge list")
    return SubwordModel(mode, side, tokens, merges, specials)


def chars_per_token(model: SubwordModel, texts: Iterable[str]) -> float:
    chars = tokens = 0
    for text in texts:
        chars += len(text)
        tokens += len(encode(model, text))
    return chars / tokens if tokens else 0.0


class SubwordTokenizer(BaseEstimator, TransformerMixin):
    """scikit-learn wrapper: ``fit`` trains, ``transform`` encodes.

    >>> tok = SubwordTokenizer(vocab_size=300).fit(["let x = 1", "let y = 2"])
    >>> tok.inverse_transform(tok.transform(["let z = 3"]))
    ['let z = 3']
    """

    def __init__(self, vocab_size: int = 8000, mode: str = "bpe", side: str = "source"):
        self.vocab_size = vocab_size
        self.mode = mode
        self.side = side

    def fit(self, X, y=None):
        self.model_ = train(check_texts(X), self.vocab_size, self.mode, self.side)
        return self

    def transform(self, X):
        check_is_fitted(self, "model_")
        return [encode(self.model_, text).ids for text in check_texts(X)]

    def inverse_transform(self, X):
        check_is_fitted(self, "model_")
        return [decode(self.model_, ids) for ids in X]

    @classmethod
    def from_model(cls, model: SubwordModel) -> "SubwordTokenizer":
        est = cls(vocab_size=model.vocab_size, mode=model.mode, side=model.side)
        est.model_ = model
        return est

    def _more_tags(self):
        return {"X_types": ["string"]}
