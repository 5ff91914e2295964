"""Slow, obviously-correct reference implementations used only by tests."""

import random
import re
from pathlib import Path

DIGITS = set(b"0123456789")


def full_matrix_levenshtein(a, b):
    rows, cols = len(a) + 1, len(b) + 1
    d = [[0] * cols for _ in range(rows)]
    for i in range(rows):
        d[i][0] = i
    for j in range(cols):
        d[0][j] = j
    for i in range(1, rows):
        for j in range(1, cols):
            d[i][j] = min(
                d[i - 1][j] + 1,
                d[i][j - 1] + 1,
                d[i - 1][j - 1] + (0 if a[i - 1] == b[j - 1] else 1),
            )
    return d[-1][-1]


def whitespace_words(text):
    """Words carrying their preceding space/newline, built with a plain loop."""
    words = []
    cur = ""
    for ch in text:
        if ch in " \n":
            if cur:
                words.append(cur)
            cur = ch
        else:
            cur += ch
    if cur:
        words.append(cur)
    # a lone whitespace char followed by whitespace is its own word already
    return words


def brute_force_bpe(corpus, target_vocab, base_vocab=260):
    """Recount every adjacent pair from scratch at every step."""
    freq = {}
    for text in corpus:
        for w in whitespace_words(text):
            freq[w] = freq.get(w, 0) + 1
    words = {w: [bytes([b]) for b in w.encode()] for w in freq}
    merges = []
    while base_vocab + len(merges) < target_vocab:
        counts = {}
        for w, syms in words.items():
            for x, y in zip(syms, syms[1:]):
                if DIGITS & set(x) or DIGITS & set(y):
                    continue
                counts[(x, y)] = counts.get((x, y), 0) + freq[w]
        if not counts:
            break
        best = max(counts.values())
        if best < 2:
            break
        pair = min(p for p, c in counts.items() if c == best)
        merges.append(pair)
        for w, syms in words.items():
            out, k = [], 0
            while k < len(syms):
                if k + 1 < len(syms) and (syms[k], syms[k + 1]) == pair:
                    out.append(syms[k] + syms[k + 1])
                    k += 2
                else:
                    out.append(syms[k])
                    k += 1
            words[w] = out
    return merges


def strip_nested_comments(text, open_="(*", close="*)"):
    """Hand-scan of nestable comments only (no strings), comments become a space."""
    out = []
    depth = 0
    i = 0
    while i < len(text):
        if text.startswith(open_, i):
            depth += 1
            i += 2
        elif depth and text.startswith(close, i):
            depth -= 1
            i += 2
            if depth == 0:
                out.append(" ")
        else:
            if depth == 0:
                out.append(text[i])
            i += 1
    return " ".join("".join(out).split())


# ---------------------------------------------------------------------------
# Randomized preprocessing snippets with a known expected rendering.

_CODE_OPS = ["+", "-", "=", ";", ",", "{", "}", "[", "]", "<", ">", "&", "|", "%", "^", "?", ":", ".", "==", "+="]
_WORDS = ["x", "y", "total", "i", "n", "print", "return", "if", "val", "arr", "sum", "let", "do", "end", "k2", "42", "0"]
_TEXT = "abcdefgh xyz 0123 +-=;,.:?<>{}[]%&|^~@$"


class _Render:
    def __init__(self):
        self.lines = [["", False]]

    def add(self, text):
        self.lines[-1][0] += text

    def newline(self, comment=False):
        self.lines.append(["", comment])

    def mark_comment(self):
        self.lines[-1][1] = True

    def result(self):
        kept = []
        for text, had_comment in self.lines:
            text = " ".join(text.replace("\t", " ").split(" "))
            text = re.sub(" +", " ", text).strip(" ")
            if text or not had_comment:
                kept.append(text)
        return "\n".join(kept)


def _rand_text(rng, extra="", newline=False, n=8):
    alphabet = _TEXT + extra + ("\n" if newline else "")
    return "".join(rng.choice(alphabet) for _ in range(rng.randint(0, n)))


def _code(rng, language):
    ops = list(_CODE_OPS)
    if language != "ocaml":
        ops.append("(")
        ops.append(")")
    if language != "fortran":
        ops.append("*")
    return rng.choice(_WORDS + ops)


def _block_comment(rng, language, depth=0):
    if language == "ocaml":
        parts = ["(*"]
        for _ in range(rng.randint(0, 3)):
            if depth < 2 and rng.random() < 0.3:
                parts.append(_block_comment(rng, language, depth + 1))
            else:
                parts.append(_rand_text(rng, extra="\"'/", newline=True))
        parts.append("*)")
        return "".join(parts)
    body = _rand_text(rng, extra="\"'/!(", newline=True).replace("*/", "")
    body = body.rstrip("*") if body.endswith("*") else body
    return "/*" + body + "*/"


def _string(rng, language):
    """Return (source, rendered)."""
    if language == "fortran":
        q = rng.choice(["'", '"'])
        body = "".join(rng.choice([c for c in _TEXT + "/!*(" if c != q] + [q + q]) for _ in range(rng.randint(0, 8)))
        return q + body + q, q + "STR" + q
    if language == "go" and rng.random() < 0.3:
        body = _rand_text(rng, extra="\"'/*\\!(", newline=True)
        return "`" + body + "`", "`STR`"
    pieces = [rng.choice(list(_TEXT + "/*!('") + ["\\\"", "\\\\", "\\n", "//", "/*", "(*"]) for _ in range(rng.randint(0, 8))]
    if language == "ocaml" and rng.random() < 0.2:
        pieces.append("\n")
    return '"' + "".join(pieces) + '"', '"STR"'


def _char(rng):
    lit = rng.choice(["'a'", "'Z'", "'0'", "' '", "'\\n'", "'\\''", "'\\\\'", "'\"'", "';'"])
    return lit, lit


def random_snippet(rng, language):
    """Return ``(source, expected_preprocessed_text)``."""
    r = _Render()
    src = []
    line_comment = {"c": "//", "go": "//", "fortran": "!"}.get(language)
    has_block = language in ("c", "go", "ocaml")
    has_char = language in ("c", "go", "ocaml")
    for _ in range(rng.randint(1, 25)):
        roll = rng.random()
        if roll < 0.40:
            text = _code(rng, language)
            src.append(text)
            r.add(text)
        elif roll < 0.50:
            ws = "".join(rng.choice(" \t") for _ in range(rng.randint(1, 4)))
            src.append(ws)
            r.add(ws)
        elif roll < 0.62:
            src.append("\n")
            r.newline()
        elif roll < 0.70 and line_comment:
            src.append(line_comment + _rand_text(rng, extra="\"'/*("))
            r.mark_comment()
            src.append("\n")
            r.newline()
        elif roll < 0.80 and has_block:
            comment = _block_comment(rng, language)
            src.append(comment)
            r.mark_comment()
            for _ in range(comment.count("\n")):
                r.newline(comment=True)
            r.add(" ")
        elif roll < 0.93:
            s, rendered = _string(rng, language)
            src.append(s)
            r.add(rendered)
        elif has_char:
            s, rendered = _char(rng)
            src.append(s)
            r.add(rendered)
        # keep pieces from fusing into a different token
        src.append(" ")
        r.add(" ")
    return "".join(src), r.result()


def snippet_fixture(language, count=500, seed=0):
    rng = random.Random(f"{language}-{seed}")
    return [random_snippet(rng, language) for _ in range(count)]


# ---------------------------------------------------------------------------
# Definition-line oracle for the compiled fixture corpus.

_C_DEF = re.compile(r"^(?:static\s+)?(?:int|long|void|double)\s+\**(\w+)\s*\([^;]*\)\s*\{")
_F_DEF = re.compile(r"^\s*(?:\w+\s+)?(subroutine|function)\s+(\w+)", re.IGNORECASE)


def known_definitions(source: Path):
    """``{symbol: definition line}`` found by text search over the source."""
    defs = {}
    for lineno, line in enumerate(source.read_text().splitlines(), 1):
        if source.suffix == ".c":
            m = _C_DEF.match(line)
            if m:
                defs[m.group(1)] = lineno
        else:
            if line.strip().lower().startswith("end"):
                continue
            m = _F_DEF.match(line)
            if m:
                # gfortran mangles external procedures to lowercase + '_'
                defs[m.group(2).lower() + "_"] = lineno
    return defs
