"""Per-language lexical knowledge and the source normalizer built on it.

A :class:`LanguageProfile` is pure data: comment and string-literal syntax
plus the file suffixes it applies to.  :func:`preprocess` is the only code
that consumes it, so supporting another language means writing another
profile (in Python or in a YAML document), never another scanner.
"""

from __future__ import annotations

import re
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import NamedTuple, Optional, Union

import yaml
from sklearn.base import BaseEstimator, TransformerMixin

from .validation import check_texts

PLACEHOLDER = "STR"


class StringDelim(NamedTuple):
    """A literal syntax.

    ``escape`` equal to ``close`` means the close delimiter is escaped by
    doubling it (Fortran ``'it''s'``).  ``multiline`` literals may contain raw
    newlines; the others end, unterminated, at the end of the line.
    """

    open: str
    close: str
    escape: Optional[str] = None
    multiline: bool = False


@dataclass(frozen=True)
class LanguageProfile:
    name: str
    extensions: tuple
    line_comment_prefixes: tuple = ()
    block_comment_delims: tuple = ()
    nested_comments: bool = False
    string_delims: tuple = ()
    char_literal_delims: Optional[StringDelim] = None
    replace_char_literals: bool = False

    def __post_init__(self):
        if not self.extensions:
            raise ValueError(f"profile {self.name!r}: extensions must be nonempty")
        tokens = list(self.line_comment_prefixes)
        for pair in self.block_comment_delims:
            if len(pair) != 2:
                raise ValueError(f"profile {self.name!r}: block comment delims must be (open, close) pairs")
            if pair[0] == pair[1]:
                raise ValueError(f"profile {self.name!r}: block comment open and close must differ")
            tokens.extend(pair)
        for delim in self.string_delims:
            tokens.extend(delim[:2])
        if self.char_literal_delims is not None:
            tokens.extend(self.char_literal_delims[:2])
        if any(not t for t in tokens):
            raise ValueError(f"profile {self.name!r}: delimiters must be nonempty strings")

    @classmethod
    def from_dict(cls, doc: dict) -> "LanguageProfile":
        doc = dict(doc)
        exts = doc.pop("extensions", ())
        char = doc.pop("char_literal_delims", None)
        return cls(
            extensions=tuple(e if e.startswith(".") else "." + e for e in exts),
            line_comment_prefixes=tuple(doc.pop("line_comment_prefixes", ())),
            block_comment_delims=tuple(tuple(p) for p in doc.pop("block_comment_delims", ())),
            string_delims=tuple(StringDelim(*d) for d in doc.pop("string_delims", ())),
            char_literal_delims=StringDelim(*char) if char else None,
            **doc,
        )

    def to_dict(self) -> dict:
        doc = asdict(self)
        doc["extensions"] = list(self.extensions)
        doc["line_comment_prefixes"] = list(self.line_comment_prefixes)
        doc["block_comment_delims"] = [list(p) for p in self.block_comment_delims]
        doc["string_delims"] = [list(d) for d in self.string_delims]
        if self.char_literal_delims is not None:
            doc["char_literal_delims"] = list(self.char_literal_delims)
        return doc


C = LanguageProfile(
    name="c",
    extensions=(".c", ".h"),
    line_comment_prefixes=("//",),
    block_comment_delims=(("/*", "*/"),),
    string_delims=(StringDelim('"', '"', "\\"),),
    char_literal_delims=StringDelim("'", "'", "\\"),
)

GO = LanguageProfile(
    name="go",
    extensions=(".go",),
    line_comment_prefixes=("//",),
    block_comment_delims=(("/*", "*/"),),
    string_delims=(StringDelim('"', '"', "\\"), StringDelim("`", "`", None, True)),
    char_literal_delims=StringDelim("'", "'", "\\"),
)

FORTRAN = LanguageProfile(
    name="fortran",
    extensions=(".f90", ".f95", ".f03", ".f08", ".f", ".for"),
    line_comment_prefixes=("!",),
    string_delims=(StringDelim("'", "'", "'"), StringDelim('"', '"', '"')),
)

OCAML = LanguageProfile(
    name="ocaml",
    extensions=(".ml", ".mli"),
    block_comment_delims=(("(*", "*)"),),
    nested_comments=True,
    string_delims=(StringDelim('"', '"', "\\", True),),
    char_literal_delims=StringDelim("'", "'", "\\"),
)


def builtin_profiles() -> list:
    return [C, GO, FORTRAN, OCAML]


def load_profiles(path: Union[str, Path]) -> list:
    """Read one profile per YAML document (JSON documents work too)."""
    with open(path, encoding="utf-8") as fh:
        return [LanguageProfile.from_dict(doc) for doc in yaml.safe_load_all(fh) if doc]


class ProfileRegistry:
    """Name and extension lookup over builtins plus optional overrides.

    A loaded profile with the same name as a builtin replaces it.
    """

    def __init__(self, profiles=None):
        self._by_name = {p.name: p for p in builtin_profiles()}
        for p in profiles or ():
            self._by_name[p.name] = p

    @classmethod
    def from_file(cls, path) -> "ProfileRegistry":
        return cls(load_profiles(path))

    def __iter__(self):
        return iter(self._by_name.values())

    def get(self, name: str) -> Optional[LanguageProfile]:
        return self._by_name.get(name.lower())

    def for_extension(self, ext: str) -> Optional[LanguageProfile]:
        ext = ext.lower()
        if not ext.startswith("."):
            ext = "." + ext
        for profile in self._by_name.values():
            if ext in profile.extensions:
                return profile
        return None

    def for_path(self, path: Union[str, Path]) -> Optional[LanguageProfile]:
        return self.for_extension(Path(path).suffix)


_default_registry = ProfileRegistry()


def get_profile(name: str) -> Optional[LanguageProfile]:
    return _default_registry.get(name)


def profile_for_extension(ext: str) -> Optional[LanguageProfile]:
    """Builtin profile owning ``ext`` (``".f90"`` or ``"f90"``), or None."""
    return _default_registry.for_extension(ext)


@dataclass
class PreprocessedSource:
    text: str
    original_line_count: int
    replaced_literals: int = 0
    removed_comment_spans: int = 0
    unterminated: list = field(default_factory=list)

    @property
    def suspect(self) -> bool:
        return bool(self.unterminated)


_INLINE_WS = re.compile(r"[ \t\f\v\r]+")


class _Scanner:
    """Single pass over the text with code / string / comment states."""

    def __init__(self, src: str, profile: LanguageProfile):
        self.src = src
        self.profile = profile
        self.lines = []  # (text, had_comment)
        self.buf = []
        self.had_comment = False
        self.literals = 0
        self.comments = 0
        self.unterminated = []
        openers = [(tok, "line", None) for tok in profile.line_comment_prefixes]
        openers += [(o, "block", c) for o, c in profile.block_comment_delims]
        openers += [(d.open, "string", d) for d in profile.string_delims]
        # longest match first so "(*" wins over "("
        self.openers = sorted(openers, key=lambda t: -len(t[0]))

    def newline(self):
        self.lines.append(("".join(self.buf), self.had_comment))
        self.buf = []
        self.had_comment = False

    def run(self):
        src, i, n = self.src, 0, len(self.src)
        while i < n:
            ch = src[i]
            if ch == "\n":
                self.newline()
                i += 1
                continue
            for tok, kind, payload in self.openers:
                if src.startswith(tok, i):
                    if kind == "line":
                        i = self.line_comment(i + len(tok))
                    elif kind == "block":
                        i = self.block_comment(i + len(tok), tok, payload)
                    else:
                        i = self.string(i + len(tok), payload)
                    break
            else:
                char = self.profile.char_literal_delims
                end = self.char_literal(i, char) if char and src.startswith(char.open, i) else -1
                if end < 0:
                    self.buf.append(ch)
                    i += 1
                else:
                    if self.profile.replace_char_literals:
                        self.buf.append(char.open + PLACEHOLDER + char.close)
                        self.literals += 1
                    else:
                        self.buf.append(src[i:end])
                    i = end
        self.newline()
        return self

    def line_comment(self, i):
        self.comments += 1
        self.had_comment = True
        end = self.src.find("\n", i)
        return len(self.src) if end < 0 else end

    def block_comment(self, i, opener, closer):
        self.comments += 1
        self.had_comment = True
        src, n = self.src, len(self.src)
        depth = 1
        while i < n:
            if src.startswith(closer, i):
                depth -= 1
                i += len(closer)
                if depth == 0:
                    # a comment separates tokens like whitespace does
                    self.buf.append(" ")
                    return i
            elif self.profile.nested_comments and src.startswith(opener, i):
                depth += 1
                i += len(opener)
            elif src[i] == "\n":
                self.newline()
                self.had_comment = True
                i += 1
            else:
                i += 1
        self.unterminated.append("comment")
        return n

    def string(self, i, delim: StringDelim):
        self.literals += 1
        self.buf.append(delim.open + PLACEHOLDER)
        src, n = self.src, len(self.src)
        doubled = delim.escape is not None and delim.escape == delim.close
        while i < n:
            if src.startswith(delim.close, i):
                if doubled and src.startswith(delim.close, i + len(delim.close)):
                    i += 2 * len(delim.close)
                    continue
                self.buf.append(delim.close)
                return i + len(delim.close)
            if not doubled and delim.escape and src.startswith(delim.escape, i):
                i += len(delim.escape) + 1
                continue
            if src[i] == "\n" and not delim.multiline:
                self.unterminated.append("string")
                return i
            i += 1
        self.unterminated.append("string")
        return n

    def char_literal(self, i, delim: StringDelim) -> int:
        """End index of a one-character literal starting at ``i``, else -1.

        Anything longer is not a literal: OCaml's ``'a`` type variables and
        stray apostrophes stay plain code.
        """
        src = self.src
        j = i + len(delim.open)
        if j >= len(src) or src[j] == "\n":
            return -1
        if delim.escape and src.startswith(delim.escape, j):
            k = j + len(delim.escape) + 1
            limit = min(len(src), j + 8)
            while k < limit and src[k] != "\n":
                if src.startswith(delim.close, k):
                    return k + len(delim.close)
                k += 1
            return -1
        if src.startswith(delim.close, j):
            return -1
        if src.startswith(delim.close, j + 1):
            return j + 1 + len(delim.close)
        return -1


def normalize_whitespace(line: str) -> str:
    return _INLINE_WS.sub(" ", line).strip()


def preprocess(src: str, profile: LanguageProfile) -> PreprocessedSource:
    """Strip comments, blank out literal contents and squeeze whitespace.

    ``puts("hello world"); // greet`` becomes ``puts("STR");``.  Newlines are
    kept; a line left empty only because its comment was removed is dropped.
    """
    scan = _Scanner(src, profile).run()
    kept = []
    for text, had_comment in scan.lines:
        text = normalize_whitespace(text)
        if text or not had_comment:
            kept.append(text)
    return PreprocessedSource(
        text="\n".join(kept),
        original_line_count=len(src.split("\n")),
        replaced_literals=scan.literals,
        removed_comment_spans=scan.comments,
        unterminated=scan.unterminated,
    )


class SourcePreprocessor(BaseEstimator, TransformerMixin):
    """Stateless transformer applying :func:`preprocess` to each text.

    Parameters
    ----------
    language : str
        Name of a builtin profile (``"c"``, ``"go"``, ``"fortran"``,
        ``"ocaml"``) or of one loaded from ``profiles_file``.
    profiles_file : str, optional
        YAML file of extra/overriding profiles.
    """

    def __init__(self, language: str = "c", profiles_file: Optional[str] = None):
        self.language = language
        self.profiles_file = profiles_file

    def _profile(self) -> LanguageProfile:
        registry = ProfileRegistry.from_file(self.profiles_file) if self.profiles_file else _default_registry
        profile = registry.get(self.language)
        if profile is None:
            raise ValueError(f"unknown language {self.language!r}")
        return profile

    def fit(self, X=None, y=None):
        self.profile_ = self._profile()
        return self

    def transform(self, X):
        profile = getattr(self, "profile_", None) or self._profile()
        return [preprocess(text, profile).text for text in check_texts(X)]

    def _more_tags(self):
        return {"stateless": True, "X_types": ["string"]}
