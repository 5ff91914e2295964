"""Function-level extraction from GNU-assembler-syntax ``.s`` files.

Only three kinds of directive matter here: ``.cfi_startproc`` /
``.cfi_endproc`` delimit a procedure, ``.file`` builds the file table, and
``.loc`` attributes the following instructions to a source line.  No
instruction is ever interpreted.
"""

from __future__ import annotations

import enum
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Union


class Kind(enum.Enum):
    CFI_START = "cfi_startproc"
    CFI_END = "cfi_endproc"
    FILE = "file"
    LOC = "loc"
    LABEL = "label"
    DIRECTIVE = "directive"
    INSTRUCTION = "instruction"
    BLANK = "blank"


@dataclass(frozen=True)
class AsmLine:
    """One classified line of assembly.

    Only the fields relevant to ``kind`` are populated: ``index``/``path``
    (and ``directory`` for the DWARF 5 two-string form) for FILE,
    ``index``/``line``/``column`` for LOC, ``name`` for LABEL and DIRECTIVE.
    """

    raw: str
    kind: Kind
    name: str = ""
    index: int = -1
    path: str = ""
    directory: str = ""
    line: int = 0
    column: int = 0


class Diagnostics(Counter):
    """Tally of recoverable problems, keyed by reason.

    A plain ``Counter``; ``+`` and ``update`` merge commutatively, so tallies
    from independent workers can be combined in any order.
    """

    def merged(self, *others: "Diagnostics") -> "Diagnostics":
        out = Diagnostics(self)
        for other in others:
            out.update(other)
        return out


class ExtractionError(Exception):
    pass


class MissingSourceFile(ExtractionError):
    pass


class SpanOutOfRange(ExtractionError):
    pass


_LABEL_RE = re.compile(r'^\s*("[^"]*"|[^\s:#"]+)\s*:\s*(?:#.*)?$')
_DIRECTIVE_RE = re.compile(r"^\s*(\.[A-Za-z_][\w.]*)\b(.*)$")
_INT_RE = re.compile(r"\d+")
_ESCAPES = {"n": "\n", "t": "\t", "r": "\r", "b": "\b", "f": "\f", "\\": "\\", '"': '"'}


def _strip_comment(text: str) -> str:
    # '#' starts a comment on x86 GAS outside of string literals
    in_str = False
    escaped = False
    for i, ch in enumerate(text):
        if in_str:
            if escaped:
                escaped = False
            elif ch == "\\":
                escaped = True
            elif ch == '"':
                in_str = False
        elif ch == '"':
            in_str = True
        elif ch == "#":
            return text[:i]
    return text


def _unquote(token: str) -> str:
    """Decode a GAS string literal body (without the surrounding quotes)."""
    out = bytearray()
    i = 0
    raw = token.encode("utf-8", "surrogateescape")
    while i < len(raw):
        c = raw[i]
        if c != 0x5C or i + 1 >= len(raw):
            out.append(c)
            i += 1
            continue
        nxt = chr(raw[i + 1])
        if nxt in "01234567":
            j = i + 1
            while j < len(raw) and j < i + 4 and chr(raw[j]) in "01234567":
                j += 1
            out.append(int(raw[i + 1 : j], 8) & 0xFF)
            i = j
        elif nxt in _ESCAPES:
            out.extend(_ESCAPES[nxt].encode())
            i += 2
        else:
            out.append(raw[i + 1])
            i += 2
    return out.decode("utf-8", "replace")


def _split_strings(args: str) -> Optional[list]:
    """Return the quoted string bodies in ``args``; None if a quote is unclosed."""
    found = []
    i = 0
    while i < len(args):
        if args[i] != '"':
            i += 1
            continue
        j = i + 1
        while j < len(args):
            if args[j] == "\\":
                j += 2
                continue
            if args[j] == '"':
                break
            j += 1
        if j >= len(args):
            return None
        found.append(args[i + 1 : j])
        i = j + 1
    return found


def _classify(raw: str, diagnostics: Diagnostics) -> AsmLine:
    text = _strip_comment(raw).strip()
    if not text:
        return AsmLine(raw, Kind.BLANK)

    m = _LABEL_RE.match(text)
    if m:
        return AsmLine(raw, Kind.LABEL, name=m.group(1).strip('"'))

    m = _DIRECTIVE_RE.match(text)
    if not m:
        return AsmLine(raw, Kind.INSTRUCTION)
    name, args = m.group(1), m.group(2).strip()

    if name == ".cfi_startproc":
        return AsmLine(raw, Kind.CFI_START, name=name)
    if name == ".cfi_endproc":
        return AsmLine(raw, Kind.CFI_END, name=name)

    if name == ".file":
        head = args.split(None, 1)
        if head and head[0].startswith('"'):
            # `.file "a.c"`: the translation unit name, no table entry
            return AsmLine(raw, Kind.DIRECTIVE, name=name)
        strings = _split_strings(args)
        if not head or not head[0].isdigit() or not strings or len(strings) > 2:
            diagnostics["malformed_file_directive"] += 1
            return AsmLine(raw, Kind.INSTRUCTION)
        strings = [_unquote(s) for s in strings]
        directory, path = ("", strings[0]) if len(strings) == 1 else strings
        return AsmLine(raw, Kind.FILE, name=name, index=int(head[0]), path=path, directory=directory)

    if name == ".loc":
        parts = args.split()
        nums = []
        for part in parts[:3]:
            if not _INT_RE.fullmatch(part):
                break
            nums.append(int(part))
        if len(nums) < 2:
            diagnostics["malformed_loc_directive"] += 1
            return AsmLine(raw, Kind.INSTRUCTION)
        if nums[1] == 0:
            # line 0 marks compiler-generated code with no source line
            diagnostics["loc_line_zero"] += 1
            return AsmLine(raw, Kind.DIRECTIVE, name=name)
        column = nums[2] if len(nums) > 2 else 0
        return AsmLine(raw, Kind.LOC, name=name, index=nums[0], line=nums[1], column=column)

    return AsmLine(raw, Kind.DIRECTIVE, name=name)


def split_lines(text: Union[str, bytes]) -> list:
    if isinstance(text, bytes):
        text = text.decode("utf-8", "surrogateescape")
    if not text:
        return []
    lines = text.split("\n")
    if lines[-1] == "":
        lines.pop()
    return [ln[:-1] if ln.endswith("\r") else ln for ln in lines]


def parse_asm(text: Union[str, bytes], diagnostics: Optional[Diagnostics] = None) -> list:
    """Classify every line of an assembly file.

    The result has exactly one :class:`AsmLine` per input line.  Malformed
    ``.file``/``.loc`` arguments degrade to ``Kind.INSTRUCTION`` and are
    tallied in ``diagnostics`` when one is given.
    """
    if diagnostics is None:
        diagnostics = Diagnostics()
    return [_classify(raw, diagnostics) for raw in split_lines(text)]


def is_local_label(name: str) -> bool:
    return name.startswith(".L") or name.isdigit()


@dataclass
class RawFunction:
    label: str
    asm_lines: list
    loc_refs: list
    source_file: str
    line_span: tuple
    perforated: bool
    multi_file: bool
    start_index: int = -1
    end_index: int = -1

    @property
    def zero_loc(self) -> bool:
        return not self.loc_refs

    def asm_text(self, keep_directives: bool = False) -> str:
        """Label line plus body, whitespace-normalized, newline-joined.

        Directive lines (``.cfi_*``, ``.loc``, ...) are dropped unless
        ``keep_directives``; they would leak source line numbers.
        """
        out = []
        if self.label:
            out.append(self.label + ":")
        for raw in self.asm_lines:
            line = _classify(raw, Diagnostics())
            if line.kind is Kind.BLANK:
                continue
            if not keep_directives and line.kind in (Kind.CFI_START, Kind.CFI_END, Kind.FILE, Kind.LOC, Kind.DIRECTIVE):
                continue
            out.append(" ".join(raw.split()))
        return "\n".join(out)


def _file_table(lines: Iterable[AsmLine]) -> dict:
    table = {}
    for line in lines:
        if line.kind is Kind.FILE:
            # relative names stay relative to the compilation directory
            table[line.index] = line.path
    return table


def extract_functions(lines: list, diagnostics: Optional[Diagnostics] = None) -> list:
    """Cut balanced ``.cfi_startproc``/``.cfi_endproc`` regions into functions.

    A function's loc refs are the ``.loc`` lines inside the region plus
    prologue ones between its symbol label and ``.cfi_startproc`` (gcc and
    clang both put the first ``.loc`` there).  Unbalanced markers and loc
    refs to undeclared file indices are skipped and tallied.
    """
    if diagnostics is None:
        diagnostics = Diagnostics()
    table = _file_table(lines)

    regions = []
    open_at = None
    prev_end = -1
    for i, line in enumerate(lines):
        if line.kind is Kind.CFI_START:
            if open_at is not None:
                diagnostics["unbalanced_cfi_start"] += 1
            open_at = i
        elif line.kind is Kind.CFI_END:
            if open_at is None:
                diagnostics["unbalanced_cfi_end"] += 1
                continue
            regions.append((prev_end, open_at, i))
            prev_end = i
            open_at = None
    if open_at is not None:
        diagnostics["unbalanced_cfi_start"] += 1

    functions = []
    for floor, start, end in regions:
        label = ""
        label_at = floor + 1
        for j in range(start - 1, floor, -1):
            if lines[j].kind is Kind.LABEL and not is_local_label(lines[j].name):
                label, label_at = lines[j].name, j
                break

        refs = []
        for line in lines[label_at:end]:
            if line.kind is not Kind.LOC:
                continue
            if line.index not in table:
                diagnostics["unknown_file_index"] += 1
                continue
            refs.append((line.index, line.line))

        functions.append(_make_function(label, lines, start, end, refs, table, diagnostics))
    return functions


def _make_function(label, lines, start, end, refs, table, diagnostics) -> RawFunction:
    body = [ln.raw for ln in lines[start + 1 : end]]
    if not refs:
        diagnostics["zero_loc"] += 1
        return RawFunction(label, body, [], "", (0, 0), False, False, start, end)

    # DWARF 5 may list the same file under two indices; vote by path
    paths = {idx: table[idx] for idx, _ in refs}
    votes = Counter(paths[idx] for idx, _ in refs)
    best = max(votes.values())
    dominant_index = min(idx for idx in paths if votes[paths[idx]] == best)
    dominant = paths[dominant_index]
    covered = {ln for idx, ln in refs if paths[idx] == dominant}
    lo, hi = min(covered), max(covered)
    multi_file = len(votes) > 1
    if multi_file:
        diagnostics["multi_file"] += 1
    perforated = len(covered) != hi - lo + 1
    if perforated:
        diagnostics["perforated"] += 1
    return RawFunction(label, body, refs, dominant, (lo, hi), perforated, multi_file, start, end)


def resolve_path(source_file: str, root: Union[str, Path]) -> Path:
    p = Path(source_file)
    if p.is_absolute():
        if p.is_file():
            return p
        raise MissingSourceFile(source_file)
    candidate = Path(root) / p
    if candidate.is_file():
        return candidate
    raise MissingSourceFile(source_file)


def resolve_source(fn: RawFunction, root: Union[str, Path]) -> str:
    """Return the dominant file's lines ``line_span[0]..line_span[1]`` inclusive."""
    if not fn.source_file:
        raise MissingSourceFile("<no loc refs>")
    path = resolve_path(fn.source_file, root)
    text = path.read_text(encoding="utf-8", errors="replace")
    src_lines = text.split("\n")
    if text.endswith("\n"):
        src_lines.pop()
    lo, hi = fn.line_span
    if lo < 1 or hi > len(src_lines):
        raise SpanOutOfRange(f"{fn.source_file}:{lo}-{hi} (file has {len(src_lines)} lines)")
    return "\n".join(src_lines[lo - 1 : hi])


@dataclass
class FileExtraction:
    """Everything extracted from one ``.s`` file."""

    asm_path: str
    functions: list = field(default_factory=list)
    diagnostics: Diagnostics = field(default_factory=Diagnostics)


def extract_file(path: Union[str, Path], display_path: Optional[str] = None) -> FileExtraction:
    path = Path(path)
    diagnostics = Diagnostics()
    lines = parse_asm(path.read_bytes(), diagnostics)
    diagnostics["cfi_startproc"] += sum(1 for ln in lines if ln.kind is Kind.CFI_START)
    functions = extract_functions(lines, diagnostics)
    diagnostics["functions"] += len(functions)
    return FileExtraction(display_path or str(path), functions, diagnostics)
