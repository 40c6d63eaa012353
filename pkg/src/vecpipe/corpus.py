"""Ingestion of candidate functions from TSVC-style single-file suites.

Function boundaries are found by brace matching from the named definition
rather than a full C parser; the suites in scope are syntactically simple
and this keeps the module dependency-free.  Each ingested case is compiled
standalone (context + function in one unit) so downstream phases can assume
compilability of the original.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from . import compiler as comp
from .errors import IoError, ParseError


class CaseOrigin(enum.Enum):
    TSVC = "tsvc"
    USER_FILE = "user-file"


class CategoryTag(enum.Enum):
    UNSAFE_DEPENDENT_MEM_OPS = "unsafe-dependent-memory-operations"
    UNIDENTIFIED_REDUCTION = "unidentified-reduction"
    UNKNOWN_ARRAY_BOUNDS = "unknown-array-bounds"
    UNKNOWN_TRIP_COUNT = "unknown-trip-count"
    UNVECTORIZABLE_INSTR = "unvectorizable-instruction"
    SWITCH_IN_LOOP = "switch-in-loop"
    OTHER = "other"


@dataclass(frozen=True)
class NonVectorizableCategory:
    tag: CategoryTag
    raw: Optional[str] = None  # preserved verbatim for OTHER


class ParamKind(enum.Enum):
    SCALAR_IN = "scalar-in"
    ARRAY_IN_OUT = "array-in-out"


@dataclass(frozen=True)
class Param:
    name: str
    kind: ParamKind
    ctype: str
    extent_symbol: Optional[str] = None  # arrays only


@dataclass(frozen=True)
class FunctionSignature:
    name: str
    return_ctype: str  # "void" or a numeric scalar type
    params: tuple[Param, ...]

    @property
    def returns_value(self) -> bool:
        return self.return_ctype != "void"

    def arrays(self) -> list[Param]:
        return [p for p in self.params if p.kind is ParamKind.ARRAY_IN_OUT]

    def call_args(self) -> str:
        return ", ".join(p.name for p in self.params)


@dataclass
class FunctionCase:
    id: str
    source_text: str
    context_text: str
    signature: FunctionSignature
    origin: CaseOrigin = CaseOrigin.TSVC
    category: Optional[NonVectorizableCategory] = None
    extra_flags: tuple[str, ...] = ()

    def standalone_unit(self, body: Optional[str] = None) -> str:
        return self.context_text.rstrip() + "\n\n" + (body or self.source_text).rstrip() + "\n"

    def resolve_extent(self, symbol: str) -> int:
        value = _macro_value(self.context_text, symbol)
        if value is None:
            raise ParseError(f"{self.id}: extent symbol {symbol!r} not defined in context")
        return value


@dataclass
class IngestionProblem:
    id: str
    kind: str  # "compile" | "parse" | "missing"
    detail: str


@dataclass
class CorpusLoad:
    cases: list[FunctionCase]
    problems: list[IngestionProblem] = field(default_factory=list)


_DEFINE_RE = re.compile(r"^\s*#\s*define\s+(\w+)\s+(.+?)\s*$", re.M)
_SCALAR_TYPES = {"float", "double", "int", "long", "unsigned", "short", "char"}


def _macro_value(context: str, symbol: str) -> Optional[int]:
    for name, repl in _DEFINE_RE.findall(context):
        if name == symbol:
            try:
                return int(eval(repl, {"__builtins__": {}}, {}))  # arithmetic macros only
            except Exception:
                return None
    return None


@dataclass
class _RawFunction:
    name: str
    header: str
    text: str
    start: int
    end: int


def _mask_comments(text: str) -> str:
    """Blank out comment text (preserving length and newlines) so structural
    scans cannot trip on punctuation inside comments."""
    out = list(text)
    i = 0
    n = len(text)
    while i < n:
        c = text[i]
        if c in "\"'":
            quote = c
            i += 1
            while i < n and text[i] != quote:
                i += 2 if text[i] == "\\" else 1
            i += 1
        elif text.startswith("//", i):
            j = text.find("\n", i)
            j = n if j < 0 else j
            for k in range(i, j):
                out[k] = " "
            i = j
        elif text.startswith("/*", i):
            j = text.find("*/", i + 2)
            j = n if j < 0 else j + 2
            for k in range(i, j):
                if out[k] != "\n":
                    out[k] = " "
            i = j
        else:
            i += 1
    return "".join(out)


def _find_functions(text: str) -> list[_RawFunction]:
    """Locate top-level function definitions by brace matching."""
    functions = []
    masked = _mask_comments(text)
    depth = 0
    i = 0
    n = len(text)
    while i < n:
        c = text[i]
        if c in "\"'":
            # skip string/char literal
            quote = c
            i += 1
            while i < n and text[i] != quote:
                i += 2 if text[i] == "\\" else 1
            i += 1
            continue
        if text.startswith("//", i):
            i = text.find("\n", i)
            i = n if i < 0 else i
            continue
        if text.startswith("/*", i):
            j = text.find("*/", i + 2)
            i = n if j < 0 else j + 2
            continue
        if c == "{":
            if depth == 0:
                header_match = _header_before(masked, i)
                if header_match is not None:
                    name, start = header_match
                    end = _match_brace(text, i)
                    if end < 0:
                        raise ParseError(f"unbalanced braces in definition of {name!r}")
                    functions.append(
                        _RawFunction(name, text[start:i], text[start : end + 1], start, end + 1)
                    )
                    i = end + 1
                    continue
            depth += 1
        elif c == "}":
            depth = max(0, depth - 1)
        i += 1
    return functions


_HEADER_RE = re.compile(r"(\w+)\s*\(([^()]*)\)\s*$", re.S)


def _header_before(masked: str, brace_pos: int) -> Optional[tuple[str, int]]:
    """If the ``{`` at ``brace_pos`` opens a function body, return the
    function name and the offset where its definition starts.

    Operates on comment-masked text so offsets are valid for the original.
    """
    head = masked[:brace_pos]
    m = _HEADER_RE.search(head)
    if m is None:
        return None
    prefix = head[: m.start(1)]
    cut = max(prefix.rfind(";"), prefix.rfind("}"))
    offset = cut + 1
    # Skip blank and preprocessor lines between the previous top-level item
    # and the return type (comment lines are already blanked).
    for line in prefix[offset:].split("\n"):
        stripped = line.strip()
        if stripped == "" or stripped.startswith("#"):
            offset += len(line) + 1
        else:
            break
    if offset >= m.start(1):
        return None
    ret = prefix[offset:].strip()
    if not ret or not re.fullmatch(r"[\w\s\*]+", ret):
        return None
    if ret.split()[0] in ("if", "for", "while", "switch", "return", "else", "do"):
        return None
    return m.group(1), offset


def _match_brace(text: str, open_pos: int) -> int:
    depth = 0
    i = open_pos
    n = len(text)
    while i < n:
        c = text[i]
        if c in "\"'":
            quote = c
            i += 1
            while i < n and text[i] != quote:
                i += 2 if text[i] == "\\" else 1
        elif text.startswith("//", i):
            j = text.find("\n", i)
            i = n if j < 0 else j
        elif text.startswith("/*", i):
            j = text.find("*/", i + 2)
            i = n if j < 0 else j + 1
        elif c == "{":
            depth += 1
        elif c == "}":
            depth -= 1
            if depth == 0:
                return i
        i += 1
    return -1


def parse_signature(header: str, context: str, case_id: str = "?") -> FunctionSignature:
    """Parse a simple C function header into the typed signature model.

    Supported parameter shapes: ``T name`` (scalar) and ``T name[SYM]``
    (in/out array with a symbolic extent that must resolve to a constant in
    the context).  Qualifiers ``const``/``restrict``/``static`` are ignored.
    """
    m = _HEADER_RE.search(header.strip())
    if m is None:
        raise ParseError(f"{case_id}: cannot parse function header: {header!r}")
    name = m.group(1)
    ret = header[: header.rfind(name)].strip()
    ret = " ".join(t for t in ret.split() if t not in ("static", "inline", "extern"))
    params: list[Param] = []
    raw_params = m.group(2).strip()
    if raw_params and raw_params != "void":
        for piece in raw_params.split(","):
            piece = piece.strip()
            tokens = [t for t in piece.replace("*", " * ").split() if t not in ("const", "restrict")]
            arr = re.fullmatch(r"([\w\s]+?)\s+(\w+)\s*\[\s*(\w+)\s*\]", " ".join(tokens))
            if arr:
                ctype, pname, extent = arr.group(1).strip(), arr.group(2), arr.group(3)
                if _macro_value(context, extent) is None:
                    raise ParseError(
                        f"{case_id}: array extent {extent!r} does not resolve to a constant"
                    )
                params.append(Param(pname, ParamKind.ARRAY_IN_OUT, ctype, extent))
                continue
            if tokens and tokens[-1].isidentifier() and len(tokens) >= 2 and "*" not in tokens:
                params.append(Param(tokens[-1], ParamKind.SCALAR_IN, " ".join(tokens[:-1])))
                continue
            raise ParseError(f"{case_id}: unsupported parameter shape: {piece!r}")
    return FunctionSignature(name, ret, tuple(params))


def load_corpus(
    path: Path,
    only: Optional[list[str]] = None,
    compiler_cfg: Optional[comp.CompilerConfig] = None,
    origin: CaseOrigin = CaseOrigin.TSVC,
) -> CorpusLoad:
    """Load function cases from a single-file suite.

    Context for every case is the file with all function definitions removed
    (includes, macros, globals).  When a compiler config is given, each case
    is compiled standalone and failures are reported in ``problems`` rather
    than silently dropped.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise IoError(f"cannot read corpus file {path}: {e}") from e
    raw = _find_functions(text)
    if not raw:
        raise ParseError(f"no function definitions found in {path}")

    context = _strip_functions(text, raw)
    load = CorpusLoad(cases=[])
    by_name = {f.name: f for f in raw}
    selected = list(by_name) if not only else only
    for name in selected:
        f = by_name.get(name)
        if f is None:
            load.problems.append(IngestionProblem(name, "missing", f"no function named {name!r} in {path}"))
            continue
        try:
            sig = parse_signature(f.header, context, case_id=name)
        except ParseError as e:
            load.problems.append(IngestionProblem(name, "parse", str(e)))
            continue
        case = FunctionCase(
            id=name,
            source_text=f.text.strip() + "\n",
            context_text=context,
            signature=sig,
            origin=origin,
        )
        if compiler_cfg is not None:
            res = comp.compile_source(
                case.standalone_unit(), comp.FlagsProfile.DIAGNOSE, compiler_cfg
            )
            if not res.ok:
                load.problems.append(IngestionProblem(name, "compile", res.diagnostic))
                continue
        load.cases.append(case)
    return load


def _strip_functions(text: str, raw: list[_RawFunction]) -> str:
    out = []
    pos = 0
    for f in sorted(raw, key=lambda r: r.start):
        out.append(text[pos : f.start])
        pos = f.end
    out.append(text[pos:])
    context = "".join(out)
    # collapse the holes left behind
    return re.sub(r"\n{3,}", "\n\n", context).strip() + "\n"


_CATEGORY_SUBSTRINGS: list[tuple[str, CategoryTag]] = [
    ("dependent memory operations", CategoryTag.UNSAFE_DEPENDENT_MEM_OPS),
    ("reduction", CategoryTag.UNIDENTIFIED_REDUCTION),
    ("array bounds", CategoryTag.UNKNOWN_ARRAY_BOUNDS),
    ("number of loop iterations", CategoryTag.UNKNOWN_TRIP_COUNT),
    ("switch", CategoryTag.SWITCH_IN_LOOP),
    ("cannot be vectorized", CategoryTag.UNVECTORIZABLE_INSTR),
]


def classify_case(report: comp.VectorizationReport) -> NonVectorizableCategory:
    """Map the first failing loop's remark reason onto the fixed taxonomy."""
    failures = report.failures()
    if not failures or failures[0].reason is None:
        raise ValueError("report has no non-vectorized loop with a reason")
    reason = failures[0].reason
    for needle, tag in _CATEGORY_SUBSTRINGS:
        if needle in reason:
            return NonVectorizableCategory(tag)
    return NonVectorizableCategory(CategoryTag.OTHER, raw=reason)
