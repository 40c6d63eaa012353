"""Compiler invocation and loop-vectorize remark parsing.

Three flag profiles are supported:

* ``Diagnose`` -- optimized build with loop-vectorize remarks enabled; the
  remark stream is what feeds the refine prompts.
* ``Bench`` -- optimized build of an executable harness.
* ``EmitIr`` -- textual IR with the vectorizers disabled, used as input to
  the formal equivalence checker.  Kept at -O1 so trivial source-level noise
  is normalized away without the vector passes rewriting the loops.
"""

from __future__ import annotations

import enum
import re
import shutil
import subprocess
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .errors import ToolMissing

DIAGNOSE_FLAGS = [
    "-O3",
    "-ffast-math",
    "-Rpass=loop-vectorize",
    "-Rpass-analysis=loop-vectorize",
]
BENCH_FLAGS = ["-O3", "-ffast-math"]
EMIT_IR_FLAGS = ["-O1", "-fno-vectorize", "-fno-slp-vectorize", "-S", "-emit-llvm"]


class FlagsProfile(enum.Enum):
    DIAGNOSE = "diagnose"
    BENCH = "bench"
    EMIT_IR = "emit-ir"


@dataclass
class CompilerConfig:
    executable: str = "clang"
    version_pin: Optional[str] = None
    timeout: float = 60.0
    scratch_root: Optional[Path] = None

    def resolve(self) -> str:
        path = shutil.which(self.executable)
        if path is None:
            raise ToolMissing(f"compiler executable not found: {self.executable}")
        return path

    def version_stamp(self) -> str:
        cached = getattr(self, "_stamp", None)
        if cached is not None:
            return cached
        try:
            out = subprocess.run(
                [self.resolve(), "--version"],
                capture_output=True,
                text=True,
                timeout=10,
            ).stdout
            stamp = out.splitlines()[0].strip() if out else self.executable
        except (OSError, subprocess.TimeoutExpired):
            stamp = self.executable
        object.__setattr__(self, "_stamp", stamp)
        return stamp


@dataclass
class CompileResult:
    ok: bool
    diagnostic: str
    remarks_raw: str
    artifact_path: Optional[Path]
    command: list[str]
    compiler_stamp: str = ""

    @property
    def status(self) -> str:
        return "Ok" if self.ok else "Error"


@dataclass
class LoopRecord:
    line: int
    column: int
    vectorized: bool
    reason: Optional[str] = None
    detail: list[str] = field(default_factory=list)

    @property
    def location(self) -> tuple[int, int]:
        return (self.line, self.column)


@dataclass
class VectorizationReport:
    loops: list[LoopRecord] = field(default_factory=list)
    leftovers: list[str] = field(default_factory=list)
    remark_line_count: int = 0
    compiler_stamp: str = ""

    def failures(self) -> list[LoopRecord]:
        return [r for r in self.loops if not r.vectorized]

    def successes(self) -> list[LoopRecord]:
        return [r for r in self.loops if r.vectorized]


def compile_source(
    source: str,
    profile: FlagsProfile,
    cfg: CompilerConfig,
    workdir: Optional[Path] = None,
    timeout: Optional[float] = None,
) -> CompileResult:
    """Compile ``source`` under one of the three flag profiles.

    The unit is always written as ``src.c`` inside ``workdir`` (a fresh
    scratch directory when not given) and the compiler is invoked with a
    relative path so diagnostics carry stable file names.
    """
    if not source.strip():
        raise ValueError("empty source")
    exe = cfg.resolve()
    if workdir is None:
        workdir = Path(tempfile.mkdtemp(prefix="vecpipe-", dir=cfg.scratch_root))
    workdir.mkdir(parents=True, exist_ok=True)
    src = workdir / "src.c"
    src.write_text(source)

    if profile is FlagsProfile.DIAGNOSE:
        out = workdir / "src.o"
        argv = [exe, *DIAGNOSE_FLAGS, "-c", "src.c", "-o", out.name]
    elif profile is FlagsProfile.BENCH:
        out = workdir / "prog"
        argv = [exe, *BENCH_FLAGS, "src.c", "-o", out.name, "-lm"]
    else:
        out = workdir / "src.ll"
        argv = [exe, *EMIT_IR_FLAGS, "src.c", "-o", out.name]

    try:
        proc = subprocess.run(
            argv,
            cwd=workdir,
            capture_output=True,
            text=True,
            timeout=timeout if timeout is not None else cfg.timeout,
        )
    except subprocess.TimeoutExpired:
        return CompileResult(False, "compile timeout", "", None, argv, cfg.version_stamp())
    stderr = proc.stderr or ""
    if proc.returncode != 0:
        return CompileResult(False, stderr or f"exit {proc.returncode}", stderr, None, argv, cfg.version_stamp())
    return CompileResult(True, "", stderr, out, argv, cfg.version_stamp())


_REMARK_RE = re.compile(
    r"^(?P<file>[^\s:][^:]*):(?P<line>\d+):(?P<col>\d+): remark: (?P<msg>.*?)"
    r" \[-Rpass(?P<flavor>-analysis|-missed)?=(?P<pass>[\w-]+)\]\s*$"
)
_NOT_VECTORIZED_PREFIX = "loop not vectorized: "


def parse_remarks(remarks_raw: str) -> VectorizationReport:
    """Turn the raw ``-Rpass`` diagnostic stream into per-loop records.

    Only remark lines belonging to the loop-vectorize pass are considered;
    source echo and caret lines emitted between remarks are ignored.  A
    remark line that mentions loop-vectorize but does not fit the expected
    shape is preserved verbatim in ``leftovers``.  Records are keyed by
    (line, column); the compiler repeats remarks when it peels or unrolls a
    loop, so duplicates at one location are merged, with additional failure
    reasons appended to ``detail``.
    """
    report = VectorizationReport()
    by_loc: dict[tuple[int, int], LoopRecord] = {}
    for raw_line in remarks_raw.splitlines():
        if " remark: " not in raw_line:
            continue
        m = _REMARK_RE.match(raw_line.strip())
        if m is None or m.group("pass") != "loop-vectorize":
            if "loop-vectorize" in raw_line:
                report.leftovers.append(raw_line)
                report.remark_line_count += 1
            continue
        report.remark_line_count += 1
        loc = (int(m.group("line")), int(m.group("col")))
        msg = m.group("msg")
        vectorized = msg.startswith("vectorized loop")
        if msg.startswith(_NOT_VECTORIZED_PREFIX):
            reason = msg[len(_NOT_VECTORIZED_PREFIX):]
        elif vectorized:
            reason = None
        else:
            # Rpass-analysis detail without the standard prefix.
            reason = msg

        rec = by_loc.get(loc)
        if rec is None:
            rec = LoopRecord(loc[0], loc[1], vectorized, None if vectorized else reason)
            by_loc[loc] = rec
            report.loops.append(rec)
            continue
        if vectorized and not rec.vectorized:
            # Success remark at a location previously seen as failing (peeled
            # remainder loops): success wins, old reason becomes detail.
            if rec.reason:
                rec.detail.append(rec.reason)
            rec.vectorized = True
            rec.reason = None
        elif not vectorized:
            if rec.vectorized:
                rec.detail.append(msg)
            elif reason != rec.reason and reason not in rec.detail:
                rec.detail.append(reason)
    return report


def is_fully_vectorized(
    report: VectorizationReport,
    target: Optional[set[tuple[int, int]]] = None,
) -> bool:
    """True iff every selected loop is marked vectorized.

    With no explicit selection, all loops the remarks mention are selected.
    An empty report is no evidence of vectorization and yields False.
    """
    if target is not None:
        selected = [r for r in report.loops if r.location in target]
        if len(selected) < len(target):
            return False
    else:
        selected = report.loops
    if not selected:
        return False
    return all(r.vectorized for r in selected)
