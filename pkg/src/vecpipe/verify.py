"""Translation validation of candidate vs. original at the IR level.

Wraps an Alive2-style translation-validation binary invoked on two IR
files.  When no verifier is configured the pipeline runs in a degraded
tests-only mode and every verdict is stamped ``ToolError("unavailable")``
so reports stay honest.
"""

from __future__ import annotations

import enum
import re
import shutil
import subprocess
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .errors import ToolMissing


class VerdictKind(enum.Enum):
    EQUIVALENT = "equivalent"
    MISMATCH = "mismatch"
    TIMEOUT = "timeout"
    TOOL_ERROR = "tool-error"


@dataclass
class FormalVerdict:
    kind: VerdictKind
    text: str = ""  # counterexample or diagnostic, verbatim


@dataclass
class VerifierConfig:
    executable: Optional[str] = None  # None: degraded tests-only mode
    timeout: float = 120.0
    extra_args: tuple[str, ...] = ()

    @property
    def available(self) -> bool:
        return self.executable is not None and shutil.which(self.executable) is not None

    def resolve(self) -> str:
        if self.executable is None:
            raise ToolMissing("no verifier executable configured")
        path = shutil.which(self.executable)
        if path is None:
            raise ToolMissing(f"verifier executable not found: {self.executable}")
        return path


UNAVAILABLE = FormalVerdict(VerdictKind.TOOL_ERROR, "unavailable")

# Verdict markers of the translation-validation tool's textual output.
_EQUIVALENT_MARKERS = ("seems to be correct", "transformation is correct")
_MISMATCH_MARKERS = ("doesn't verify", "does not verify")
_TIMEOUT_MARKERS = ("timed out", "timeout")


def classify_tool_output(stdout: str, stderr: str, exit_status: int) -> FormalVerdict:
    """Deterministic mapping from tool output to the four-way verdict."""
    text = (stdout or "") + ("\n" + stderr if stderr else "")
    lowered = text.lower()
    if any(m in lowered for m in _MISMATCH_MARKERS):
        return FormalVerdict(VerdictKind.MISMATCH, text)
    if any(m in lowered for m in _EQUIVALENT_MARKERS):
        return FormalVerdict(VerdictKind.EQUIVALENT, text)
    if any(m in lowered for m in _TIMEOUT_MARKERS):
        return FormalVerdict(VerdictKind.TIMEOUT, text)
    return FormalVerdict(VerdictKind.TOOL_ERROR, text or f"exit {exit_status}, no output")


def align_candidate_names(ir_text: str, base_name: str) -> str:
    """Strip the candidate's ``_opt`` suffix so the verifier pairs the
    functions by name."""
    return re.sub(rf"@{re.escape(base_name)}_opt\b", f"@{base_name}", ir_text)


def verify_pair(
    original_ir: Path,
    candidate_ir: Path,
    cfg: VerifierConfig,
    budget: Optional[float] = None,
) -> FormalVerdict:
    """Run the verifier on a pre-vectorization IR pair."""
    exe = cfg.resolve()
    budget = cfg.timeout if budget is None else budget
    if budget <= 0:
        return FormalVerdict(VerdictKind.TIMEOUT, "zero verification budget")
    argv = [exe, *cfg.extra_args, str(original_ir), str(candidate_ir)]
    try:
        proc = subprocess.run(argv, capture_output=True, text=True, timeout=budget)
    except subprocess.TimeoutExpired:
        return FormalVerdict(VerdictKind.TIMEOUT, f"verifier exceeded {budget}s")
    except OSError as e:
        return FormalVerdict(VerdictKind.TOOL_ERROR, str(e))
    return classify_tool_output(proc.stdout, proc.stderr, proc.returncode)
