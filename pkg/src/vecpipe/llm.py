"""Provider-agnostic chat-completion client.

Two providers exist: a thin HTTP client speaking the standard
chat-completions wire format, and a transcript-replay provider that makes
full pipeline runs bit-reproducible offline.  Every completion updates the
run's token/cost ledger atomically.
"""

from __future__ import annotations

import enum
import json
import os
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import requests

from .errors import (
    MarkerNotFound,
    PromptTooLarge,
    ProviderError,
    SlotMissing,
    TranscriptExhausted,
)

# Fixed, unlikely-collision framing markers for generated code.  These are
# part of the wire contract with the model and must stay bit-exact.
BEGIN_MARKER = "// VECTRANS_BEGIN"
END_MARKER = "// VECTRANS_END"
NO_BENEFIT_MARKER = "// VECTRANS_NO_BENEFIT:"
ALREADY_OPTIMAL_MARKER = "// VECTRANS_ALREADY_OPTIMAL"


class PromptKind(enum.Enum):
    SELF_FEEDBACK = "self-feedback"
    REFINE = "refine"
    TEST_GENERATION = "test-generation"


@dataclass
class LlmConfig:
    provider: str = "replay"  # "http" | "replay"
    endpoint: Optional[str] = None
    transcript_path: Optional[Path] = None
    model_name: str = "offline"
    max_tokens: int = 4096
    sampling: dict = field(default_factory=dict)  # passed through untouched
    api_key_env: str = "VECPIPE_API_KEY"
    max_prompt_chars: int = 60_000
    retries: int = 3
    backoff_base: float = 1.0
    record_path: Optional[Path] = None

    def __post_init__(self):
        if self.max_tokens <= 0:
            raise ValueError("max_tokens must be positive")


@dataclass
class CostLedger:
    input_tokens: int = 0
    output_tokens: int = 0
    price_in_per_million: float = 0.27
    price_out_per_million: float = 1.10

    def __post_init__(self):
        self._lock = threading.Lock()

    def add(self, usage_in: int, usage_out: int) -> None:
        with self._lock:
            self.input_tokens += usage_in
            self.output_tokens += usage_out

    @property
    def cost(self) -> float:
        return (
            self.input_tokens * self.price_in_per_million / 1e6
            + self.output_tokens * self.price_out_per_million / 1e6
        )

    def snapshot(self) -> dict:
        return {
            "input_tokens": self.input_tokens,
            "output_tokens": self.output_tokens,
            "cost": self.cost,
        }


@dataclass
class Completion:
    text: str
    usage_in: int
    usage_out: int


# --------------------------------------------------------------------------
# Prompt templates

_TRANSFORMATION_CATALOG = f"""\
Known transformations that have unlocked auto-vectorization before:
- Loop Splitting: decompose one loop into independent sub-loops; the go-to
  move for breaking false loop-carried dependencies.
- Instruction Reordering / Loop Reordering: reorder statements or loop
  nesting to eliminate false dependencies and improve locality.
- Temporary Variables: hold recurring loads (especially array elements that
  are read and written in the same loop) in short-lived scalars.
- Branch Elimination: replace switch/if control flow with arithmetic
  selection; use sparingly, it can add redundant work.
Simple applicability patterns:
- instruction splitting: requires independence between the instructions.
- iteration range splitting: applicable when the loop exhibits
  phase-dependent behavior over its index range.

Output rules (strict):
- Emit ONLY the rewritten function, nothing else, between two lines that
  read exactly `{BEGIN_MARKER}` and `{END_MARKER}`.
- Keep the function name and signature unchanged, or append `_opt` to the
  name; plain portable C only, no intrinsics.
- If you judge that forcing vectorization would bring no performance
  benefit, emit instead a single line `{NO_BENEFIT_MARKER} <reason>`.
- If you judge the current candidate is already fully optimized, emit a
  single line `{ALREADY_OPTIMAL_MARKER}`.
"""

REFINE_TEMPLATE = """\
You are refactoring a scalar C function so that the compiler's
auto-vectorizer accepts it.  Do not vectorize by hand and do not use
intrinsics; produce portable C that the compiler can vectorize itself.

Original function:
```c
{source}
```

Current candidate:
```c
{candidate}
```

Diagnostics gathered for the current candidate:
{feedback}

""" + _TRANSFORMATION_CATALOG

SELF_FEEDBACK_TEMPLATE = """\
Review the candidate rewrite of a C function along four dimensions and
report findings for each, numbered:
1. Lexical correctness: tokenization-level mistakes.
2. Syntactic validity: does it parse as C?
3. Semantic equivalence: mentally execute representative inputs and compare
   against the original; call out any divergence.
4. Vectorization potential: which loops can the compiler vectorize as
   written, and what still blocks full vectorization?

Original function:
```c
{source}
```

Candidate:
```c
{candidate}
```
"""

TEST_GENERATION_TEMPLATE = """\
Write a self-contained C program that differentially tests two versions of
the function below: the original `{name}` and a candidate `{slot_name}`
with the identical signature.  The program must:
- generate {trials} trials of seeded pseudo-random inputs covering signed
  value ranges,
- call both versions on identical inputs,
- compare every observable output (return value and every array argument)
  with relative tolerance {rel_tol} and absolute floor {abs_tol},
- exit 0 when all trials agree; on the first divergence print one line
  `TRIAL <n> PARAM <name> EXPECTED <v> ACTUAL <v>` and exit 1.
Do not define `{slot_name}` yourself; leave the marker `{candidate_slot}`
on its own line where it should be pasted.

Context needed to compile the function:
```c
{context}
```

Function under test:
```c
{source}
```

Emit ONLY the program between two lines reading exactly `{begin}` and
`{end}`.
"""

_TEMPLATES = {
    PromptKind.REFINE: REFINE_TEMPLATE,
    PromptKind.SELF_FEEDBACK: SELF_FEEDBACK_TEMPLATE,
    PromptKind.TEST_GENERATION: TEST_GENERATION_TEMPLATE,
}

_REQUIRED_SLOTS = {
    PromptKind.REFINE: {"source", "candidate", "feedback"},
    PromptKind.SELF_FEEDBACK: {"source", "candidate"},
    PromptKind.TEST_GENERATION: {
        "name", "slot_name", "trials", "rel_tol", "abs_tol",
        "candidate_slot", "context", "source", "begin", "end",
    },
}


def render_prompt(kind: PromptKind, slots: dict) -> str:
    missing = _REQUIRED_SLOTS[kind] - slots.keys()
    if missing:
        raise SlotMissing(f"{kind.value} prompt missing slots: {sorted(missing)}")
    return _TEMPLATES[kind].format(**slots)


def render_refine_prompt(source: str, candidate: str, feedback: str) -> str:
    if not feedback.strip():
        raise ValueError("feedback rendering must be non-empty")
    return render_prompt(
        PromptKind.REFINE,
        {
            "source": source,
            "candidate": candidate.strip() or "(none yet)",
            "feedback": feedback,
        },
    )


# --------------------------------------------------------------------------
# Candidate extraction


@dataclass
class CandidateCode:
    text: str
    round: int = 0


def extract_candidate(llm_text: str, round: int = 0) -> CandidateCode:
    """Return the text between the first begin/end marker pair.

    Tolerant of surrounding prose and of the markers being embedded in
    fenced code blocks; the markers must each sit on their own line.
    """
    lines = llm_text.splitlines()
    begin = end = None
    for i, line in enumerate(lines):
        stripped = line.strip()
        if begin is None and stripped == BEGIN_MARKER:
            begin = i
        elif begin is not None and stripped == END_MARKER:
            end = i
            break
    if begin is None or end is None:
        raise MarkerNotFound(
            f"response does not contain a {BEGIN_MARKER} / {END_MARKER} pair"
        )
    return CandidateCode("\n".join(lines[begin + 1 : end]).strip() + "\n", round)


def find_no_benefit(llm_text: str) -> Optional[str]:
    for line in llm_text.splitlines():
        stripped = line.strip()
        if stripped.startswith(NO_BENEFIT_MARKER):
            return stripped[len(NO_BENEFIT_MARKER):].strip()
    return None


def claims_already_optimal(llm_text: str) -> bool:
    return any(line.strip() == ALREADY_OPTIMAL_MARKER for line in llm_text.splitlines())


# --------------------------------------------------------------------------
# Providers


class ReplayProvider:
    """Plays back a recorded transcript in order.

    Transcript format: JSON list of
    ``{"expected_prompt_kind", "response_text", "usage_in", "usage_out"}``.
    """

    def __init__(self, path: Path):
        try:
            self.entries = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise ProviderError(f"cannot load transcript {path}: {e}") from e
        self.cursor = 0

    def complete(self, kind: PromptKind, prompt: str) -> Completion:
        if self.cursor >= len(self.entries):
            raise TranscriptExhausted(
                f"transcript exhausted after {self.cursor} entries (next: {kind.value})"
            )
        entry = self.entries[self.cursor]
        expected = entry.get("expected_prompt_kind")
        if expected is not None and expected != kind.value:
            raise ProviderError(
                f"transcript entry {self.cursor} expects {expected!r}, got {kind.value!r}"
            )
        self.cursor += 1
        return Completion(
            entry["response_text"],
            int(entry.get("usage_in", 0)),
            int(entry.get("usage_out", 0)),
        )


class HttpProvider:
    """Standard chat-completions endpoint client with bounded retries."""

    def __init__(self, cfg: LlmConfig):
        if not cfg.endpoint:
            raise ProviderError("http provider requires an endpoint URL")
        self.cfg = cfg

    def complete(self, kind: PromptKind, prompt: str) -> Completion:
        cfg = self.cfg
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(cfg.api_key_env, "")
        if key:
            headers["Authorization"] = f"Bearer {key}"
        payload = {
            "model": cfg.model_name,
            "messages": [{"role": "user", "content": prompt}],
            "max_tokens": cfg.max_tokens,
            **cfg.sampling,
        }
        last: Optional[Exception] = None
        for attempt in range(cfg.retries + 1):
            try:
                resp = requests.post(cfg.endpoint, json=payload, headers=headers, timeout=300)
                resp.raise_for_status()
                body = resp.json()
                text = body["choices"][0]["message"]["content"]
                usage = body.get("usage", {})
                return Completion(
                    text,
                    int(usage.get("prompt_tokens", 0)),
                    int(usage.get("completion_tokens", 0)),
                )
            except (requests.RequestException, KeyError, ValueError, IndexError) as e:
                last = e
                if attempt < cfg.retries:
                    time.sleep(cfg.backoff_base * (2 ** attempt))
        raise ProviderError(f"provider failed after {self.cfg.retries + 1} attempts: {last}")


class LlmClient:
    """Completion front end: template rendering, budget check, ledger, record."""

    def __init__(self, cfg: LlmConfig, ledger: Optional[CostLedger] = None):
        self.cfg = cfg
        self.ledger = ledger if ledger is not None else CostLedger()
        if cfg.provider == "replay":
            if cfg.transcript_path is None:
                raise ProviderError("replay provider requires transcript_path")
            self.provider = ReplayProvider(cfg.transcript_path)
        elif cfg.provider == "http":
            self.provider = HttpProvider(cfg)
        else:
            raise ProviderError(f"unknown provider {cfg.provider!r}")
        self._recorded: list[dict] = []

    def complete(self, kind: PromptKind, slots: dict) -> Completion:
        prompt = render_prompt(kind, slots)
        return self.complete_raw(kind, prompt)

    def complete_raw(self, kind: PromptKind, prompt: str) -> Completion:
        if len(prompt) > self.cfg.max_prompt_chars:
            raise PromptTooLarge(
                f"prompt is {len(prompt)} chars, budget {self.cfg.max_prompt_chars}"
            )
        result = self.provider.complete(kind, prompt)
        self.ledger.add(result.usage_in, result.usage_out)
        if self.cfg.record_path is not None:
            self._recorded.append(
                {
                    "expected_prompt_kind": kind.value,
                    "response_text": result.text,
                    "usage_in": result.usage_in,
                    "usage_out": result.usage_out,
                }
            )
            Path(self.cfg.record_path).write_text(json.dumps(self._recorded, indent=2))
        return result
