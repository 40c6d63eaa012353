"""Differential unit testing of original vs. candidate functions.

A suite is generated once per case and reused across all refinement rounds.
Before first use it must survive the two-step validity protocol:

1. baseline equivalence -- the original substituted into the candidate slot
   must make the suite pass;
2. sensitivity -- a deliberately wrong substitute (bitwise-negated return
   for value-returning functions, empty body for void) must make it fail.

Input generation defaults to signed ranges symmetric about zero: positive-
biased inputs are exactly how early-exit bugs slip through untested.
"""

from __future__ import annotations

import enum
import re
import struct
import subprocess
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from . import compiler as comp
from . import harness, llm
from .corpus import FunctionCase, FunctionSignature, ParamKind
from .errors import MarkerNotFound, ProviderError

DEFAULT_TRIALS = 100
DEFAULT_RANGE = (-100.0, 100.0)
REL_TOL = 1e-4
ABS_TOL = 1e-6

_SEED_STRIDE = 0x9E3779B97F4A7C15
_U64 = (1 << 64) - 1


@dataclass
class InputSpec:
    seed: int = 12345
    trials: int = DEFAULT_TRIALS
    value_ranges: dict[str, tuple[float, float]] = field(default_factory=dict)
    default_range: tuple[float, float] = DEFAULT_RANGE

    def range_for(self, param: str) -> tuple[float, float]:
        return self.value_ranges.get(param, self.default_range)


@dataclass
class TestSuite:
    harness_source: str  # candidate slot still open ({{CANDIDATE_FN}})
    input_spec: InputSpec
    slot_name: str
    validated: bool = False
    validation_note: str = ""
    generator: str = "template"  # "template" | "llm"


class Verdict(enum.Enum):
    PASS = "pass"
    FAIL = "fail"
    BUILD_FAIL = "build-fail"
    RUNTIME_CRASH = "runtime-crash"
    TIMEOUT = "timeout"


@dataclass
class Witness:
    trial: int
    param: str
    expected: float
    actual: float


@dataclass
class UnitTestResult:
    verdict: Verdict
    witness: Optional[Witness] = None
    diagnostic: str = ""

    @property
    def passed(self) -> bool:
        return self.verdict is Verdict.PASS


# --------------------------------------------------------------------------
# Source manipulation helpers


def rename_function(source: str, old: str, new: str) -> str:
    return re.sub(rf"\b{re.escape(old)}\b", new, source)


def prepare_candidate(case: FunctionCase, candidate_text: str) -> str:
    """Normalize a candidate so it defines ``<name>_opt``."""
    slot = case.signature.name + "_opt"
    if re.search(rf"\b{re.escape(slot)}\b", candidate_text):
        return candidate_text
    return rename_function(candidate_text, case.signature.name, slot)


def _body_is_empty(source: str) -> bool:
    open_brace = source.find("{")
    close_brace = source.rfind("}")
    if open_brace < 0 or close_brace <= open_brace:
        return False
    return not source[open_brace + 1 : close_brace].strip()


def _param_decl(p) -> str:
    if p.kind is ParamKind.ARRAY_IN_OUT:
        return f"{p.ctype} {p.name}[{p.extent_symbol}]"
    return f"{p.ctype} {p.name}"


def _signature_header(sig: FunctionSignature, name: str) -> str:
    params = ", ".join(_param_decl(p) for p in sig.params) or "void"
    return f"{sig.return_ctype} {name}({params})"


def make_empty_body_mutant(case: FunctionCase, slot: str) -> str:
    sig = case.signature
    silence = "".join(f" (void){p.name};" for p in sig.params)
    return f"{_signature_header(sig, slot)} {{{silence} }}\n"


_BIT_WIDTH = {"float": "uint32_t", "double": "uint64_t"}


def make_negating_mutant(case: FunctionCase, slot: str) -> str:
    """Original behavior with the return value bitwise-negated."""
    sig = case.signature
    helper = f"{sig.name}_vp_negbase"
    base = rename_function(case.source_text, sig.name, helper)
    base = re.sub(r"^(\s*)" + re.escape(sig.return_ctype), r"\1static " + sig.return_ctype, base, count=1)
    args = sig.call_args()
    ret = sig.return_ctype
    if ret in _BIT_WIDTH:
        bits = _BIT_WIDTH[ret]
        body = (
            f"    {ret} vp_r = {helper}({args});\n"
            f"    {bits} vp_u;\n"
            f"    memcpy(&vp_u, &vp_r, sizeof vp_u);\n"
            f"    vp_u = ~vp_u;\n"
            f"    memcpy(&vp_r, &vp_u, sizeof vp_r);\n"
            f"    return vp_r;\n"
        )
    else:
        body = f"    return ~{helper}({args});\n"
    return base + f"\n{_signature_header(sig, slot)} {{\n{body}}}\n"


# --------------------------------------------------------------------------
# Template-based harness generation


def _compare_policy(rel_tol: float, abs_tol: float) -> str:
    return (
        f"#define REL_TOL {rel_tol}\n"
        f"#define ABS_TOL {abs_tol}\n"
        "static int values_close(double e, double a) {\n"
        "    double d = fabs(e - a);\n"
        "    if (d <= ABS_TOL) return 1;\n"
        "    double m = fmax(fabs(e), fabs(a));\n"
        "    return d <= REL_TOL * m;\n"
        "}\n"
    )


def _trial_driver(sig: FunctionSignature, spec: InputSpec, slot: str) -> str:
    """Per-trial body: declare, fill, call both sides, compare outputs."""
    lines: list[str] = ["{"]
    ref_args, cand_args = [], []
    for p in sig.params:
        lo, hi = spec.range_for(p.name)
        if p.kind is ParamKind.ARRAY_IN_OUT:
            n = f"(long)({p.extent_symbol})"
            lines += [
                f"    static {p.ctype} {p.name}_ref[{p.extent_symbol}], {p.name}_cand[{p.extent_symbol}];",
                f"    for (long vp_i = 0; vp_i < {n}; ++vp_i) {{",
                f"        {p.name}_ref[vp_i] = ({p.ctype})prng_uniform({lo}, {hi});",
                f"        {p.name}_cand[vp_i] = {p.name}_ref[vp_i];",
                "    }",
            ]
            ref_args.append(f"{p.name}_ref")
            cand_args.append(f"{p.name}_cand")
        else:
            lines.append(f"    {p.ctype} {p.name} = ({p.ctype})prng_uniform({lo}, {hi});")
            ref_args.append(p.name)
            cand_args.append(p.name)
    call_ref = f"{sig.name}({', '.join(ref_args)})"
    call_cand = f"{slot}({', '.join(cand_args)})"
    if sig.returns_value:
        lines += [
            f"    double vp_ret_ref = (double){call_ref};",
            f"    double vp_ret_cand = (double){call_cand};",
            "    if (!values_close(vp_ret_ref, vp_ret_cand)) {",
            '        printf("TRIAL %ld PARAM return EXPECTED %.9g ACTUAL %.9g\\n",'
            " trial, vp_ret_ref, vp_ret_cand);",
            "        return 1;",
            "    }",
        ]
    else:
        lines += [f"    {call_ref};", f"    {call_cand};"]
    for p in sig.params:
        if p.kind is not ParamKind.ARRAY_IN_OUT:
            continue
        n = f"(long)({p.extent_symbol})"
        lines += [
            f"    for (long vp_i = 0; vp_i < {n}; ++vp_i)",
            f"        if (!values_close((double){p.name}_ref[vp_i], (double){p.name}_cand[vp_i])) {{",
            f'            printf("TRIAL %ld PARAM {p.name} EXPECTED %.9g ACTUAL %.9g\\n",'
            f" trial, (double){p.name}_ref[vp_i], (double){p.name}_cand[vp_i]);",
            "            return 1;",
            "        }",
        ]
    lines.append("}")
    return "\n        ".join(lines)


def make_template_suite(case: FunctionCase, spec: Optional[InputSpec] = None) -> TestSuite:
    spec = spec or InputSpec()
    slot = case.signature.name + "_opt"
    template = harness.load_template("differential")
    source = harness.instantiate(
        template,
        {
            "CONTEXT": case.context_text,
            "ORIGINAL_FN": case.source_text,
            "CANDIDATE_FN": "{{CANDIDATE_FN}}",  # left open until run time
            "SLOT_NAME": slot,
            "TRIALS": str(spec.trials),
            "SEED": str(spec.seed),
            "RANGES": _trial_driver(case.signature, spec, slot),
            "COMPARE_POLICY": _compare_policy(REL_TOL, ABS_TOL),
        },
    )
    return TestSuite(source, spec, slot, generator="template")


def generate_tests(
    client: Optional[llm.LlmClient],
    case: FunctionCase,
    compiler_cfg: comp.CompilerConfig,
    spec: Optional[InputSpec] = None,
    attempts: int = 3,
) -> TestSuite:
    """Generate the differential suite for a case, once.

    With an LLM client, up to ``attempts`` generated harnesses are tried;
    each must compile against the original before being accepted.  On
    exhaustion (or with no client) the deterministic template generator is
    used instead.
    """
    spec = spec or InputSpec()
    slot = case.signature.name + "_opt"
    if client is not None:
        slots = {
            "name": case.signature.name,
            "slot_name": slot,
            "trials": spec.trials,
            "rel_tol": REL_TOL,
            "abs_tol": ABS_TOL,
            "candidate_slot": "{{CANDIDATE_FN}}",
            "context": case.context_text,
            "source": case.source_text,
            "begin": llm.BEGIN_MARKER,
            "end": llm.END_MARKER,
        }
        for _ in range(attempts):
            try:
                response = client.complete(llm.PromptKind.TEST_GENERATION, slots)
                body = llm.extract_candidate(response.text).text
            except (ProviderError, MarkerNotFound):
                continue
            if "{{CANDIDATE_FN}}" not in body:
                continue
            suite = TestSuite(body, spec, slot, generator="llm")
            baseline = rename_function(case.source_text, case.signature.name, slot)
            probe = suite.harness_source.replace("{{CANDIDATE_FN}}", baseline)
            if comp.compile_source(probe, comp.FlagsProfile.BENCH, compiler_cfg).ok:
                return suite
    return make_template_suite(case, spec)


# --------------------------------------------------------------------------
# Execution


_WITNESS_RE = re.compile(
    r"^TRIAL (\d+) PARAM (\S+) EXPECTED (\S+) ACTUAL (\S+)\s*$", re.M
)


def _execute(
    suite: TestSuite,
    candidate_fn: str,
    case: FunctionCase,
    compiler_cfg: comp.CompilerConfig,
    timeout: float,
    workdir: Optional[Path] = None,
    argv_extra: tuple[str, ...] = (),
) -> UnitTestResult:
    source = suite.harness_source.replace("{{CANDIDATE_FN}}", candidate_fn)
    result = comp.compile_source(source, comp.FlagsProfile.BENCH, compiler_cfg, workdir=workdir)
    if not result.ok:
        return UnitTestResult(Verdict.BUILD_FAIL, diagnostic=result.diagnostic)
    try:
        proc = subprocess.run(
            [str(result.artifact_path), *argv_extra],
            capture_output=True,
            text=True,
            timeout=timeout,
        )
    except subprocess.TimeoutExpired:
        return UnitTestResult(Verdict.TIMEOUT, diagnostic=f"no verdict within {timeout}s")
    if proc.returncode == 0:
        return UnitTestResult(Verdict.PASS)
    if proc.returncode == 1:
        m = _WITNESS_RE.search(proc.stdout or "")
        witness = None
        if m:
            witness = Witness(int(m.group(1)), m.group(2), float(m.group(3)), float(m.group(4)))
        return UnitTestResult(Verdict.FAIL, witness=witness, diagnostic=proc.stdout)
    return UnitTestResult(
        Verdict.RUNTIME_CRASH,
        diagnostic=f"exit {proc.returncode}; stderr: {(proc.stderr or '')[:500]}",
    )


def run_tests(
    suite: TestSuite,
    candidate_text: str,
    case: FunctionCase,
    compiler_cfg: comp.CompilerConfig,
    timeout: float = 60.0,
    workdir: Optional[Path] = None,
) -> UnitTestResult:
    candidate_fn = prepare_candidate(case, candidate_text)
    return _execute(suite, candidate_fn, case, compiler_cfg, timeout, workdir)


def replay_witness(
    suite: TestSuite,
    candidate_text: str,
    case: FunctionCase,
    compiler_cfg: comp.CompilerConfig,
    trial: int,
    timeout: float = 60.0,
) -> UnitTestResult:
    """Re-run a single trial; a real divergence witness must still fail."""
    candidate_fn = prepare_candidate(case, candidate_text)
    return _execute(
        suite, candidate_fn, case, compiler_cfg, timeout, argv_extra=(str(trial),)
    )


@dataclass
class ValidationResult:
    validated: bool
    reason: str = ""


def validate_suite(
    suite: TestSuite,
    case: FunctionCase,
    compiler_cfg: comp.CompilerConfig,
    timeout: float = 60.0,
) -> ValidationResult:
    """Two-step validity protocol; sets ``suite.validated`` on success."""
    slot = suite.slot_name
    baseline = rename_function(case.source_text, case.signature.name, slot)
    step1 = _execute(suite, baseline, case, compiler_cfg, timeout)
    if not step1.passed:
        return _finish(suite, False, f"baseline equivalence failed: {step1.verdict.value}")

    if _body_is_empty(case.source_text):
        # Sensitivity cannot distinguish an empty original from its empty
        # mutant; documented exclusion, accepted on baseline alone.
        return _finish(suite, True, "sensitivity step excluded: original has empty body")

    if case.signature.returns_value:
        mutant = make_negating_mutant(case, slot)
    else:
        mutant = make_empty_body_mutant(case, slot)
    step2 = _execute(suite, mutant, case, compiler_cfg, timeout)
    if step2.verdict is not Verdict.FAIL:
        return _finish(
            suite, False, f"sensitivity check failed: mutant verdict {step2.verdict.value}"
        )
    return _finish(suite, True, "")


def _finish(suite: TestSuite, ok: bool, reason: str) -> ValidationResult:
    suite.validated = ok
    suite.validation_note = reason
    return ValidationResult(ok, reason)


# --------------------------------------------------------------------------
# Python mirror of the harness PRNG (used to audit witnesses)


def _xorshift64(state: int) -> int:
    state &= _U64
    state ^= (state << 13) & _U64
    state ^= state >> 7
    state ^= (state << 17) & _U64
    return state


def replay_inputs(case: FunctionCase, spec: InputSpec, trial: int) -> dict[str, object]:
    """Reproduce the inputs the harness generated for one trial."""
    state = (spec.seed + _SEED_STRIDE * (trial + 1)) & _U64
    if state == 0:
        state = _SEED_STRIDE

    def draw(lo: float, hi: float) -> float:
        nonlocal state
        state = _xorshift64(state)
        return lo + (hi - lo) * ((state >> 11) / 9007199254740992.0)

    out: dict[str, object] = {}
    for p in case.signature.params:
        lo, hi = spec.range_for(p.name)
        if p.kind is ParamKind.ARRAY_IN_OUT:
            n = case.resolve_extent(p.extent_symbol)
            values = [_cast(p.ctype, draw(lo, hi)) for _ in range(n)]
            out[p.name] = values
        else:
            out[p.name] = _cast(p.ctype, draw(lo, hi))
    return out


def _cast(ctype: str, v: float):
    if ctype == "float":
        return struct.unpack("f", struct.pack("f", v))[0]
    if ctype == "double":
        return v
    return int(v)  # C casts truncate toward zero, as int() does
