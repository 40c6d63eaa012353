"""Dual-phase iteration controller.

Each round alternates a refine step (the model regenerates the candidate
with all diagnostics embedded) and a feedback phase that runs the gate
sequence compile -> unit tests -> formal verification, short-circuiting on
the first failure.  Terminal outcomes follow the four-way classification:
success, round limit, premature optimality claim, declared no-benefit.
"""

from __future__ import annotations

import dataclasses
import enum
import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from . import compiler as comp
from . import llm, testing, verify
from .corpus import FunctionCase, classify_case
from .errors import MarkerNotFound, ProviderError


@dataclass
class EngineConfig:
    max_rounds: int = 20
    compile_timeout: float = 60.0
    test_timeout: float = 60.0
    verify_budget: float = 120.0
    case_wallclock: float = 1800.0
    bench_on_success: bool = True
    claim_rounds_to_stop: int = 2  # consecutive unfounded optimality claims
    use_llm_tests: bool = False  # template generator is the offline default


@dataclass
class RunContext:
    client: llm.LlmClient
    compiler_cfg: comp.CompilerConfig
    verifier_cfg: verify.VerifierConfig = field(default_factory=verify.VerifierConfig)
    engine_cfg: EngineConfig = field(default_factory=EngineConfig)
    input_spec: testing.InputSpec = field(default_factory=testing.InputSpec)
    archive_dir: Optional[Path] = None
    bench_cfg: Optional[object] = None  # bench.BenchConfig; late import below


@dataclass
class FeedbackBundle:
    self_feedback: Optional[str]
    compile_result: Optional[comp.CompileResult]
    report: Optional[comp.VectorizationReport]
    tests: Optional[testing.UnitTestResult]
    formal: Optional[verify.FormalVerdict]

    def render(self) -> str:
        parts = ["[Self-review]"]
        parts.append(self.self_feedback.strip() if self.self_feedback else "(unavailable)")
        parts.append("")
        parts.append("[Compiler]")
        if self.compile_result is None:
            parts.append("(not run)")
        elif not self.compile_result.ok:
            parts.append("compilation FAILED:")
            parts.append(self.compile_result.diagnostic.strip()[:4000])
        else:
            parts.append("compilation succeeded.")
            if self.report is not None:
                if not self.report.loops:
                    parts.append("no loop-vectorize remarks were emitted.")
                for rec in self.report.loops:
                    if rec.vectorized:
                        parts.append(f"line {rec.line} col {rec.column}: vectorized loop")
                    else:
                        parts.append(
                            f"line {rec.line} col {rec.column}: loop not vectorized: {rec.reason}"
                        )
                        for d in rec.detail:
                            parts.append(f"    detail: {d}")
        parts.append("")
        parts.append("[Verification]")
        if self.tests is None:
            parts.append("unit tests: not run (earlier gate failed or tests unavailable)")
        elif self.tests.passed:
            parts.append("unit tests: PASS")
        else:
            parts.append(f"unit tests: {self.tests.verdict.value.upper()}")
            if self.tests.witness is not None:
                w = self.tests.witness
                parts.append(
                    f"first divergence: trial {w.trial} param {w.param} "
                    f"expected {w.expected!r} actual {w.actual!r}"
                )
            if self.tests.diagnostic:
                parts.append(self.tests.diagnostic.strip()[:2000])
        if self.formal is None:
            parts.append("formal verification: not run")
        else:
            parts.append(f"formal verification: {self.formal.kind.value}")
            if self.formal.kind is not verify.VerdictKind.EQUIVALENT and self.formal.text:
                parts.append(self.formal.text.strip()[:2000])
        return "\n".join(parts)


class OutcomeKind(enum.Enum):
    SUCCESS = "success"
    FAIL_ROUND_LIMIT = "fail-round-limit"
    FAIL_PREMATURE_CLAIM = "fail-premature-claim"
    NO_BENEFIT_DECLARED = "no-benefit-declared"
    SEMANTIC_ESCAPE = "semantic-escape"  # assigned retroactively by an oracle


class Decision(enum.Enum):
    EMIT_SUCCESS = "emit-success"
    CONTINUE_REFINE = "continue-refine"
    STOP_ROUND_LIMIT = "stop-round-limit"
    STOP_PREMATURE_CLAIM = "stop-premature-claim"
    STOP_NO_BENEFIT = "stop-no-benefit"


@dataclass
class TraceEntry:
    round: int
    action: str
    compile_ok: Optional[bool] = None
    fully_vectorized: Optional[bool] = None
    tests: Optional[str] = None
    formal: Optional[str] = None
    note: str = ""

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass
class RunOutcome:
    case_id: str
    kind: OutcomeKind
    final_code: Optional[str]
    speedup: Optional[float]
    rounds_used: int
    trace: list[TraceEntry]
    ledger: dict
    tests_only: bool
    tests_degraded: bool
    category: Optional[str] = None
    stamps: dict = field(default_factory=dict)
    bench_record: Optional[dict] = None  # archived separately, not in to_dict

    def to_dict(self) -> dict:
        return {
            "case_id": self.case_id,
            "kind": self.kind.value,
            "final_code": self.final_code,
            "speedup": self.speedup,
            "rounds_used": self.rounds_used,
            "trace": [t.to_dict() for t in self.trace],
            "ledger": self.ledger,
            "tests_only": self.tests_only,
            "tests_degraded": self.tests_degraded,
            "category": self.category,
            "stamps": self.stamps,
        }


# --------------------------------------------------------------------------


def self_feedback(client: llm.LlmClient, source: str, candidate: str) -> Optional[str]:
    """Model's four-dimension review of the candidate; None on provider outage."""
    try:
        return client.complete(
            llm.PromptKind.SELF_FEEDBACK, {"source": source, "candidate": candidate}
        ).text
    except ProviderError:
        return None


def feedback_phase(
    case: FunctionCase,
    candidate: llm.CandidateCode,
    ctx: RunContext,
    suite: Optional[testing.TestSuite],
    original_ir: Optional[Path],
    workdir: Optional[Path] = None,
) -> FeedbackBundle:
    """Gate sequence for one candidate; later gates absent after a failure."""
    cfg = ctx.engine_cfg
    fb = self_feedback(ctx.client, case.source_text, candidate.text)
    prepared = testing.prepare_candidate(case, candidate.text)
    unit = case.standalone_unit(body=prepared)
    result = comp.compile_source(
        unit,
        comp.FlagsProfile.DIAGNOSE,
        ctx.compiler_cfg,
        workdir=workdir / "diagnose" if workdir else None,
        timeout=cfg.compile_timeout,
    )
    report = comp.parse_remarks(result.remarks_raw) if result.ok else None
    if report is not None:
        report.compiler_stamp = result.compiler_stamp

    tests: Optional[testing.UnitTestResult] = None
    if result.ok and suite is not None and suite.validated:
        tests = testing.run_tests(
            suite, candidate.text, case, ctx.compiler_cfg,
            timeout=cfg.test_timeout,
            workdir=workdir / "tests" if workdir else None,
        )

    formal: Optional[verify.FormalVerdict] = None
    tests_gate_ok = (tests is not None and tests.passed) or (
        result.ok and (suite is None or not suite.validated)
    )
    if result.ok and tests_gate_ok:
        if not ctx.verifier_cfg.available:
            formal = verify.UNAVAILABLE
        elif original_ir is not None:
            cand_dir = (workdir / "ir") if workdir else None
            cand_res = comp.compile_source(
                unit, comp.FlagsProfile.EMIT_IR, ctx.compiler_cfg, workdir=cand_dir,
                timeout=cfg.compile_timeout,
            )
            if cand_res.ok:
                aligned = verify.align_candidate_names(
                    cand_res.artifact_path.read_text(), case.signature.name
                )
                aligned_path = cand_res.artifact_path.with_name("candidate_aligned.ll")
                aligned_path.write_text(aligned)
                formal = verify.verify_pair(
                    original_ir, aligned_path, ctx.verifier_cfg, budget=cfg.verify_budget
                )
            else:
                formal = verify.FormalVerdict(
                    verify.VerdictKind.TOOL_ERROR, "candidate IR emission failed"
                )
    return FeedbackBundle(fb, result, report, tests, formal)


def decide(bundle: FeedbackBundle, round_no: int, ctx: RunContext) -> Decision:
    cfg = ctx.engine_cfg
    compile_ok = bundle.compile_result is not None and bundle.compile_result.ok
    vectorized = bundle.report is not None and comp.is_fully_vectorized(bundle.report)
    tests_ok = bundle.tests is not None and bundle.tests.passed
    tests_degraded = bundle.tests is None and compile_ok and bundle.formal is not None
    formal_ok = bundle.formal is not None and (
        bundle.formal.kind is verify.VerdictKind.EQUIVALENT
        or bundle.formal.text == "unavailable"  # stamped tests-only mode
    )
    if compile_ok and vectorized and (tests_ok or tests_degraded) and formal_ok:
        return Decision.EMIT_SUCCESS
    if round_no >= cfg.max_rounds:
        return Decision.STOP_ROUND_LIMIT
    return Decision.CONTINUE_REFINE


# --------------------------------------------------------------------------


def run_case(case: FunctionCase, ctx: RunContext) -> RunOutcome:
    cfg = ctx.engine_cfg
    started = time.monotonic()
    case_dir: Optional[Path] = None
    if ctx.archive_dir is not None:
        case_dir = Path(ctx.archive_dir) / case.id
        case_dir.mkdir(parents=True, exist_ok=True)

    # Tests are generated and validated once, before the iteration starts.
    suite = testing.generate_tests(
        ctx.client if cfg.use_llm_tests else None,
        case,
        ctx.compiler_cfg,
        spec=ctx.input_spec,
    )
    validation = testing.validate_suite(suite, case, ctx.compiler_cfg, timeout=cfg.test_timeout)
    tests_degraded = not validation.validated
    tests_only = not ctx.verifier_cfg.available

    # Baseline diagnostics on the original: first-round feedback and the
    # taxonomy category for reporting.
    baseline = comp.compile_source(
        case.standalone_unit(), comp.FlagsProfile.DIAGNOSE, ctx.compiler_cfg,
        workdir=case_dir / "baseline" if case_dir else None,
        timeout=cfg.compile_timeout,
    )
    baseline_report = comp.parse_remarks(baseline.remarks_raw) if baseline.ok else None
    category = None
    if baseline_report is not None and baseline_report.failures():
        cat = case.category or classify_case(baseline_report)
        category = cat.tag.value

    original_ir: Optional[Path] = None
    if ctx.verifier_cfg.available:
        ir_res = comp.compile_source(
            case.standalone_unit(), comp.FlagsProfile.EMIT_IR, ctx.compiler_cfg,
            workdir=case_dir / "baseline-ir" if case_dir else None,
            timeout=cfg.compile_timeout,
        )
        original_ir = ir_res.artifact_path if ir_res.ok else None

    initial_feedback = FeedbackBundle(None, baseline, baseline_report, None, None).render()
    stamps: dict = {}
    if tests_degraded:
        stamps["tests_degraded_reason"] = validation.reason
    if tests_only:
        stamps["tests_only"] = "verifier unavailable; formal verdicts stamped unavailable"

    trace: list[TraceEntry] = []
    candidate: Optional[llm.CandidateCode] = None
    bundle: Optional[FeedbackBundle] = None
    claim_streak = 0
    outcome_kind = OutcomeKind.FAIL_ROUND_LIMIT
    final_code: Optional[str] = None
    rounds_used = 0

    for round_no in range(1, cfg.max_rounds + 1):
        if time.monotonic() - started > cfg.case_wallclock:
            stamps["wallclock_budget_exceeded"] = True
            break
        rounds_used = round_no
        round_dir = case_dir / f"round_{round_no:02d}" if case_dir else None
        if round_dir:
            round_dir.mkdir(parents=True, exist_ok=True)
        feedback_text = bundle.render() if bundle is not None else initial_feedback

        try:
            prompt = llm.render_refine_prompt(
                case.source_text, candidate.text if candidate else "", feedback_text
            )
            response = ctx.client.complete_raw(llm.PromptKind.REFINE, prompt)
        except ProviderError as e:
            trace.append(TraceEntry(round_no, "provider-failure", note=str(e)[:200]))
            continue
        if round_dir:
            (round_dir / "response.txt").write_text(response.text)

        last_report = bundle.report if bundle is not None else baseline_report

        no_benefit = llm.find_no_benefit(response.text)
        if no_benefit is not None:
            nothing_vectorized = last_report is None or not last_report.successes()
            if nothing_vectorized:
                trace.append(TraceEntry(round_no, "no-benefit-declared", note=no_benefit))
                outcome_kind = OutcomeKind.NO_BENEFIT_DECLARED
                break
            trace.append(TraceEntry(round_no, "no-benefit-rejected", note=no_benefit))
            continue

        claimed = llm.claims_already_optimal(response.text)
        last_fully = last_report is not None and comp.is_fully_vectorized(last_report)
        if claimed and not last_fully:
            claim_streak += 1
        elif not claimed:
            claim_streak = 0

        try:
            candidate_new = llm.extract_candidate(response.text, round=round_no)
        except MarkerNotFound:
            if claimed and claim_streak >= cfg.claim_rounds_to_stop:
                trace.append(TraceEntry(round_no, "premature-claim-stop"))
                outcome_kind = OutcomeKind.FAIL_PREMATURE_CLAIM
                break
            action = "claimed-optimal" if claimed else "marker-violation"
            trace.append(TraceEntry(round_no, action))
            if not claimed and bundle is None:
                # keep initial feedback but tell the model about the format slip
                pass
            continue

        candidate = candidate_new
        if round_dir:
            (round_dir / "candidate.c").write_text(candidate.text)
        bundle = feedback_phase(case, candidate, ctx, suite, original_ir, workdir=round_dir)
        entry = TraceEntry(
            round_no,
            "refined",
            compile_ok=bundle.compile_result.ok if bundle.compile_result else None,
            fully_vectorized=(
                bundle.report is not None and comp.is_fully_vectorized(bundle.report)
            ),
            tests=bundle.tests.verdict.value if bundle.tests else None,
            formal=bundle.formal.kind.value if bundle.formal else None,
        )
        trace.append(entry)
        if round_dir:
            (round_dir / "bundle.json").write_text(json.dumps(_bundle_dict(bundle), indent=2))

        if claimed and claim_streak >= cfg.claim_rounds_to_stop and not entry.fully_vectorized:
            outcome_kind = OutcomeKind.FAIL_PREMATURE_CLAIM
            break

        decision = decide(bundle, round_no, ctx)
        if decision is Decision.EMIT_SUCCESS:
            outcome_kind = OutcomeKind.SUCCESS
            final_code = candidate.text
            break
        if decision is Decision.STOP_ROUND_LIMIT:
            outcome_kind = OutcomeKind.FAIL_ROUND_LIMIT
            break

    speedup = None
    bench_record = None
    if outcome_kind is OutcomeKind.SUCCESS and cfg.bench_on_success and final_code:
        from . import bench  # local import; bench depends on harness only

        bench_cfg = ctx.bench_cfg if ctx.bench_cfg is not None else bench.BenchConfig()
        record = bench.measure(case, final_code, ctx.compiler_cfg, bench_cfg)
        speedup = record.speedup
        bench_record = record
        if not record.checksum_match:
            stamps["checksum_mismatch_alert"] = True

    outcome = RunOutcome(
        case_id=case.id,
        kind=outcome_kind,
        final_code=final_code,
        speedup=speedup,
        rounds_used=rounds_used,
        trace=trace,
        ledger=ctx.client.ledger.snapshot(),
        tests_only=tests_only,
        tests_degraded=tests_degraded,
        category=category,
        stamps=stamps,
    )
    if bench_record is not None:
        from . import bench

        outcome.bench_record = bench.record_dict(bench_record)
    if case_dir is not None:
        (case_dir / "outcome.json").write_text(json.dumps(outcome.to_dict(), indent=2))
        if bench_record is not None:
            from . import bench

            (case_dir / "bench.json").write_text(
                json.dumps(bench.record_dict(bench_record), indent=2)
            )
    return outcome


def _bundle_dict(bundle: FeedbackBundle) -> dict:
    out: dict = {"self_feedback": bundle.self_feedback}
    if bundle.compile_result is None:
        out["compile"] = None
    else:
        out["compile"] = {
            "ok": bundle.compile_result.ok,
            "diagnostic": bundle.compile_result.diagnostic[:4000],
            "command": bundle.compile_result.command[1:],  # drop abs compiler path
        }
    if bundle.report is None:
        out["report"] = None
    else:
        out["report"] = {
            "loops": [
                {
                    "line": r.line,
                    "column": r.column,
                    "vectorized": r.vectorized,
                    "reason": r.reason,
                    "detail": r.detail,
                }
                for r in bundle.report.loops
            ],
            "leftovers": bundle.report.leftovers,
        }
    out["tests"] = None if bundle.tests is None else {
        "verdict": bundle.tests.verdict.value,
        "witness": dataclasses.asdict(bundle.tests.witness) if bundle.tests.witness else None,
    }
    out["formal"] = None if bundle.formal is None else {
        "kind": bundle.formal.kind.value,
        "text": bundle.formal.text[:4000],
    }
    return out
