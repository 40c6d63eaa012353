"""Performance measurement and run reporting.

Timing uses the checksum-protected harness template: per side, one warmup
plus a fixed number of timed repetitions of an inner repeat loop, medians
reported.  Speedups are only ever compared directionally; absolute numbers
are hardware-specific by nature.
"""

from __future__ import annotations

import json
import math
import platform
import statistics
import subprocess
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from . import compiler as comp
from . import harness, testing
from .corpus import FunctionCase, ParamKind
from .engine import OutcomeKind, RunOutcome
from .errors import IoError, SchemaMismatch

SCHEMA_VERSION = 1

# Co-running benchmarks corrupt timings; runs are serialized process-wide.
_TIMING_LOCK = threading.Lock()


@dataclass
class BenchConfig:
    timed_reps: int = 5
    inner_repeats: int = 50
    seed: int = 424242
    timeout: float = 120.0
    checksum_rel_tol: float = 1e-4


@dataclass
class BenchRecord:
    case_id: str
    t_original: float  # seconds, median per call
    t_candidate: float
    speedup: float
    checksum_match: bool
    checksum_original: float
    checksum_candidate: float
    host: dict
    compiler_stamp: str
    build_fail: bool = False
    diagnostic: str = ""


def host_description() -> dict:
    cpu = platform.processor() or platform.machine()
    isa = []
    try:
        flags = Path("/proc/cpuinfo").read_text()
        model = next(
            (l.split(":", 1)[1].strip() for l in flags.splitlines() if l.startswith("model name")),
            None,
        )
        if model:
            cpu = model
        for feature in ("avx512f", "avx2", "avx", "sse4_2", "asimd", "sve"):
            if feature in flags:
                isa.append(feature)
    except OSError:
        pass
    return {"cpu": cpu, "isa": isa, "machine": platform.machine()}


def _timing_driver(case: FunctionCase, cfg: BenchConfig, slot: str) -> str:
    sig = case.signature
    lines: list[str] = [f"enum {{ VP_REPS = {cfg.timed_reps}, VP_INNER = {cfg.inner_repeats} }};"]
    orig_args, cand_args = [], []
    fill = []
    for p in sig.params:
        if p.kind is ParamKind.ARRAY_IN_OUT:
            lines.append(
                f"static _Alignas(64) {p.ctype} {p.name}_orig[{p.extent_symbol}], "
                f"{p.name}_cand[{p.extent_symbol}];"
            )
            fill += [
                f"        for (long vp_i = 0; vp_i < (long)({p.extent_symbol}); ++vp_i)",
                f"            {p.name}_orig[vp_i] = {p.name}_cand[vp_i] = "
                f"({p.ctype})prng_uniform(-100.0, 100.0);",
            ]
            orig_args.append(f"{p.name}_orig")
            cand_args.append(f"{p.name}_cand")
        else:
            lines.append(f"static {p.ctype} {p.name};")
            fill.append(f"        {p.name} = ({p.ctype})prng_uniform(-100.0, 100.0);")
            orig_args.append(p.name)
            cand_args.append(p.name)
    call_orig = f"{sig.name}({', '.join(orig_args)})"
    call_cand = f"{slot}({', '.join(cand_args)})"
    ret_reset = []
    ret_extra = ""
    if sig.returns_value:
        lines.append("static double vp_ret_sum;")
        call_orig = f"vp_ret_sum += (double){call_orig}"
        call_cand = f"vp_ret_sum += (double){call_cand}"
        ret_reset = ["        vp_ret_sum = 0.0;"]
        ret_extra = " + vp_ret_sum"

    def checksum(args: list[str]) -> list[str]:
        body = ["        double vp_c = 0.0;"]
        for p, arg in zip(sig.params, args):
            if p.kind is ParamKind.ARRAY_IN_OUT:
                body += [
                    f"        for (long vp_i = 0; vp_i < (long)({p.extent_symbol}); ++vp_i)",
                    f"            vp_c += (double){arg}[vp_i];",
                ]
        body.append(f"        vp_checksum[vp_side] = vp_c{ret_extra};")
        return body

    lines += [
        "static double vp_times[2][VP_REPS];",
        "static double vp_checksum[2];",
        "for (int vp_side = 0; vp_side < 2; ++vp_side) {",
        "    for (int vp_rep = -1; vp_rep < VP_REPS; ++vp_rep) {",
        f"        prng_seed({cfg.seed}ULL);",
        *ret_reset,
        *fill,
        "        double vp_t0 = now_sec();",
        "        for (long vp_r = 0; vp_r < VP_INNER; ++vp_r) {",
        f"            if (vp_side == 0) {{ {call_orig}; }} else {{ {call_cand}; }}",
        "            memory_fence();",
        "        }",
        "        double vp_t1 = now_sec();",
        "        if (vp_rep >= 0) vp_times[vp_side][vp_rep] = (vp_t1 - vp_t0) / VP_INNER;",
        "    }",
        "    if (vp_side == 0) {",
        *checksum(orig_args),
        "    } else {",
        *checksum(cand_args),
        "    }",
        "}",
        "for (int vp_rep = 0; vp_rep < VP_REPS; ++vp_rep)",
        '    printf("ORIG_TIME %.9e\\n", vp_times[0][vp_rep]);',
        "for (int vp_rep = 0; vp_rep < VP_REPS; ++vp_rep)",
        '    printf("CAND_TIME %.9e\\n", vp_times[1][vp_rep]);',
        'printf("ORIG_CHECKSUM %.17g\\n", vp_checksum[0]);',
        'printf("CAND_CHECKSUM %.17g\\n", vp_checksum[1]);',
    ]
    return "\n    ".join(lines)


def build_timing_harness(case: FunctionCase, candidate_text: str, cfg: BenchConfig) -> str:
    slot = case.signature.name + "_opt"
    prepared = testing.prepare_candidate(case, candidate_text)
    template = harness.load_template("timing")
    return harness.instantiate(
        template,
        {
            "CONTEXT": case.context_text,
            "ORIGINAL_FN": case.source_text,
            "CANDIDATE_FN": prepared,
            "SLOT_NAME": slot,
            "TRIALS": str(cfg.timed_reps),
            "SEED": str(cfg.seed),
            "RANGES": _timing_driver(case, cfg, slot),
            "COMPARE_POLICY": "",
        },
    )


def measure(
    case: FunctionCase,
    final_code: str,
    compiler_cfg: comp.CompilerConfig,
    cfg: Optional[BenchConfig] = None,
    workdir: Optional[Path] = None,
) -> BenchRecord:
    cfg = cfg or BenchConfig()
    source = build_timing_harness(case, final_code, cfg)
    host = host_description()
    result = comp.compile_source(source, comp.FlagsProfile.BENCH, compiler_cfg, workdir=workdir)
    if not result.ok:
        return BenchRecord(
            case.id, 0.0, 0.0, 0.0, False, 0.0, 0.0, host, result.compiler_stamp,
            build_fail=True, diagnostic=result.diagnostic,
        )
    try:
        with _TIMING_LOCK:
            proc = subprocess.run(
                [str(result.artifact_path)], capture_output=True, text=True, timeout=cfg.timeout
            )
    except subprocess.TimeoutExpired:
        return BenchRecord(
            case.id, 0.0, 0.0, 0.0, False, 0.0, 0.0, host, result.compiler_stamp,
            build_fail=True, diagnostic="timing run exceeded budget",
        )
    if proc.returncode != 0:
        return BenchRecord(
            case.id, 0.0, 0.0, 0.0, False, 0.0, 0.0, host, result.compiler_stamp,
            build_fail=True, diagnostic=f"timing run crashed: exit {proc.returncode}",
        )
    t_orig, t_cand, cs = _parse_timing_output(proc.stdout)
    speedup = t_orig / t_cand if t_cand > 0 else 0.0
    cs_o, cs_c = cs
    denom = max(abs(cs_o), abs(cs_c), 1e-300)
    match = abs(cs_o - cs_c) <= cfg.checksum_rel_tol * denom or abs(cs_o - cs_c) <= 1e-6
    return BenchRecord(
        case.id, t_orig, t_cand, speedup, match, cs_o, cs_c, host, result.compiler_stamp
    )


def _parse_timing_output(stdout: str) -> tuple[float, float, tuple[float, float]]:
    orig, cand = [], []
    cs = [0.0, 0.0]
    for line in stdout.splitlines():
        parts = line.split()
        if len(parts) != 2:
            continue
        tag, value = parts
        if tag == "ORIG_TIME":
            orig.append(float(value))
        elif tag == "CAND_TIME":
            cand.append(float(value))
        elif tag == "ORIG_CHECKSUM":
            cs[0] = float(value)
        elif tag == "CAND_CHECKSUM":
            cs[1] = float(value)
    if not orig or not cand:
        raise ValueError("timing harness produced no measurements")
    return statistics.median(orig), statistics.median(cand), (cs[0], cs[1])


# --------------------------------------------------------------------------
# Aggregation


def geomean(values: list[float]) -> float:
    """exp(mean(log v)); empty input is an error, never a silent 1.0."""
    if not values:
        raise ValueError("geomean of empty list")
    if any(v <= 0 for v in values):
        raise ValueError("geomean requires strictly positive values")
    return math.exp(statistics.fmean(math.log(v) for v in values))


@dataclass
class CoverageReport:
    attempted: int
    vectorized: int
    coverage: float
    per_category: dict[str, int]
    geomean_speedup: Optional[float]
    geomean_note: str
    mean_rounds: Optional[float]
    mean_rounds_success: Optional[float]
    total_cost: float
    failure_taxonomy: dict[str, int]
    integrity_flag: bool = False

    def to_dict(self) -> dict:
        return {
            "attempted": self.attempted,
            "vectorized": self.vectorized,
            "coverage": self.coverage,
            "per_category": self.per_category,
            "geomean_speedup": self.geomean_speedup,
            "geomean_note": self.geomean_note,
            "mean_rounds": self.mean_rounds,
            "mean_rounds_success": self.mean_rounds_success,
            "total_cost": self.total_cost,
            "failure_taxonomy": self.failure_taxonomy,
            "integrity_flag": self.integrity_flag,
        }


def record_dict(r: BenchRecord) -> dict:
    return {
        "case_id": r.case_id,
        "t_original": r.t_original,
        "t_candidate": r.t_candidate,
        "speedup": r.speedup,
        "checksum_match": r.checksum_match,
        "checksum_original": r.checksum_original,
        "checksum_candidate": r.checksum_candidate,
        "host": r.host,
        "compiler_stamp": r.compiler_stamp,
        "build_fail": r.build_fail,
        "diagnostic": r.diagnostic,
    }


def record_from_dict(d: dict) -> BenchRecord:
    return BenchRecord(**d)


def aggregate(outcomes: list[RunOutcome], records: list[BenchRecord]) -> CoverageReport:
    attempted = len(outcomes)
    successes = [o for o in outcomes if o.kind is OutcomeKind.SUCCESS]
    per_category: dict[str, int] = {}
    for o in outcomes:
        if o.category:
            per_category[o.category] = per_category.get(o.category, 0) + 1
    taxonomy = {
        "round_limit": sum(1 for o in outcomes if o.kind is OutcomeKind.FAIL_ROUND_LIMIT),
        "premature_claim": sum(
            1 for o in outcomes if o.kind is OutcomeKind.FAIL_PREMATURE_CLAIM
        ),
        "no_benefit": sum(1 for o in outcomes if o.kind is OutcomeKind.NO_BENEFIT_DECLARED),
        "semantic_escape": sum(1 for o in outcomes if o.kind is OutcomeKind.SEMANTIC_ESCAPE),
        "provider_failures": sum(
            sum(1 for t in o.trace if t.action == "provider-failure") for o in outcomes
        ),
        "format_violations": sum(
            sum(1 for t in o.trace if t.action == "marker-violation") for o in outcomes
        ),
    }
    by_id = {r.case_id: r for r in records}
    usable = [
        by_id[o.case_id].speedup
        for o in successes
        if o.case_id in by_id and by_id[o.case_id].checksum_match and by_id[o.case_id].speedup > 0
    ]
    integrity = any(not r.checksum_match for r in records)
    if usable:
        gm, note = geomean(usable), ""
    else:
        gm, note = None, "no checksum-clean success records to aggregate"
    rounds = [o.rounds_used for o in outcomes]
    rounds_success = [o.rounds_used for o in successes]
    total_cost = sum(o.ledger.get("cost", 0.0) for o in outcomes)
    return CoverageReport(
        attempted=attempted,
        vectorized=len(successes),
        coverage=len(successes) / attempted if attempted else 0.0,
        per_category=per_category,
        geomean_speedup=gm,
        geomean_note=note,
        mean_rounds=statistics.fmean(rounds) if rounds else None,
        mean_rounds_success=statistics.fmean(rounds_success) if rounds_success else None,
        total_cost=total_cost,
        failure_taxonomy=taxonomy,
        integrity_flag=integrity,
    )


def emit_report(
    outcomes: list[RunOutcome],
    records: list[BenchRecord],
    out_dir: Path,
    environment: Optional[dict] = None,
) -> CoverageReport:
    """Write the machine-readable report and a text summary.

    Host, compiler, and path details live in the ``environment`` section,
    which is the one section excluded when comparing reports for
    reproducibility.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    report = aggregate(outcomes, records)
    payload = {
        "schema_version": SCHEMA_VERSION,
        "environment": environment or {"host": host_description()},
        "outcomes": [o.to_dict() for o in outcomes],
        "bench": [record_dict(r) for r in records],
        "aggregates": report.to_dict(),
    }
    try:
        (out_dir / "report.json").write_text(json.dumps(payload, indent=2, sort_keys=True))
        (out_dir / "summary.txt").write_text(render_summary(report, outcomes))
    except OSError as e:
        raise IoError(f"cannot write report under {out_dir}: {e}") from e
    return report


def render_summary(report: CoverageReport, outcomes: list[RunOutcome]) -> str:
    lines = [
        f"cases attempted: {report.attempted}",
        f"vectorized:      {report.vectorized}  (coverage {report.coverage:.1%})",
    ]
    if report.geomean_speedup is not None:
        lines.append(f"geomean speedup: {report.geomean_speedup:.2f}x")
    else:
        lines.append(f"geomean speedup: n/a ({report.geomean_note})")
    if report.mean_rounds is not None:
        lines.append(f"mean rounds:     {report.mean_rounds:.2f}")
    if report.mean_rounds_success is not None:
        lines.append(f"mean rounds (successes): {report.mean_rounds_success:.2f}")
    lines.append(f"total LLM cost:  ${report.total_cost:.4f}")
    lines.append("failure taxonomy: " + json.dumps(report.failure_taxonomy))
    if report.integrity_flag:
        lines.append("!! checksum mismatch detected: possible gate escape")
    lines.append("")
    for o in outcomes:
        speed = f"  speedup {o.speedup:.2f}x" if o.speedup else ""
        lines.append(f"  {o.case_id:16s} {o.kind.value}{speed}  rounds={o.rounds_used}")
    return "\n".join(lines) + "\n"


def load_report(path: Path) -> dict:
    try:
        payload = json.loads(Path(path).read_text())
    except OSError as e:
        raise IoError(str(e)) from e
    except json.JSONDecodeError as e:
        raise SchemaMismatch(f"not a report file: {e}") from e
    version = payload.get("schema_version")
    if version != SCHEMA_VERSION:
        raise SchemaMismatch(f"report schema {version!r}, expected {SCHEMA_VERSION}")
    return payload
