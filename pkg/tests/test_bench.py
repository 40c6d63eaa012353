"""Benchmarking and aggregation: geomean properties, taxonomy, report schema."""

from __future__ import annotations

import json
import math

import pytest
from hypothesis import given, settings, strategies as st

from vecpipe import bench, engine
from vecpipe.errors import SchemaMismatch

from .conftest import requires_clang

positive_floats = st.floats(min_value=1e-3, max_value=1e3, allow_nan=False)


class TestGeomean:
    def test_symmetry_pair(self):
        assert bench.geomean([2.0, 0.5]) == pytest.approx(1.0, abs=1e-12)

    def test_empty_input_is_an_error(self):
        with pytest.raises(ValueError):
            bench.geomean([])

    def test_nonpositive_rejected(self):
        with pytest.raises(ValueError):
            bench.geomean([1.0, 0.0])
        with pytest.raises(ValueError):
            bench.geomean([1.0, -2.0])

    @given(positive_floats)
    def test_identity(self, v):
        assert bench.geomean([v]) == pytest.approx(v, rel=1e-12)

    @given(st.lists(positive_floats, min_size=1, max_size=8), st.randoms())
    def test_permutation_invariance(self, values, rng):
        shuffled = list(values)
        rng.shuffle(shuffled)
        assert bench.geomean(shuffled) == pytest.approx(bench.geomean(values), rel=1e-9)

    @given(st.lists(positive_floats, min_size=1, max_size=8), positive_floats)
    def test_scale_multiplicativity(self, values, k):
        scaled = [k * v for v in values]
        assert bench.geomean(scaled) == pytest.approx(
            k * bench.geomean(values), rel=1e-9
        )


def _outcome(case_id, kind, rounds=1, trace=(), cost=0.0, category=None):
    return engine.RunOutcome(
        case_id=case_id,
        kind=kind,
        final_code=None,
        speedup=None,
        rounds_used=rounds,
        trace=list(trace),
        ledger={"input_tokens": 0, "output_tokens": 0, "cost": cost},
        tests_only=True,
        tests_degraded=False,
        category=category,
    )


def _record(case_id, speedup, match=True):
    return bench.BenchRecord(
        case_id, 1e-3, 1e-3 / speedup, speedup, match, 1.0, 1.0 if match else 2.0,
        {"cpu": "x"}, "clang",
    )


class TestAggregate:
    def test_coverage_and_taxonomy(self):
        outcomes = [
            _outcome("a", engine.OutcomeKind.SUCCESS, cost=0.01, category="switch-in-loop"),
            _outcome("b", engine.OutcomeKind.FAIL_ROUND_LIMIT, rounds=20, cost=0.02),
            _outcome("c", engine.OutcomeKind.NO_BENEFIT_DECLARED),
            _outcome(
                "d", engine.OutcomeKind.FAIL_PREMATURE_CLAIM,
                trace=[engine.TraceEntry(1, "marker-violation"),
                       engine.TraceEntry(2, "provider-failure")],
            ),
        ]
        report = bench.aggregate(outcomes, [_record("a", 2.0)])
        assert report.attempted == 4
        assert report.vectorized == 1
        assert report.coverage == pytest.approx(0.25)
        assert report.failure_taxonomy["round_limit"] == 1
        assert report.failure_taxonomy["premature_claim"] == 1
        assert report.failure_taxonomy["no_benefit"] == 1
        assert report.failure_taxonomy["format_violations"] == 1
        assert report.failure_taxonomy["provider_failures"] == 1
        assert report.total_cost == pytest.approx(0.03)
        assert report.per_category == {"switch-in-loop": 1}
        assert report.geomean_speedup == pytest.approx(2.0)
        assert not report.integrity_flag

    def test_checksum_mismatch_excluded_and_flagged(self):
        outcomes = [_outcome("a", engine.OutcomeKind.SUCCESS)]
        report = bench.aggregate(outcomes, [_record("a", 5.0, match=False)])
        assert report.geomean_speedup is None
        assert report.geomean_note
        assert report.integrity_flag

    def test_empty_run(self):
        report = bench.aggregate([], [])
        assert report.attempted == 0
        assert report.coverage == 0.0
        assert report.geomean_speedup is None


class TestReportSchema:
    def test_emit_and_load_roundtrip(self, tmp_path):
        outcomes = [_outcome("a", engine.OutcomeKind.SUCCESS)]
        bench.emit_report(outcomes, [_record("a", 1.5)], tmp_path)
        payload = bench.load_report(tmp_path / "report.json")
        assert payload["schema_version"] == 1
        assert payload["aggregates"]["vectorized"] == 1
        assert (tmp_path / "summary.txt").read_text().startswith("cases attempted: 1")

    def test_wrong_schema_version_rejected(self, tmp_path):
        path = tmp_path / "report.json"
        path.write_text(json.dumps({"schema_version": 99}))
        with pytest.raises(SchemaMismatch):
            bench.load_report(path)

    def test_non_json_rejected(self, tmp_path):
        path = tmp_path / "report.json"
        path.write_text("not json")
        with pytest.raises(SchemaMismatch):
            bench.load_report(path)

    def test_record_dict_roundtrip(self):
        rec = _record("a", 1.5)
        assert bench.record_from_dict(bench.record_dict(rec)) == rec


def test_host_description_shape():
    host = bench.host_description()
    assert set(host) == {"cpu", "isa", "machine"}
    assert isinstance(host["isa"], list)


@requires_clang
class TestMeasure:
    def test_self_comparison_near_unity(self, mini_corpus, compiler_cfg):
        """Timing the original against itself must sit near speedup 1.0 and
        match checksums -- the harness's own noise floor."""
        case = mini_corpus["s000"]
        record = bench.measure(case, case.source_text, compiler_cfg)
        assert not record.build_fail
        assert record.checksum_match
        assert 0.9 <= record.speedup <= 1.1

    def test_broken_candidate_reports_build_fail(self, mini_corpus, compiler_cfg):
        record = bench.measure(mini_corpus["s000"], "not C at all", compiler_cfg)
        assert record.build_fail
        assert record.diagnostic

    def test_checksum_catches_wrong_candidate(self, mini_corpus, compiler_cfg):
        case = mini_corpus["s000"]
        wrong = case.source_text.replace("b[i] + c[i]", "b[i] - c[i]")
        record = bench.measure(case, wrong, compiler_cfg)
        assert not record.build_fail
        assert not record.checksum_match

    def test_timing_harness_has_anti_dce_guards(self, mini_corpus):
        source = bench.build_timing_harness(
            mini_corpus["s000"], mini_corpus["s000"].source_text, bench.BenchConfig()
        )
        assert "memory_fence" in source
        assert "vp_checksum" in source
        assert "{{" not in source  # fully instantiated


def test_parse_timing_output_uses_medians():
    stdout = "\n".join(
        ["ORIG_TIME 3e-6", "ORIG_TIME 1e-6", "ORIG_TIME 2e-6",
         "CAND_TIME 1e-6", "CAND_TIME 1e-6", "CAND_TIME 9e-6",
         "ORIG_CHECKSUM 42.0", "CAND_CHECKSUM 42.0"]
    )
    t_orig, t_cand, (cs_o, cs_c) = bench._parse_timing_output(stdout)
    assert t_orig == pytest.approx(2e-6)
    assert t_cand == pytest.approx(1e-6)
    assert cs_o == cs_c == 42.0


def test_parse_timing_output_requires_measurements():
    with pytest.raises(ValueError):
        bench._parse_timing_output("garbage\n")
