"""Translation-validation wrapper: verdict classification and tool plumbing.

The real verifier is not assumed to be installed; the end-to-end paths run
against stub executables that emit the tool's characteristic verdict lines.
"""

from __future__ import annotations

import pytest

from vecpipe import compiler as comp
from vecpipe import verify
from vecpipe.errors import ToolMissing

from .conftest import STUB_BIN, requires_clang


class TestClassification:
    def test_equivalent_markers(self):
        v = verify.classify_tool_output("Transformation seems to be correct!", "", 0)
        assert v.kind is verify.VerdictKind.EQUIVALENT

    def test_mismatch_markers_and_counterexample_preserved(self):
        out = "Transformation doesn't verify!\nERROR: Value mismatch\ni32 %i = 16000\n"
        v = verify.classify_tool_output(out, "", 1)
        assert v.kind is verify.VerdictKind.MISMATCH
        assert "Value mismatch" in v.text

    def test_mismatch_wins_over_equivalent_text(self):
        # A run can report earlier pairs correct and the last one failing.
        out = "Transformation seems to be correct!\nTransformation doesn't verify!\n"
        assert verify.classify_tool_output(out, "", 1).kind is verify.VerdictKind.MISMATCH

    def test_timeout_markers(self):
        assert (
            verify.classify_tool_output("SMT query timed out", "", 1).kind
            is verify.VerdictKind.TIMEOUT
        )

    def test_unrecognized_output_is_tool_error(self):
        v = verify.classify_tool_output("", "segfault", 139)
        assert v.kind is verify.VerdictKind.TOOL_ERROR
        v2 = verify.classify_tool_output("", "", 2)
        assert v2.kind is verify.VerdictKind.TOOL_ERROR
        assert "exit 2" in v2.text


class TestNameAlignment:
    def test_opt_suffix_stripped(self):
        ir = "define void @s1113_opt(ptr %a) {\n  call void @s1113_opt(ptr %a)\n}\n"
        out = verify.align_candidate_names(ir, "s1113")
        assert "@s1113_opt" not in out
        assert out.count("@s1113") == 2

    def test_unrelated_names_untouched(self):
        ir = "define void @s1113_optimal() {}\ndefine void @other_opt() {}\n"
        assert verify.align_candidate_names(ir, "s1113") == ir


class TestVerifierConfig:
    def test_degraded_mode_when_unconfigured(self):
        cfg = verify.VerifierConfig()
        assert not cfg.available
        with pytest.raises(ToolMissing):
            cfg.resolve()

    def test_missing_executable(self):
        cfg = verify.VerifierConfig(executable="no-such-verifier-xyz")
        assert not cfg.available
        with pytest.raises(ToolMissing):
            cfg.resolve()

    def test_stub_path_is_available(self):
        cfg = verify.VerifierConfig(executable=str(STUB_BIN / "alive-stub-correct"))
        assert cfg.available

    def test_unavailable_sentinel(self):
        assert verify.UNAVAILABLE.kind is verify.VerdictKind.TOOL_ERROR
        assert verify.UNAVAILABLE.text == "unavailable"


class TestVerifyPair:
    @pytest.fixture()
    def ir_pair(self, tmp_path):
        a = tmp_path / "orig.ll"
        b = tmp_path / "cand.ll"
        a.write_text("; original\n")
        b.write_text("; candidate\n")
        return a, b

    def _cfg(self, stub, **kw):
        return verify.VerifierConfig(executable=str(STUB_BIN / stub), **kw)

    def test_correct_stub(self, ir_pair):
        v = verify.verify_pair(*ir_pair, self._cfg("alive-stub-correct"))
        assert v.kind is verify.VerdictKind.EQUIVALENT

    def test_incorrect_stub(self, ir_pair):
        v = verify.verify_pair(*ir_pair, self._cfg("alive-stub-incorrect"))
        assert v.kind is verify.VerdictKind.MISMATCH

    def test_timeout_stub(self, ir_pair):
        v = verify.verify_pair(*ir_pair, self._cfg("alive-stub-timeout"))
        assert v.kind is verify.VerdictKind.TIMEOUT

    def test_garbage_stub(self, ir_pair):
        v = verify.verify_pair(*ir_pair, self._cfg("alive-stub-garbage"))
        assert v.kind is verify.VerdictKind.TOOL_ERROR

    def test_hanging_stub_hits_budget(self, ir_pair):
        v = verify.verify_pair(*ir_pair, self._cfg("alive-stub-hang"), budget=1.0)
        assert v.kind is verify.VerdictKind.TIMEOUT

    def test_zero_budget_short_circuits(self, ir_pair):
        v = verify.verify_pair(*ir_pair, self._cfg("alive-stub-correct"), budget=0.0)
        assert v.kind is verify.VerdictKind.TIMEOUT


@requires_clang
def test_ir_pair_emission_and_alignment_end_to_end(mini_corpus, compiler_cfg, tmp_path):
    """EmitIr on original and candidate, align names, run the pass stub."""
    from vecpipe import testing

    case = mini_corpus["s1113"]
    orig = comp.compile_source(
        case.standalone_unit(), comp.FlagsProfile.EMIT_IR, compiler_cfg,
        workdir=tmp_path / "orig",
    )
    assert orig.ok
    candidate = case.source_text.replace("s1113", "s1113_opt")
    cand = comp.compile_source(
        case.standalone_unit(body=testing.prepare_candidate(case, candidate)),
        comp.FlagsProfile.EMIT_IR, compiler_cfg, workdir=tmp_path / "cand",
    )
    assert cand.ok
    aligned = verify.align_candidate_names(cand.artifact_path.read_text(), "s1113")
    assert "@s1113(" in aligned and "@s1113_opt" not in aligned
    aligned_path = tmp_path / "cand_aligned.ll"
    aligned_path.write_text(aligned)
    v = verify.verify_pair(
        orig.artifact_path, aligned_path,
        verify.VerifierConfig(executable=str(STUB_BIN / "alive-stub-correct")),
    )
    assert v.kind is verify.VerdictKind.EQUIVALENT
