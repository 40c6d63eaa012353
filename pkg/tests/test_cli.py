"""CLI surface: manifest resolution, exit codes, and the report pipeline."""

from __future__ import annotations

import json

import pytest
from click.testing import CliRunner

from vecpipe import cli

from .conftest import CORPUS_FILE, TRANSCRIPTS, requires_clang


@pytest.fixture()
def runner():
    return CliRunner()


REPLAY = f"replay:{TRANSCRIPTS / 'full'}"


class TestManifest:
    def test_defaults(self):
        manifest = cli._load_manifest(None, {})
        assert manifest.max_rounds == 20
        assert manifest.trials == 100
        assert manifest.seed == 12345
        assert manifest.bench_on_success

    def test_file_plus_overrides(self, tmp_path):
        path = tmp_path / "m.json"
        path.write_text(json.dumps({"max_rounds": 5, "model": "m1"}))
        manifest = cli._load_manifest(str(path), {"model": "m2"})
        assert manifest.max_rounds == 5
        assert manifest.model == "m2"  # CLI override wins

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "m.json"
        path.write_text(json.dumps({"mysterious": 1}))
        from vecpipe.errors import ConfigError

        with pytest.raises(ConfigError):
            cli._load_manifest(str(path), {})

    def test_llm_spec_parsing(self):
        from vecpipe.errors import ConfigError

        manifest = cli.RunManifest(llm_spec=f"replay:{TRANSCRIPTS / 'full'}")
        cfg = cli._llm_config_for(manifest, "s1113")
        assert cfg.provider == "replay"
        assert cfg.transcript_path.name == "s1113.json"
        with pytest.raises(ConfigError):
            cli._llm_config_for(cli.RunManifest(llm_spec="nonsense"), "x")
        with pytest.raises(ConfigError):
            cli._llm_config_for(cli.RunManifest(llm_spec="smoke:signals"), "x")


class TestExitCodes:
    def test_dry_run_prints_manifest_and_touches_nothing(self, runner, tmp_path):
        out_dir = tmp_path / "never-created"
        result = runner.invoke(cli.main, [
            "run", "--corpus", str(CORPUS_FILE), "--llm", REPLAY,
            "--output", str(out_dir), "--dry-run",
        ])
        assert result.exit_code == 0
        manifest = json.loads(result.output)
        assert manifest["corpus"] == str(CORPUS_FILE)
        assert not out_dir.exists()

    def test_missing_compiler_exits_3(self, runner, tmp_path):
        result = runner.invoke(cli.main, [
            "run", "--corpus", str(CORPUS_FILE), "--llm", REPLAY,
            "--compiler", "no-such-clang-xyz", "--output", str(tmp_path / "o"),
        ])
        assert result.exit_code == 3

    @requires_clang
    def test_bad_manifest_exits_2(self, runner, tmp_path):
        path = tmp_path / "m.json"
        path.write_text("{broken")
        result = runner.invoke(cli.main, ["run", "--manifest", str(path)])
        assert result.exit_code == 2

    @requires_clang
    def test_missing_corpus_exits_2(self, runner, tmp_path):
        result = runner.invoke(cli.main, [
            "run", "--llm", REPLAY, "--output", str(tmp_path / "o"),
        ])
        assert result.exit_code == 2

    def test_report_on_empty_archive_exits_2(self, runner, tmp_path):
        result = runner.invoke(cli.main, ["report", str(tmp_path)])
        assert result.exit_code == 2


@requires_clang
class TestRunAndReport:
    def test_failed_vectorization_still_exits_0(self, runner, tmp_path):
        result = runner.invoke(cli.main, [
            "run", "--corpus", str(CORPUS_FILE), "--only", "s1113",
            "--llm", f"replay:{TRANSCRIPTS / 'malformed20.json'}",
            "--output", str(tmp_path / "out"), "--no-bench",
        ])
        assert result.exit_code == 0, result.output
        assert "fail-round-limit" in result.output

    def test_run_then_rerender_report(self, runner, tmp_path):
        out = tmp_path / "out"
        first = runner.invoke(cli.main, [
            "run", "--corpus", str(CORPUS_FILE), "--only", "s1113",
            "--llm", f"replay:{TRANSCRIPTS / 'full'}",
            "--output", str(out), "--no-bench",
        ])
        assert first.exit_code == 0, first.output
        assert (out / "report.json").exists()
        second = runner.invoke(cli.main, ["report", str(out / "archive")])
        assert second.exit_code == 0
        assert "vectorized:      1" in second.output

    def test_validate_tests_command(self, runner):
        result = runner.invoke(cli.main, [
            "validate-tests", "--corpus", str(CORPUS_FILE), "--only", "s000",
        ])
        assert result.exit_code == 0
        assert "s000: VALID" in result.output

    def test_bench_command(self, runner, tmp_path, mini_corpus):
        candidate = tmp_path / "cand.c"
        candidate.write_text(mini_corpus["s000"].source_text)
        result = runner.invoke(cli.main, [
            "bench", "--corpus", str(CORPUS_FILE), "--only", "s000",
            "--candidate", str(candidate),
        ])
        assert result.exit_code == 0, result.output
        record = json.loads(result.output)
        assert record["checksum_match"] is True
