"""Command-line entry point.

Subcommands map to the pipeline stages so each is independently exercisable:
``run`` (full pipeline), ``report`` (re-render from an archive),
``validate-tests``, ``bench``, and ``record-transcript``.

Exit-code policy: 0 = pipeline ran (failed vectorization is not an error),
2 = configuration/schema problem, 3 = missing tool.
"""

from __future__ import annotations

import concurrent.futures
import json
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import click

from . import bench as bench_mod
from . import compiler as comp
from . import corpus as corpus_mod
from . import engine, llm, testing, verify
from .errors import ConfigError, PipelineError, SchemaMismatch, ToolMissing


@dataclass
class RunManifest:
    corpus: str = ""
    only: list[str] = field(default_factory=list)
    llm_spec: str = ""  # "replay:<path>" or "http:<url>"
    model: str = "offline"
    compiler: str = "clang"
    verifier: Optional[str] = None
    max_rounds: int = 20
    compile_timeout: float = 60.0
    test_timeout: float = 60.0
    verify_timeout: float = 120.0
    case_wallclock: float = 1800.0
    parallelism: int = 1
    output_dir: str = "vecpipe-out"
    trials: int = testing.DEFAULT_TRIALS
    seed: int = 12345
    bench_on_success: bool = True
    use_llm_tests: bool = False
    api_key_env: str = "VECPIPE_API_KEY"
    record_dir: Optional[str] = None


def _load_manifest(path: Optional[str], overrides: dict) -> RunManifest:
    manifest = RunManifest()
    if path:
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot load manifest {path}: {e}") from e
        for key, value in data.items():
            if not hasattr(manifest, key):
                raise ConfigError(f"unknown manifest key {key!r}")
            setattr(manifest, key, value)
    for key, value in overrides.items():
        if value is not None and value != () and value != []:
            setattr(manifest, key, list(value) if isinstance(value, tuple) else value)
    return manifest


def _llm_config_for(manifest: RunManifest, case_id: str) -> llm.LlmConfig:
    spec = manifest.llm_spec
    if ":" not in spec:
        raise ConfigError(f"llm spec must be 'replay:<path>' or 'http:<url>', got {spec!r}")
    kind, _, rest = spec.partition(":")
    if kind == "replay":
        path = Path(rest)
        if path.is_dir():
            path = path / f"{case_id}.json"
        return llm.LlmConfig(
            provider="replay", transcript_path=path, model_name=manifest.model
        )
    if kind == "http":
        record = None
        if manifest.record_dir:
            record = Path(manifest.record_dir) / f"{case_id}.json"
            record.parent.mkdir(parents=True, exist_ok=True)
        return llm.LlmConfig(
            provider="http",
            endpoint=rest,
            model_name=manifest.model,
            api_key_env=manifest.api_key_env,
            record_path=record,
        )
    raise ConfigError(f"unknown llm provider {kind!r}")


def _build_context(manifest: RunManifest, case_id: str, archive: Path) -> engine.RunContext:
    client = llm.LlmClient(_llm_config_for(manifest, case_id))
    return engine.RunContext(
        client=client,
        compiler_cfg=comp.CompilerConfig(
            executable=manifest.compiler, timeout=manifest.compile_timeout
        ),
        verifier_cfg=verify.VerifierConfig(
            executable=manifest.verifier, timeout=manifest.verify_timeout
        ),
        engine_cfg=engine.EngineConfig(
            max_rounds=manifest.max_rounds,
            compile_timeout=manifest.compile_timeout,
            test_timeout=manifest.test_timeout,
            verify_budget=manifest.verify_timeout,
            case_wallclock=manifest.case_wallclock,
            bench_on_success=manifest.bench_on_success,
            use_llm_tests=manifest.use_llm_tests,
        ),
        input_spec=testing.InputSpec(seed=manifest.seed, trials=manifest.trials),
        archive_dir=archive,
    )


def _validate_tools(manifest: RunManifest) -> None:
    comp.CompilerConfig(executable=manifest.compiler).resolve()
    if manifest.verifier is not None:
        verify.VerifierConfig(executable=manifest.verifier).resolve()


def _load_cases(manifest: RunManifest) -> list[corpus_mod.FunctionCase]:
    if not manifest.corpus:
        raise ConfigError("no corpus file given")
    load = corpus_mod.load_corpus(
        Path(manifest.corpus),
        only=manifest.only or None,
        compiler_cfg=comp.CompilerConfig(executable=manifest.compiler),
    )
    for problem in load.problems:
        click.echo(f"warning: case {problem.id}: {problem.kind}: {problem.detail}", err=True)
    return load.cases


@click.group()
def main() -> None:
    """Iterative LLM-assisted loop refactoring for compiler auto-vectorization."""


_run_options = [
    click.option("--corpus", "corpus", type=str, default=None, help="corpus source file"),
    click.option("--only", multiple=True, help="restrict to these case ids"),
    click.option("--llm", "llm_spec", type=str, default=None,
                 help="'replay:<path>' or 'http:<url>'"),
    click.option("--model", type=str, default=None),
    click.option("--compiler", type=str, default=None),
    click.option("--verifier", type=str, default=None),
    click.option("--max-rounds", "max_rounds", type=int, default=None),
    click.option("--output", "output_dir", type=str, default=None),
    click.option("--parallelism", type=int, default=None),
    click.option("--trials", type=int, default=None),
    click.option("--seed", type=int, default=None),
    click.option("--no-bench", "bench_on_success", flag_value=False, default=None),
    click.option("--use-llm-tests", "use_llm_tests", flag_value=True, default=None),
    click.option("--manifest", "manifest_path", type=str, default=None),
]


def _with_run_options(fn):
    for opt in reversed(_run_options):
        fn = opt(fn)
    return fn


def _cmd_run_impl(manifest: RunManifest, dry_run: bool) -> int:
    if dry_run:
        click.echo(json.dumps(asdict(manifest), indent=2))
        return 0
    _validate_tools(manifest)
    cases = _load_cases(manifest)
    if not cases:
        raise ConfigError("no cases selected")
    out_dir = Path(manifest.output_dir)
    archive = out_dir / "archive"
    archive.mkdir(parents=True, exist_ok=True)

    def run_one(case):
        ctx = _build_context(manifest, case.id, archive)
        return engine.run_case(case, ctx)

    outcomes: list[engine.RunOutcome] = []
    if manifest.parallelism > 1:
        with concurrent.futures.ThreadPoolExecutor(manifest.parallelism) as pool:
            outcomes = list(pool.map(run_one, cases))
    else:
        outcomes = [run_one(c) for c in cases]

    records = [
        bench_mod.record_from_dict(o.bench_record) for o in outcomes if o.bench_record
    ]
    environment = {
        "host": bench_mod.host_description(),
        "compiler": comp.CompilerConfig(executable=manifest.compiler).version_stamp(),
        "archive": str(archive),
    }
    report = bench_mod.emit_report(outcomes, records, out_dir, environment=environment)
    click.echo(bench_mod.render_summary(report, outcomes))
    return 0


@main.command("run")
@_with_run_options
@click.option("--dry-run", is_flag=True, default=False)
def cmd_run(manifest_path, dry_run, **overrides):
    """Run the refinement pipeline over the selected corpus."""

    def impl() -> int:
        manifest = _load_manifest(manifest_path, overrides)
        return _cmd_run_impl(manifest, dry_run)

    sys.exit(_guard(impl))


@main.command("record-transcript")
@_with_run_options
@click.option("--record-dir", "record_dir", type=str, required=True,
              help="directory receiving one replayable transcript per case")
def cmd_record_transcript(manifest_path, record_dir, **overrides):
    """Run live and record transcripts replayable as offline fixtures."""
    overrides["record_dir"] = record_dir

    def impl() -> int:
        manifest = _load_manifest(manifest_path, overrides)
        if not manifest.llm_spec.startswith("http:"):
            raise ConfigError("transcript recording requires an http provider")
        return _cmd_run_impl(manifest, dry_run=False)

    sys.exit(_guard(impl))


@main.command("report")
@click.argument("archive_dir", type=str)
def cmd_report(archive_dir):
    """Re-render the coverage report from an existing archive."""

    def impl() -> int:
        archive = Path(archive_dir)
        outcome_files = sorted(archive.glob("*/outcome.json"))
        if not outcome_files:
            raise SchemaMismatch(f"no archived outcomes under {archive}")
        outcomes, records = [], []
        for path in outcome_files:
            data = json.loads(path.read_text())
            outcomes.append(_outcome_from_dict(data))
            bench_path = path.parent / "bench.json"
            if bench_path.exists():
                records.append(bench_mod.record_from_dict(json.loads(bench_path.read_text())))
        report = bench_mod.aggregate(outcomes, records)
        click.echo(bench_mod.render_summary(report, outcomes))
        return 0

    sys.exit(_guard(impl))


@main.command("validate-tests")
@click.option("--corpus", required=True)
@click.option("--only", multiple=True)
@click.option("--compiler", default="clang")
@click.option("--trials", type=int, default=testing.DEFAULT_TRIALS)
@click.option("--seed", type=int, default=12345)
def cmd_validate_tests(corpus, only, compiler, trials, seed):
    """Generate and validity-check the differential suite for each case."""

    def impl() -> int:
        cfg = comp.CompilerConfig(executable=compiler)
        cfg.resolve()
        load = corpus_mod.load_corpus(Path(corpus), only=list(only) or None, compiler_cfg=cfg)
        spec = testing.InputSpec(seed=seed, trials=trials)
        for case in load.cases:
            suite = testing.make_template_suite(case, spec)
            result = testing.validate_suite(suite, case, cfg)
            status = "VALID" if result.validated else f"INVALID ({result.reason})"
            click.echo(f"{case.id}: {status}")
        return 0

    sys.exit(_guard(impl))


@main.command("bench")
@click.option("--corpus", required=True)
@click.option("--only", required=True, help="case id to benchmark")
@click.option("--candidate", "candidate_path", required=True, type=str,
              help="file holding the transformed function")
@click.option("--compiler", default="clang")
def cmd_bench(corpus, only, candidate_path, compiler):
    """Time an original/candidate pair and print the record."""

    def impl() -> int:
        cfg = comp.CompilerConfig(executable=compiler)
        cfg.resolve()
        load = corpus_mod.load_corpus(Path(corpus), only=[only], compiler_cfg=cfg)
        if not load.cases:
            raise ConfigError(f"case {only!r} not found in {corpus}")
        candidate = Path(candidate_path).read_text()
        record = bench_mod.measure(load.cases[0], candidate, cfg)
        click.echo(json.dumps(bench_mod.record_dict(record), indent=2))
        return 0

    sys.exit(_guard(impl))


# --------------------------------------------------------------------------


def _outcome_from_dict(data: dict) -> engine.RunOutcome:
    return engine.RunOutcome(
        case_id=data["case_id"],
        kind=engine.OutcomeKind(data["kind"]),
        final_code=data.get("final_code"),
        speedup=data.get("speedup"),
        rounds_used=data["rounds_used"],
        trace=[engine.TraceEntry(**t) for t in data.get("trace", [])],
        ledger=data.get("ledger", {}),
        tests_only=data.get("tests_only", False),
        tests_degraded=data.get("tests_degraded", False),
        category=data.get("category"),
        stamps=data.get("stamps", {}),
    )


def _fail(e: PipelineError) -> int:
    click.echo(f"error: {e}", err=True)
    return 3 if isinstance(e, ToolMissing) else 2


def _guard(fn) -> int:
    try:
        return fn()
    except PipelineError as e:
        return _fail(e)


if __name__ == "__main__":
    main()
