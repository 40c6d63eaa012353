"""Shared fixtures: paths, the pinned compiler, and the ingested mini corpus."""

from __future__ import annotations

import shutil
from pathlib import Path

import pytest

from vecpipe import compiler as comp
from vecpipe import corpus

FIXTURES = Path(__file__).parent / "fixtures"
CORPUS_FILE = FIXTURES / "corpus" / "tsvc_mini.c"
TRANSCRIPTS = FIXTURES / "transcripts"
REMARKS_FILE = FIXTURES / "remarks" / "loop_vectorize_remarks.txt"
STUB_BIN = FIXTURES / "bin"


def _clang_available() -> bool:
    return shutil.which("clang") is not None

requires_clang = pytest.mark.skipif(not _clang_available(), reason="clang not on PATH")


@pytest.fixture(scope="session")
def compiler_cfg() -> comp.CompilerConfig:
    if not _clang_available():
        pytest.skip("clang not on PATH")
    return comp.CompilerConfig()


@pytest.fixture(scope="session")
def mini_corpus(compiler_cfg) -> dict[str, corpus.FunctionCase]:
    load = corpus.load_corpus(CORPUS_FILE, compiler_cfg=compiler_cfg)
    assert not load.problems, [p.detail for p in load.problems]
    return {c.id: c for c in load.cases}
