#!/usr/bin/env python3
"""Run the bundled mini corpus against the recorded transcripts.

A fully offline demonstration of the pipeline: every LLM response is
replayed from tests/fixtures/transcripts/full, so the run is deterministic
and finishes in seconds.  Benchmarks run by default; pass --no-bench for a
byte-reproducible report.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from vecpipe.cli import main as vecpipe_main

ROOT = Path(__file__).resolve().parent.parent
CORPUS = ROOT / "tests" / "fixtures" / "corpus" / "tsvc_mini.c"
TRANSCRIPTS = ROOT / "tests" / "fixtures" / "transcripts" / "full"


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--output", default="fixture-suite-out")
    parser.add_argument("--no-bench", action="store_true")
    args = parser.parse_args()

    argv = [
        "run",
        "--corpus", str(CORPUS),
        "--llm", f"replay:{TRANSCRIPTS}",
        "--output", args.output,
    ]
    if args.no_bench:
        argv.append("--no-bench")
    sys.argv = ["vecpipe", *argv]
    vecpipe_main()


if __name__ == "__main__":
    main()
