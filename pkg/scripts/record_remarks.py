#!/usr/bin/env python3
"""Refresh the recorded loop-vectorize remark fixture.

Compiles the probe kernels under the diagnosis flag profile and saves the
raw remark stream, so parser tests can run against real compiler output
without invoking the compiler themselves.
"""

from __future__ import annotations

import argparse
from pathlib import Path

from vecpipe import compiler as comp

ROOT = Path(__file__).resolve().parent.parent
PROBES = ROOT / "tests" / "fixtures" / "corpus" / "remark_probes.c"
OUT = ROOT / "tests" / "fixtures" / "remarks" / "loop_vectorize_remarks.txt"


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--compiler", default="clang")
    parser.add_argument("--out", type=Path, default=OUT)
    args = parser.parse_args()

    cfg = comp.CompilerConfig(executable=args.compiler)
    result = comp.compile_source(PROBES.read_text(), comp.FlagsProfile.DIAGNOSE, cfg)
    if not result.ok:
        raise SystemExit(f"probe compilation failed:\n{result.diagnostic}")
    report = comp.parse_remarks(result.remarks_raw)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    header = f"# {cfg.version_stamp()}\n# flags: {' '.join(comp.DIAGNOSE_FLAGS)}\n"
    args.out.write_text(header + result.remarks_raw)
    print(f"{args.out}: {report.remark_line_count} remark lines, "
          f"{len(report.loops)} loops ({len(report.successes())} vectorized)")


if __name__ == "__main__":
    main()
