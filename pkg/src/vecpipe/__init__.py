"""Iterative LLM-assisted refactoring of scalar loops into forms the
compiler's loop vectorizer accepts, with differential testing, optional
IR-level translation validation, and benchmark reporting."""

__version__ = "0.1.0"

__all__ = [
    "bench",
    "cli",
    "compiler",
    "corpus",
    "engine",
    "errors",
    "harness",
    "llm",
    "testing",
    "verify",
]
