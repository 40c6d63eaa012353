"""Exception hierarchy shared across the pipeline."""


class PipelineError(Exception):
    """Base class for all errors raised by this package."""


class IoError(PipelineError):
    pass


class ParseError(PipelineError):
    """Function boundaries or signatures could not be identified."""


class CompileError(PipelineError):
    """A corpus case does not build standalone."""


class ToolMissing(PipelineError):
    """A configured executable (compiler, verifier) does not exist."""


class ConfigError(PipelineError):
    pass


class SchemaMismatch(PipelineError):
    """An archived report uses an unknown or incompatible schema version."""


class ProviderError(PipelineError):
    """LLM provider failure (HTTP error, auth, malformed response)."""


class TranscriptExhausted(ProviderError):
    """Replay provider has no next response; a fixture/test bug."""


class SlotMissing(PipelineError):
    """A template slot required for instantiation was not supplied."""


class MarkerNotFound(PipelineError):
    """LLM response does not contain the required begin/end code markers."""


class PromptTooLarge(PipelineError):
    """Rendered prompt exceeds the configured budget; never silently truncated."""
