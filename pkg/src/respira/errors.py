"""Exception types shared across the package."""


class InputError(ValueError):
    """Bad or inconsistent input data (files, arguments, traces)."""


class PipelineError(RuntimeError):
    """Processing could not produce a usable result from valid input."""
