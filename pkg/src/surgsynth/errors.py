"""Exception types shared across the pipeline.

The CLI maps ValidationError (and argparse usage errors) to exit code 2
and everything else raised here to exit code 1.
"""


class SurgsynthError(Exception):
    """Base class for all pipeline errors."""


class ValidationError(SurgsynthError):
    """A value violated a documented precondition; names the offending field."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class MeshParseError(SurgsynthError):
    """OBJ-subset parsing failed; carries the 1-based source line number."""

    def __init__(self, line_no: int, message: str):
        self.line_no = line_no
        super().__init__(f"line {line_no}: {message}")


class PlacementError(SurgsynthError):
    """Arm placement could not satisfy the separation/viewport constraints."""


class SplitError(SurgsynthError):
    """Dataset split cannot satisfy the leakage rule."""


class InsufficientPoolError(SurgsynthError):
    """Synthetic pool too small for the requested mixing ratio."""

    def __init__(self, required: int, available: int):
        self.required = required
        self.available = available
        super().__init__(
            f"insufficient synthetic pool: need {required} samples, have {available}"
        )
