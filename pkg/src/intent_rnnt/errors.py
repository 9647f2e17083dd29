"""Exception types shared across the package.

Each maps to a machine-readable error category used by the CLI exit handler.
"""


class ShapeError(ValueError):
    """Operand dimensions are inconsistent."""

    category = "dimension"


class ParseError(ValueError):
    """A data file could not be parsed."""

    category = "parse"

    def __init__(self, message, line=None, field=None):
        detail = message
        if line is not None:
            detail = f"line {line}: {detail}"
        if field is not None:
            detail = f"{detail} (field: {field})"
        super().__init__(detail)
        self.line = line
        self.field = field


class ConfigError(ValueError):
    """The run configuration is invalid or inconsistent."""

    category = "config"


class IntegrityError(RuntimeError):
    """A frozen artifact changed when it must not."""

    category = "integrity"


class EvaluationError(ValueError):
    """Evaluation inputs are incomplete or misaligned."""

    category = "evaluation"
