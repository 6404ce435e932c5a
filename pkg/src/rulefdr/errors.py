"""Exception hierarchy shared across the package.

Everything raised on purpose derives from :class:`RuleFdrError` so the CLI
can map library failures to a nonzero exit with a readable message.
"""


class RuleFdrError(Exception):
    """Base class for all errors raised by this package."""


class DataError(RuleFdrError):
    """Input data violates an invariant (bad value, bad shape, bad order)."""


class ParseError(DataError):
    """A delimited input file could not be parsed.

    Parameters
    ----------
    message:
        Human-readable description of the problem.
    path, line:
        Where it happened; ``line`` is 1-based and counts the header row.
    """

    def __init__(self, message: str, path: str | None = None, line: int | None = None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where = f" [{where}]"
        super().__init__(f"{message}{where}")


class AlignmentError(DataError):
    """Calendar alignment produced an empty date intersection."""


class InsufficientDataError(DataError):
    """Too few observations for the requested computation."""


class ConfigError(RuleFdrError):
    """A configuration mapping or CLI flag combination is invalid."""
