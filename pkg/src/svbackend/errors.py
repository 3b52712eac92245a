"""Error taxonomy shared by the whole back-end.

Two failure families matter to callers (and map to CLI exit codes):
data problems in files or references (exit 3) and numerically degenerate
inputs (exit 4). Everything else is a plain programming error.
"""


class DataError(Exception):
    """A file is malformed or a referenced id cannot be resolved."""

    @classmethod
    def at_line(cls, path, lineno, reason):
        return cls(f"{path}:{lineno}: {reason}")


class DegenerateInputError(Exception):
    """Input is well-formed but numerically unusable.

    Examples: single-class label sets, zero-norm embeddings, cohorts with
    zero score spread.
    """
