"""Exception hierarchy shared by every module."""


class TreeNerError(Exception):
    """Base class for all package errors."""


class ShapeError(TreeNerError, ValueError):
    pass


class DegenerateRowError(ShapeError):
    pass


class NumericError(TreeNerError, ArithmeticError):
    pass


class TopologyError(TreeNerError, ValueError):
    pass


class ParseError(TreeNerError, ValueError):
    """Malformed corpus record; carries the 1-based line and column."""

    def __init__(self, message, path=None, line=None, column=None):
        self.path = path
        self.line = line
        self.column = column
        where = []
        if path is not None:
            where.append(str(path))
        if line is not None:
            where.append(f"line {line}")
        if column is not None:
            where.append(f"column {column}")
        prefix = ":".join(where)
        super().__init__(f"{prefix}: {message}" if prefix else message)


class VocabError(TreeNerError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else ""


class LabelError(TreeNerError, ValueError):
    pass


class AlignmentError(TreeNerError, ValueError):
    pass


class CheckpointError(TreeNerError, ValueError):
    pass


class ConfigError(TreeNerError, ValueError):
    pass
