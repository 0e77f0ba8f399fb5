"""Exception hierarchy.

Each error carries an ``exit_code`` so the command line front end can map
failures onto stable process exit statuses.
"""


class DaembedError(Exception):
    exit_code = 1


class ParseError(DaembedError, ValueError):
    """Malformed input file or unreadable record."""

    exit_code = 2

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where += f"{path}"
        if line is not None:
            where += f":{line}" if where else f"line {line}"
        super().__init__(f"{where}: {message}" if where else message)


class NumericalError(DaembedError, ArithmeticError):
    exit_code = 3


class DimensionError(DaembedError, ValueError):
    exit_code = 3


class AlignmentError(DaembedError, ValueError):
    exit_code = 3


class ConfigError(DaembedError, ValueError):
    exit_code = 4
