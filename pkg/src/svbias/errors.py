"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class SvBiasError(Exception):
    exit_code = 1


class InputError(SvBiasError):
    """Bad or unparseable input files or options."""

    exit_code = 2


class TrialParseError(InputError):
    def __init__(self, message, path=None, line_number=None, line=None):
        self.path = path
        self.line_number = line_number
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}"
            if line_number is not None:
                where += f":{line_number}"
            where += ": "
        text = f"{where}{message}"
        if line is not None:
            text += f" (line: {line!r})"
        super().__init__(text)


class MetadataError(InputError):
    pass


class EvaluationError(SvBiasError):
    """The inputs parse but cannot be evaluated (e.g. a single-label trial set)."""

    exit_code = 3


class EmptyClassError(EvaluationError):
    def __init__(self, side):
        self.side = side
        super().__init__(f"no {side} trials")


class SchemaMismatchError(EvaluationError):
    pass
