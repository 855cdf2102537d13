class AttrIdError(Exception):
    """Base class for every error raised by this package."""


class ParseError(AttrIdError, ValueError):
    """Malformed input file. Carries the offending line number when known."""

    def __init__(self, message, path=None, lineno=None):
        self.path = path
        self.lineno = lineno
        where = ""
        if path is not None:
            where = f"{path}"
        if lineno is not None:
            where = f"{where}:{lineno}" if where else f"line {lineno}"
        super().__init__(f"{where}: {message}" if where else message)


class EmptyInputError(AttrIdError, ValueError):
    pass


class NotFoundError(AttrIdError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else "not found"


class NoEntitiesError(AttrIdError, ValueError):
    pass


class TrainingError(AttrIdError, ValueError):
    pass
