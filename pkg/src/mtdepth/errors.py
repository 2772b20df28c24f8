class MTDError(Exception):
    exit_code = 1


class InputError(MTDError, ValueError):
    """Malformed, inconsistent, or out-of-range input."""

    exit_code = 2


class FormatError(InputError):
    """A file does not follow its declared format."""

    def __init__(self, message: str, offset: int | None = None, path=None):
        self.offset = offset
        self.path = path
        where = []
        if path is not None:
            where.append(str(path))
        if offset is not None:
            where.append(f"byte offset {offset}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)


class ParseError(InputError):
    def __init__(self, message: str, line: int | None = None, path=None):
        self.line = line
        self.path = path
        prefix = f"{path}:" if path is not None else ""
        prefix += f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)


class NumericalError(MTDError, ArithmeticError):
    exit_code = 3


class EmptyMaskError(MTDError, ValueError):
    exit_code = 4
