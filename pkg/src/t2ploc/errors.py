"""Exception hierarchy shared across the toolkit."""


class T2PError(Exception):
    """Base class for every error raised by t2ploc."""


class ParseError(T2PError, ValueError):
    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}"
        if line is not None:
            where += f":{line}" if where else f"line {line}"
        super().__init__(f"{where}: {message}" if where else message)


class TaxonomyError(T2PError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else ""


class EmptyObjectError(T2PError, ValueError):
    pass


class EmptyTrajectoryError(T2PError, ValueError):
    pass


class EmptyGraphError(T2PError, ValueError):
    pass


class IntegrityError(T2PError):
    """Persisted dataset disagrees with its manifest, or inputs do not join."""


class ConfigError(T2PError):
    def __init__(self, message, field=None):
        self.field = field
        super().__init__(message)


class SkipQuery(T2PError):
    """A query location cannot produce a valid query (too few objects)."""


class UndefinedMetricError(T2PError, ValueError):
    pass


class MalformedOutputError(T2PError, ValueError):
    """Model output could not be turned into a prediction."""


class NoJsonFoundError(MalformedOutputError):
    pass


class SchemaViolationError(MalformedOutputError):
    pass


class OutOfRasterError(MalformedOutputError):
    pass


class TransportError(T2PError):
    pass
