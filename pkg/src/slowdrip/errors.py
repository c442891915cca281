"""Exception hierarchy shared by all slowdrip modules."""


class SlowDripError(Exception):
    """Base class for every error raised by the package."""


class MalformedNameError(SlowDripError, ValueError):
    pass


class UnregistrableNameError(SlowDripError, ValueError):
    """The name is a public suffix (or shorter) and has no registrable SLD."""


class CorruptInputError(SlowDripError):
    pass


class InsufficientPopulationError(SlowDripError, ValueError):
    pass


class EmptySampleError(SlowDripError, ValueError):
    pass


class ConfigError(SlowDripError, ValueError):
    """Invalid configuration; ``field`` names the offending entry."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class ArchetypeError(SlowDripError):
    pass


class InsufficientCorpusError(SlowDripError, ValueError):
    pass


class StateError(SlowDripError):
    pass


class ExhaustionError(SlowDripError):
    """A generator ran out of distinct names to emit."""
