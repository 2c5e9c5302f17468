"""Exception hierarchy shared by the package."""


class HamShamError(Exception):
    pass


class LoadError(HamShamError):
    """A matrix file could not be ingested."""


class MalformedHeaderError(LoadError):
    pass


class ShapeError(LoadError):
    pass


class DtypeError(LoadError):
    pass


class NonFiniteError(LoadError):
    pass


class CorruptStreamError(HamShamError):
    """Bits that do not decode to the declared number of symbols."""


class ContainerError(HamShamError):
    """A serialized container violates the format or its invariants."""


class ConfigError(HamShamError, ValueError):
    pass
