"""Exception types shared across the package."""


class UavsecError(Exception):
    """Base class for all package errors."""


class DimensionError(UavsecError, ValueError):
    pass


class DomainError(UavsecError, ValueError):
    pass


class DetectabilityError(UavsecError):
    """Observer gain could not be made stable for some mode."""

    def __init__(self, message, mode=None):
        super().__init__(message)
        self.mode = mode


class NoUnstableZeroDynamics(UavsecError):
    """The attack pencil has no positive real zero in the scanned range."""

    def __init__(self, message, scanned=None):
        super().__init__(message)
        self.scanned = scanned


class PreconditionError(UavsecError):
    pass


class ScenarioError(UavsecError, ValueError):
    """Invalid scenario file; carries the section/key that failed."""

    def __init__(self, message, section=None, key=None, location=None):
        where = ".".join(p for p in (section, key) if p)
        prefix = f"{location}: " if location else ""
        if where:
            prefix += f"[{where}] "
        super().__init__(prefix + message)
        self.section = section
        self.key = key
        self.location = location
        self.reason = message
