# backend_errors.py

class SimulatorError(Exception):
    """Base class for everything the simulator raises on purpose."""


class ConfigError(SimulatorError, ValueError):
    """Bad configuration: unknown key, out-of-range value, invalid sweep."""


class ConfigParseError(ConfigError):
    """Malformed config line or expression. Carries the 1-based position."""

    def __init__(self, message: str, line: int = 0, column: int = 0):
        self.line = line
        self.column = column
        if line:
            message = f"line {line}, column {column}: {message}"
        super().__init__(message)


class SimulationFault(SimulatorError, RuntimeError):
    """A simulator bug, never a modeling condition."""


class InvariantViolation(SimulationFault):
    pass


class JobStarvedError(SimulatorError):
    """The job is stalled and nothing in flight can ever unstall it."""
