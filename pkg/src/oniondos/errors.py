"""Exception hierarchy shared across the package."""


class OnionDosError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(OnionDosError):
    """Invalid or infeasible configuration values."""


class ParseError(OnionDosError):
    """Malformed input file.  Carries a 1-based line number when known."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class GenerationError(OnionDosError):
    """Synthetic network generation could not meet its targets."""


class NoEligibleRelayError(OnionDosError):
    """A position distribution has empty support after exclusions."""


class ShortfallError(OnionDosError):
    """Compromise targets unreachable with the eligible relay pool."""


class DegenerateNetworkError(OnionDosError):
    """A selection denominator is zero (no guard or no exit bandwidth)."""


class InfeasibleParametersError(OnionDosError):
    """Attacker/network ratios are mutually inconsistent beyond tolerance."""


class OracleTransportError(OnionDosError):
    """A probe could not be issued at all; distinct from a failed probe."""
