"""Exception types shared across the package."""


class AhmpcError(Exception):
    """Base class for errors raised by this package."""


class NumericOverflowError(AhmpcError):
    """A computation produced a non-finite value where a finite one is required.

    The message names the offending entry (state index, or Jacobian
    row/column) so divergence is traceable to a concrete quantity.
    """


class DareError(AhmpcError):
    """Riccati iteration failed: singular innovation, divergence, or an
    unstabilizable linearization."""


class ConfigError(AhmpcError):
    """A config file could not be parsed or validated; the message carries
    the line number and key."""
