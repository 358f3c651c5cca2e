"""Exception hierarchy shared across the package."""


class AmisimError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(AmisimError):
    """Invalid configuration value or combination."""


class ParseError(AmisimError):
    """Malformed input data; carries the offending line number when known."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class DataFormatError(AmisimError):
    """Structurally valid input that violates a format contract."""


class DegenerateDayError(AmisimError):
    """A day whose period totals make the periods formula undefined."""


class DimensionError(AmisimError):
    """Tensor shape mismatch; names the layer where it occurred."""


class TrainingError(AmisimError):
    """Training aborted (non-finite loss, bad dataset, ...)."""


class CryptoError(AmisimError):
    """Key generation, encryption, or decryption failure."""


class EncodingRangeError(CryptoError):
    """Fixed-point encoding would overflow the plaintext space."""


class ProtocolError(AmisimError):
    """Protocol state machine violation (missing keys, bad bootstrap, ...)."""


class StaleMessageError(ProtocolError):
    """Message timestamp outside the freshness window."""


class VerificationError(ProtocolError):
    """Signature verification failed on a message that must verify."""
