class EvcError(ValueError):
    """Base class for every contract violation raised by the codec."""


class BitstreamError(EvcError):
    """Malformed, truncated or inconsistent coded data."""
