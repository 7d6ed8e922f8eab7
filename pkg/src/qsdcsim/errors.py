"""Exception types shared across the package."""


class QsdcError(Exception):
    """Base class for qsdcsim errors."""


class RegisterLimitError(QsdcError):
    """Requested register exceeds the dense-simulation amplitude budget."""


class SpanError(QsdcError):
    """State has weight outside the span of the requested measurement family.

    Raised by family measurements when the projected probabilities do not
    account for the full norm, which signals a corrupted or foreign state.
    """


class FamilyConstructionError(QsdcError):
    """An encoding family failed its orthonormality self-check."""


class ProtocolStateError(QsdcError):
    """A protocol step was attempted in an invalid session state."""
