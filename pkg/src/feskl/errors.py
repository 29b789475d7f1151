"""Exception hierarchy.

Every failure the library raises derives from FesklError. The CLI maps the
subclasses onto its exit codes, so each one belongs to exactly one family:
crypto (decryption or verification), linearity (consumed quantum handles),
feasibility (budgets, quotas, enumeration limits) or usage (bad shapes and
arguments).
"""


class FesklError(Exception):
    pass


# usage family
class ShapeError(FesklError, ValueError):
    """Input has the wrong length or layout."""


class ParameterError(FesklError, ValueError):
    pass


class IndexRangeError(FesklError, ValueError):
    pass


class BoundError(FesklError, ValueError):
    """Availability bound outside the configured levels."""


class SlotError(FesklError, ValueError):
    """More pre-challenge keys than trapdoor slots."""


class FormatError(FesklError, ValueError):
    """Malformed container, store file or circuit text."""


# crypto family
class CryptoError(FesklError):
    pass


class AuthError(CryptoError):
    pass


class GarbleError(CryptoError):
    """Row or output authentication failed during garbled evaluation."""


class DecodeError(CryptoError):
    pass


class CoverageError(CryptoError):
    """Some SetHSS element has no share evaluation."""


class TamperError(CryptoError):
    """Two share evaluations disagree on the same element."""


class VerificationError(CryptoError):
    pass


# linearity family
class LinearityError(FesklError):
    """A qubit handle was consumed twice."""


class CapabilityError(FesklError):
    """Cloning requested on a store without the unsafe flag."""


# feasibility family
class FeasibilityError(FesklError):
    pass


class BudgetError(FeasibilityError):
    pass


class QuotaError(FeasibilityError):
    """Collusion bound exhausted."""


class OneCiphertextError(FeasibilityError):
    """Second encryption under a single-ciphertext key."""
