"""Exception types shared across the library."""


class LipforgeError(Exception):
    """Base class for all library errors."""


class DescriptorError(LipforgeError):
    """Unsupported or malformed norm descriptor."""


class InputError(LipforgeError):
    """Non-finite or otherwise invalid numeric input."""


class FamilyError(LipforgeError):
    """Invalid operator family (e.g. empty basis)."""


class GeometryError(LipforgeError):
    """Separation / boundary-distance precondition violated."""


class NormError(LipforgeError):
    """Operator norm hypothesis violated (e.g. ||L|| > 1 - r)."""


class DomainError(LipforgeError):
    """Point or set outside the permitted domain."""


class RefereeError(LipforgeError):
    """Invalid adversary move rejected twice by the game referee."""


class ResolutionError(LipforgeError):
    """Grid too coarse for the requested gap."""


class BudgetError(LipforgeError):
    """Iteration / schedule budget exhausted or infeasible."""


class CoverError(LipforgeError):
    """Candidate partition-of-unity cover does not cover the target set."""


class PremiseError(LipforgeError):
    """A sampled premise of an assembly lemma failed."""


class ConstructionError(LipforgeError):
    """A composite construction could not meet its internal targets."""


class HypothesisError(LipforgeError):
    """Lipschitz / norm hypothesis of a lemma-shaped operation violated."""


class ExactEvalUnsupported(LipforgeError):
    """Requested exact (rational) evaluation on a node or norm without it."""
