"""Exception hierarchy shared by all subsystems.

Validation routines collect every violation before raising, so the
exceptions that wrap reports carry a list of structured entries rather
than a single message.
"""

from __future__ import annotations


class KLError(Exception):
    """Base class for all library errors."""


class ValidationError(KLError):
    """One or more structural conditions failed.

    ``violations`` is a list of dicts with at least a ``code`` key and a
    human-readable ``detail``.
    """

    def __init__(self, violations):
        self.violations = list(violations)
        codes = ", ".join(v["code"] for v in self.violations)
        super().__init__(f"validation failed: {codes}")


# -- poset layer ------------------------------------------------------------

class CycleDetected(KLError):
    pass


class DownsetNotChain(KLError):
    pass


class MaximalBlockTooSmall(KLError):
    pass


class NotOpenSubset(KLError):
    """Subset is not downward closed."""


# -- constants layer --------------------------------------------------------

class MissingPredecessorConstants(KLError):
    pass


class InconsistentSiblings(KLError):
    """Two successors of a block induce different fundamental constants."""


class NonIntegralCoefficient(KLError):
    """A lattice coefficient that must be an integer is not."""


# -- fan layer ---------------------------------------------------------------

class BasisDeterminantNotUnit(KLError):
    """Internal consistency failure: a cone basis is not unimodular."""


class ConeNotWall(KLError):
    """A codimension-one cone is not shared by exactly two maximal cones."""


# -- analytic layer ----------------------------------------------------------

class StratumCollision(KLError):
    """Two intra-block function values coincide within tolerance."""


class PoleAtLambda(KLError):
    """Removable pole hit exactly; caller should use the limit form."""


class RootNotBracketed(KLError):
    pass


class NegativeRadicand(KLError):
    pass


class InversionFailure(KLError):
    pass


class CollisionSingularity(KLError):
    pass


class NearSingularB(KLError):
    pass


class DegenerateDirection(KLError):
    pass


# -- config layer ------------------------------------------------------------

class SchemaError(KLError):
    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}")


class ParseError(KLError):
    pass
