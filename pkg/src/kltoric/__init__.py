"""Kähler-Liouville toric models.

Construct the toric fan of a model from its block poset and constants,
compute divisor-class invariants, build one-block geometries from seeds,
and numerically certify complete integrability of the geodesic flow.
"""

from .poset import Poset, validate_poset, enumerate_sections, split
from .constants import (
    ConstantBundle,
    constants_from_m,
    dual_involution,
    m_from_constants,
    validate_compatibility,
)
from .fan import (
    build_fan,
    build_lattice,
    lattice_from_m,
    split_fibration,
    z_vectors,
    z_vectors_from_m,
)
from .invariants import cell_counts, chern_pairing, kahler_class, picard_reduce
from .block import (
    BlockGeometry,
    BlockSeed,
    Cos2Profile,
    TableProfile,
    branch_times,
    build_profiles,
    cos2_seed,
    metric_and_integrals,
    periods,
    validate_seed,
)
from .flow import OneBlockModel, PhaseState, integrate, integrate_batch, poisson_check

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
