"""Densities of visit sets, weighted backward shifts and reiterative distributional chaos at finite horizons."""

from .natdensity import IndexSet, DensityEstimate, four_densities
from .seqspace import SeqVector, SpaceTag, basis_vector, c0, lp, norm
from .shiftops import ShiftOperator, OrbitRecord, cesaro_shift, orbit, rolewicz_shift, weighted_shift
from .chaoscls import ChaosProfile, ChaosVerdict, classify_pair, classify_vector, implication_lattice

__version__ = "0.1.0"

__all__ = [
    "IndexSet",
    "DensityEstimate",
    "four_densities",
    "SeqVector",
    "SpaceTag",
    "basis_vector",
    "c0",
    "lp",
    "norm",
    "ShiftOperator",
    "OrbitRecord",
    "cesaro_shift",
    "orbit",
    "rolewicz_shift",
    "weighted_shift",
    "ChaosProfile",
    "ChaosVerdict",
    "classify_pair",
    "classify_vector",
    "implication_lattice",
]
