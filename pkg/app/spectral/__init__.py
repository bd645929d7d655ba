"""Finite-state verification of the tempering decomposition."""

from .chains import (
    DiscreteChain,
    restricted_spectral_gap,
    reversible_spectral_gap,
    stationary_vector,
    total_variation,
)
from .discretize import DiscreteSTChain, GridSpec, discretize_st
from .projected import ProjectedChain, build_projected, projected_paths
from .verify import (
    verify_canonical_path_bound,
    verify_decomposition_theorem,
    verify_dirichlet_decomposition,
    verify_mixing_bound,
)

__all__ = [
    "DiscreteChain",
    "DiscreteSTChain",
    "GridSpec",
    "ProjectedChain",
    "build_projected",
    "discretize_st",
    "projected_paths",
    "restricted_spectral_gap",
    "reversible_spectral_gap",
    "stationary_vector",
    "total_variation",
    "verify_canonical_path_bound",
    "verify_decomposition_theorem",
    "verify_dirichlet_decomposition",
    "verify_mixing_bound",
]
