"""Correctness witnesses: model, GraphML serialization, CFA matching."""

from .model import (
    GuardType,
    LocatedInvariant,
    SourceCodeGuard,
    Transition,
    Witness,
    WitnessFormatError,
    WitnessState,
    base_metadata,
    is_trivial_witness,
)
from .graphml import read_graphml, write_graphml
from .matching import MatchResult, WitnessMatchError, match_to_cfa, witness_from_invariants

__all__ = [
    "GuardType",
    "LocatedInvariant",
    "MatchResult",
    "SourceCodeGuard",
    "Transition",
    "Witness",
    "WitnessFormatError",
    "WitnessMatchError",
    "WitnessState",
    "base_metadata",
    "is_trivial_witness",
    "match_to_cfa",
    "read_graphml",
    "witness_from_invariants",
    "write_graphml",
]
