"""Cooperation plumbing: property mapper, invariant adapter, helper protocol."""

from .adapter import (
    AdaptResult,
    NamespaceMap,
    NamespaceMapError,
    adapt,
    format_raw_output,
    parse_raw_output,
    snap_to_loop_head,
)
from .external import ExternalHelperError, ExternalHelperSpec, run_external_helper
from .mapper import EncodingInfo, MappingError, PropertyEncoding, detect_encoding, map_property

__all__ = [
    "AdaptResult",
    "EncodingInfo",
    "ExternalHelperError",
    "ExternalHelperSpec",
    "MappingError",
    "NamespaceMap",
    "NamespaceMapError",
    "PropertyEncoding",
    "adapt",
    "detect_encoding",
    "format_raw_output",
    "map_property",
    "parse_raw_output",
    "run_external_helper",
    "snap_to_loop_head",
]
