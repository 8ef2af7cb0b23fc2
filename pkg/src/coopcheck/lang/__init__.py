"""Mini-language frontend: parsing, CFAs and safety-property extraction."""

from .cfa import (
    Assign,
    Assume,
    Call,
    Cfa,
    Edge,
    ErrorLabel,
    Havoc,
    IrreducibleFlowError,
    Operation,
    ReturnOp,
    SafetyProperty,
)
from .frontend import (
    ParseError,
    Program,
    PropertyExtractionError,
    PropertySite,
    extract_properties,
    extract_property,
    parse,
    parse_ast,
)

__all__ = [
    "Assign",
    "Assume",
    "Call",
    "Cfa",
    "Edge",
    "ErrorLabel",
    "Havoc",
    "IrreducibleFlowError",
    "Operation",
    "ParseError",
    "Program",
    "PropertyExtractionError",
    "PropertySite",
    "ReturnOp",
    "SafetyProperty",
    "extract_properties",
    "extract_property",
    "parse",
    "parse_ast",
]
