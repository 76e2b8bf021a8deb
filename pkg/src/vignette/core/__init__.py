"""Vignette element types, validation, and canonical serialization."""

from vignette.core.types import (
    ActivityTuple,
    Character,
    Environment,
    Facing,
    KeyEvent,
    ObjectInstance,
    ObjectKind,
    Role,
    Room,
    TriggerZone,
    VignetteSpec,
    ZoneType,
)
from vignette.core.validation import ValidationReport, Violation, validate_spec
from vignette.core.serialize import (
    SpecInvariantError,
    SpecParseError,
    decode_spec,
    encode_spec,
    spec_from_jsonable,
    spec_to_jsonable,
)

__all__ = [
    "ActivityTuple",
    "Character",
    "Environment",
    "Facing",
    "KeyEvent",
    "ObjectInstance",
    "ObjectKind",
    "Role",
    "Room",
    "TriggerZone",
    "VignetteSpec",
    "ZoneType",
    "ValidationReport",
    "Violation",
    "validate_spec",
    "SpecParseError",
    "SpecInvariantError",
    "encode_spec",
    "decode_spec",
    "spec_to_jsonable",
    "spec_from_jsonable",
]
