"""Interactive vignette engine.

Turns a short natural-language story into a structured vignette
(environment, characters, key events) and runs it as a branch-and-bottleneck
interactive experience: the viewer-controlled player character may wander,
while planned non-player characters keep the authored storyline on track.

Subpackages:
    core     -- vignette element types, validation, canonical serialization
    llm      -- text-generation gateway (templates, providers, moderation)
    build    -- environment building: catalogs, trigger zones, placement, paths
    extract  -- staged story-to-elements extraction pipeline
    plan     -- divergence-aware NPC activity planner and PC guidance
    runtime  -- authoritative tick simulation and activity-table export
    service  -- HTTP API for authoring and live viewing sessions
    harness  -- headless trace runner, spec/trace generators, ranking stats
"""

from vignette.core.types import (
    ActivityTuple,
    Character,
    Environment,
    KeyEvent,
    ObjectInstance,
    Room,
    TriggerZone,
    VignetteSpec,
)
from vignette.core.validation import ValidationReport, validate_spec
from vignette.core.serialize import decode_spec, encode_spec

__all__ = [
    "ActivityTuple",
    "Character",
    "Environment",
    "KeyEvent",
    "ObjectInstance",
    "Room",
    "TriggerZone",
    "VignetteSpec",
    "ValidationReport",
    "validate_spec",
    "encode_spec",
    "decode_spec",
]

__version__ = "0.1.0"
