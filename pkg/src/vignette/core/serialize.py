"""Canonical serialization of vignette specs.

The wire form is UTF-8 JSON with sorted keys and two-space indentation, so
encoding the same spec always yields the same bytes and golden-file tests
can compare byte-for-byte.  Blank persona fields are written as explicit
nulls: a key that is present-but-null was deliberately left blank, which is
not the same as a key that was never extracted.

decode_spec raises SpecParseError (with character offset) on malformed or
structurally invalid documents, and SpecInvariantError (carrying the full
ValidationReport) on documents that parse but break spec invariants.
"""

from __future__ import annotations

import json
from typing import Any

import jsonschema

from vignette.core.schema import SPEC_SCHEMA
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
from vignette.core.validation import ValidationReport, validate_spec

SPEC_FILE_EXTENSION = ".vignette.json"


class SpecParseError(ValueError):
    """Malformed document; offset is a character position when known."""

    def __init__(self, message: str, offset: int | None = None, path: str | None = None):
        super().__init__(message)
        self.offset = offset
        self.path = path


class SpecInvariantError(ValueError):
    """Schema-valid document whose content violates spec invariants."""

    def __init__(self, report: ValidationReport):
        codes = ", ".join(sorted(report.codes()))
        super().__init__(f"spec violates invariants: {codes}")
        self.report = report


def spec_to_jsonable(spec: VignetteSpec) -> dict[str, Any]:
    env = spec.environment
    return {
        "spec_version": spec.spec_version,
        "title": spec.title,
        "story_text": spec.story_text,
        "environment": {
            "layout_id": env.layout_id,
            "grid_width": env.grid_width,
            "grid_height": env.grid_height,
            "rooms": [
                {"id": r.id, "label": r.label, "rect": list(r.rect)} for r in env.rooms
            ],
            "objects": [
                {
                    "id": o.id,
                    "name": o.name,
                    "room_id": o.room_id,
                    "position": list(o.position),
                    "footprint": list(o.footprint),
                    "actions": list(o.actions),
                    "zone": {
                        "zone_type": o.zone.zone_type.value,
                        "tiles": sorted([list(t) for t in o.zone.tiles]),
                    },
                    "kind": o.kind.value,
                    "facing": o.facing.value if o.facing else None,
                    "asset_id": o.asset_id,
                }
                for o in env.objects
            ],
        },
        "characters": [
            {
                "id": c.id,
                "role": c.role.value,
                "name": c.name,
                "age": c.age,
                "personality": c.personality,
                "social_role": c.social_role,
                "mood": c.mood,
                "language_style": c.language_style,
                "conversation_snippets": [list(s) for s in c.conversation_snippets],
                "sprite_id": c.sprite_id,
            }
            for c in spec.characters
        ],
        "key_events": [
            {
                "index": e.index,
                "activities": [
                    {
                        "character_id": a.character_id,
                        "action": a.action,
                        "object_id": a.object_id,
                    }
                    for a in e.activities
                ],
            }
            for e in spec.key_events
        ],
    }


SUPPORTED_SPEC_VERSIONS = (1,)


def spec_from_jsonable(doc: dict[str, Any]) -> VignetteSpec:
    """Build a spec from an already schema-checked document."""
    version = doc["spec_version"]
    if version not in SUPPORTED_SPEC_VERSIONS:
        # the field exists so readers can refuse what they don't understand
        raise SpecParseError(f"unsupported spec_version {version}", path="spec_version")
    env = doc["environment"]
    environment = Environment(
        layout_id=env["layout_id"],
        grid_width=env["grid_width"],
        grid_height=env["grid_height"],
        rooms=tuple(
            Room(id=r["id"], label=r["label"], rect=tuple(r["rect"])) for r in env["rooms"]
        ),
        objects=tuple(
            ObjectInstance(
                id=o["id"],
                name=o["name"],
                room_id=o["room_id"],
                position=tuple(o["position"]),
                footprint=tuple(o["footprint"]),
                actions=tuple(o["actions"]),
                zone=TriggerZone(
                    zone_type=ZoneType(o["zone"]["zone_type"]),
                    tiles=frozenset(tuple(t) for t in o["zone"]["tiles"]),
                ),
                kind=ObjectKind(o["kind"]),
                facing=Facing(o["facing"]) if o["facing"] else None,
                asset_id=o["asset_id"],
            )
            for o in env["objects"]
        ),
    )
    characters = tuple(
        Character(
            id=c["id"],
            role=Role(c["role"]),
            name=c["name"],
            age=c["age"],
            personality=c["personality"],
            social_role=c["social_role"],
            mood=c["mood"],
            language_style=c["language_style"],
            conversation_snippets=tuple(tuple(s) for s in c["conversation_snippets"]),
            sprite_id=c["sprite_id"],
        )
        for c in doc["characters"]
    )
    key_events = tuple(
        KeyEvent(
            index=e["index"],
            activities=tuple(
                ActivityTuple(
                    character_id=a["character_id"],
                    action=a["action"],
                    object_id=a["object_id"],
                )
                for a in e["activities"]
            ),
        )
        for e in doc["key_events"]
    )
    return VignetteSpec(
        story_text=doc["story_text"],
        title=doc["title"],
        environment=environment,
        characters=characters,
        key_events=key_events,
        spec_version=doc["spec_version"],
    )


def encode_spec(spec: VignetteSpec) -> bytes:
    """Serialize a valid spec to canonical bytes; invalid specs raise."""
    report = validate_spec(spec)
    if not report.ok:
        raise SpecInvariantError(report)
    doc = spec_to_jsonable(spec)
    text = json.dumps(doc, sort_keys=True, indent=2, ensure_ascii=False)
    return (text + "\n").encode("utf-8")


def decode_spec(data: bytes | str) -> VignetteSpec:
    if isinstance(data, bytes):
        try:
            text = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise SpecParseError(f"not valid UTF-8: {exc}", offset=exc.start) from exc
    else:
        text = data
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecParseError(
            f"malformed JSON at line {exc.lineno} column {exc.colno}: {exc.msg}",
            offset=exc.pos,
        ) from exc
    try:
        jsonschema.validate(doc, SPEC_SCHEMA)
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path)
        raise SpecParseError(f"schema violation at /{path}: {exc.message}", path=path) from exc
    spec = spec_from_jsonable(doc)
    report = validate_spec(spec)
    if not report.ok:
        raise SpecInvariantError(report)
    return spec
