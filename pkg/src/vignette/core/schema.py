"""Structural JSON schema for the .vignette.json document format.

This is the schema published in docs/spec-schema; a test keeps the two
copies identical.  The schema covers structure only; cross-reference
invariants are enforced by validate_spec after decoding.
"""

from __future__ import annotations

_TILE = {
    "type": "array",
    "items": {"type": "integer"},
    "minItems": 2,
    "maxItems": 2,
}

_NULLABLE_STR = {"type": ["string", "null"]}

SPEC_SCHEMA: dict = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "$id": "vignette.schema.json",
    "title": "Interactive vignette specification",
    "type": "object",
    "required": [
        "spec_version",
        "title",
        "story_text",
        "environment",
        "characters",
        "key_events",
    ],
    "additionalProperties": False,
    "properties": {
        "spec_version": {"type": "integer", "minimum": 1},
        "title": {"type": "string"},
        "story_text": {"type": "string"},
        "environment": {
            "type": "object",
            "required": ["layout_id", "grid_width", "grid_height", "rooms", "objects"],
            "additionalProperties": False,
            "properties": {
                "layout_id": {"type": "string"},
                "grid_width": {"type": "integer", "minimum": 1},
                "grid_height": {"type": "integer", "minimum": 1},
                "rooms": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "required": ["id", "label", "rect"],
                        "additionalProperties": False,
                        "properties": {
                            "id": {"type": "string"},
                            "label": {"type": "string"},
                            "rect": {
                                "type": "array",
                                "items": {"type": "integer"},
                                "minItems": 4,
                                "maxItems": 4,
                            },
                        },
                    },
                },
                "objects": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "required": [
                            "id",
                            "name",
                            "room_id",
                            "position",
                            "footprint",
                            "actions",
                            "zone",
                            "kind",
                            "facing",
                            "asset_id",
                        ],
                        "additionalProperties": False,
                        "properties": {
                            "id": {"type": "string"},
                            "name": {"type": "string"},
                            "room_id": {"type": "string"},
                            "position": _TILE,
                            "footprint": _TILE,
                            "actions": {"type": "array", "items": {"type": "string"}},
                            "zone": {
                                "type": "object",
                                "required": ["zone_type", "tiles"],
                                "additionalProperties": False,
                                "properties": {
                                    "zone_type": {
                                        "enum": ["on", "partial", "around", "directional"]
                                    },
                                    "tiles": {"type": "array", "items": _TILE},
                                },
                            },
                            "kind": {
                                "enum": ["necessary_event", "necessary_room", "decorative"]
                            },
                            "facing": {
                                "enum": ["north", "south", "east", "west", None]
                            },
                            "asset_id": {"type": "string"},
                        },
                    },
                },
            },
        },
        "characters": {
            "type": "array",
            "items": {
                "type": "object",
                "required": [
                    "id",
                    "role",
                    "name",
                    "age",
                    "personality",
                    "social_role",
                    "mood",
                    "language_style",
                    "conversation_snippets",
                    "sprite_id",
                ],
                "additionalProperties": False,
                "properties": {
                    "id": {"type": "string"},
                    "role": {"enum": ["pc", "npc"]},
                    "name": {"type": "string"},
                    "age": _NULLABLE_STR,
                    "personality": _NULLABLE_STR,
                    "social_role": _NULLABLE_STR,
                    "mood": _NULLABLE_STR,
                    "language_style": _NULLABLE_STR,
                    "conversation_snippets": {
                        "type": "array",
                        "items": {
                            "type": "array",
                            "items": {"type": "string"},
                            "minItems": 2,
                            "maxItems": 2,
                        },
                    },
                    "sprite_id": {"type": "string"},
                },
            },
        },
        "key_events": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["index", "activities"],
                "additionalProperties": False,
                "properties": {
                    "index": {"type": "integer", "minimum": 0},
                    "activities": {
                        "type": "array",
                        "items": {
                            "type": "object",
                            "required": ["character_id", "action", "object_id"],
                            "additionalProperties": False,
                            "properties": {
                                "character_id": {"type": "string"},
                                "action": {"type": "string"},
                                "object_id": {"type": "string"},
                            },
                        },
                    },
                },
            },
        },
    },
}
