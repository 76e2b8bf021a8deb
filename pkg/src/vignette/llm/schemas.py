"""JSON schemas for structured model output, one per template.

EXTRACT_EVENTS runs in three phases with different shapes, so it gets
three schema ids; every other template uses the id of its template in
lower case (see templates.default_schema_id).
"""

from __future__ import annotations

import jsonschema

__all__ = ["OUTPUT_SCHEMAS", "validate_output"]

_NULLABLE_STR = {"type": ["string", "null"]}

OUTPUT_SCHEMAS: dict[str, dict] = {
    "extract_characters": {
        "type": "object",
        "required": ["characters"],
        "additionalProperties": False,
        "properties": {
            "characters": {
                "type": "array",
                "items": {
                    "type": "object",
                    "required": ["name", "is_pc"],
                    "additionalProperties": False,
                    "properties": {
                        "name": {"type": "string", "minLength": 1},
                        "is_pc": {"type": "boolean"},
                        "personality": _NULLABLE_STR,
                        "social_role": _NULLABLE_STR,
                        "mood": _NULLABLE_STR,
                        "language_style": _NULLABLE_STR,
                        "age": _NULLABLE_STR,
                    },
                },
            }
        },
    },
    "select_layout": {
        "type": "object",
        "required": ["tag"],
        "additionalProperties": False,
        "properties": {"tag": {"type": "string"}},
    },
    "label_rooms": {
        "type": "object",
        "required": ["labels"],
        "additionalProperties": False,
        "properties": {
            "labels": {
                "type": "object",
                "additionalProperties": {"type": "string", "minLength": 1},
            }
        },
    },
    "extract_events.actions": {
        "type": "object",
        "required": ["actions"],
        "additionalProperties": False,
        "properties": {
            "actions": {
                "type": "array",
                "items": {
                    "type": "object",
                    "required": ["character", "action", "object_name"],
                    "additionalProperties": False,
                    "properties": {
                        "character": {"type": "string", "minLength": 1},
                        "action": {"type": "string", "minLength": 1},
                        "object_name": {"type": ["string", "null"]},
                    },
                },
            }
        },
    },
    "extract_events.groups": {
        "type": "object",
        "required": ["groups"],
        "additionalProperties": False,
        "properties": {
            "groups": {
                "type": "array",
                "items": {
                    "type": "array",
                    "items": {"type": "integer", "minimum": 1},
                    "minItems": 1,
                },
            }
        },
    },
    "extract_events.order": {
        "type": "object",
        "required": ["order"],
        "additionalProperties": False,
        "properties": {
            "order": {
                "type": "array",
                "items": {"type": "integer", "minimum": 0},
            }
        },
    },
    "affordance": {
        "type": "object",
        "required": ["actions", "zone_type", "needs_facing"],
        "additionalProperties": False,
        "properties": {
            "actions": {
                "type": "array",
                "items": {"type": "string", "minLength": 1},
                "minItems": 1,
            },
            "zone_type": {
                "enum": ["on", "partial", "around", "directional"]
            },
            "needs_facing": {"type": "boolean"},
            "footprint": {
                "type": "array",
                "items": {"type": "integer", "minimum": 1, "maximum": 4},
                "minItems": 2,
                "maxItems": 2,
            },
        },
    },
    "place_reasoning": {
        "type": "object",
        "required": ["wall_adjacent", "near"],
        "additionalProperties": False,
        "properties": {
            "wall_adjacent": {"type": "boolean"},
            "near": {
                "oneOf": [
                    {"type": "null"},
                    {
                        "type": "object",
                        "required": ["target_name", "max_dist"],
                        "additionalProperties": False,
                        "properties": {
                            "target_name": {"type": "string"},
                            "max_dist": {
                                "type": "integer",
                                "minimum": 0,
                                "maximum": 5,
                            },
                        },
                    },
                ]
            },
        },
    },
    "persona_suggest": {
        "type": "object",
        "required": ["suggestions"],
        "additionalProperties": False,
        "properties": {
            "suggestions": {
                "type": "object",
                "propertyNames": {
                    "enum": [
                        "personality",
                        "social_role",
                        "mood",
                        "language_style",
                        "age",
                    ]
                },
                "additionalProperties": {"type": "string", "minLength": 1},
            }
        },
    },
    "char_chat": {
        "type": "object",
        "required": ["reply"],
        "additionalProperties": False,
        "properties": {"reply": {"type": "string", "minLength": 1}},
    },
    "plan_activity": {
        "type": "object",
        "required": ["action", "object_id"],
        "additionalProperties": False,
        "properties": {
            "action": {"type": "string", "minLength": 1},
            "object_id": {"type": "string", "minLength": 1},
        },
    },
    "inner_voice": {
        "type": "object",
        "required": ["cue"],
        "additionalProperties": False,
        "properties": {"cue": {"type": "string", "minLength": 1}},
    },
    "guide_reply": {
        "type": "object",
        "required": ["reply"],
        "additionalProperties": False,
        "properties": {"reply": {"type": "string", "minLength": 1}},
    },
    "divergence_intent": {
        "type": "object",
        "required": ["intent"],
        "additionalProperties": False,
        "properties": {
            "intent": {"enum": ["follow", "small_talk", "derail"]}
        },
    },
    "bl_activity": {
        "type": "object",
        "required": ["action"],
        "additionalProperties": False,
        "properties": {"action": {"type": "string", "minLength": 1}},
    },
}


def validate_output(schema_id: str, value: object) -> str | None:
    """None when value conforms, else a one-line error description."""
    schema = OUTPUT_SCHEMAS.get(schema_id)
    if schema is None:
        raise KeyError(f"unknown output schema: {schema_id!r}")
    validator = jsonschema.Draft202012Validator(schema)
    for error in sorted(validator.iter_errors(value), key=str):
        path = "/".join(str(p) for p in error.absolute_path) or "<root>"
        return f"{path}: {error.message}"
    return None
