"""Prompt templates.

Each template is plain text with str.format placeholders. Rendering is
strict: every placeholder must be covered by the request's variables
(extra variables are fine, they still participate in mock-script keys).

Persona and storyline conditioning arrive as pre-built text blocks in the
``persona_block`` / ``storyline_block`` variables. The blocks carry fixed
header lines so tests (and the ablation harness) can assert their
presence or absence in a rendered prompt with a plain substring check.
An ablated block is the empty string.
"""

from __future__ import annotations

import string

__all__ = [
    "PERSONA_BLOCK_HEADER",
    "STORYLINE_BLOCK_HEADER",
    "TEMPLATE_IDS",
    "TEMPLATES",
    "TEMPERATURES",
    "default_schema_id",
    "placeholders",
    "render_template",
]

PERSONA_BLOCK_HEADER = "[PERSONA]"
STORYLINE_BLOCK_HEADER = "[STORYLINE]"

TEMPLATES: dict[str, str] = {
    "EXTRACT_CHARACTERS": (
        "You read a short first-person story and list its characters.\n"
        "Story:\n{story}\n\n"
        "List every distinct character. The narrator (first-person pronoun)"
        " is the player character. Give persona attributes only when the"
        " story states them explicitly; otherwise use null. Do not infer"
        " personality, social role, mood, language style, or age.\n"
        'Reply as JSON: {{"characters": [{{"name": "...", "is_pc": true,'
        ' "personality": null, "social_role": null, "mood": null,'
        ' "language_style": null, "age": null}}]}}'
    ),
    "SELECT_LAYOUT": (
        "Classify the setting of this story.\n"
        "Story:\n{story}\n\n"
        "Available layout tags: {tags}\n"
        'Reply as JSON: {{"tag": "<one of the tags>"}}'
    ),
    "LABEL_ROOMS": (
        "Label each room of a floor plan so it fits this story.\n"
        "Story:\n{story}\n\n"
        "Rooms with their current labels: {rooms}\n"
        "Keep labels that already fit. Every room needs a label.\n"
        'Reply as JSON: {{"labels": {{"<room_id>": "<label>"}}}}'
    ),
    "EXTRACT_EVENTS": (
        "You break a story into concrete character activities.\n"
        "Story:\n{story}\n\n"
        "Characters: {characters}\n"
        "Objects available in the scene: {objects}\n"
        "Task: {phase_instructions}\n"
        "{phase_payload}"
    ),
    "AFFORDANCE": (
        "Describe how people typically interact with an object placed in a"
        " tile-based scene.\n"
        "Object name: {object_name}\n"
        "Trigger zone types: on (stand on it, like a bed), partial (stand on"
        " part of it, like sofa seats), around (stand beside any side, like"
        " a table), directional (stand on one facing side, like a fridge).\n"
        'Reply as JSON: {{"actions": ["..."], "zone_type": "...",'
        ' "needs_facing": false, "footprint": [1, 1]}}'
    ),
    "PLACE_REASONING": (
        "Placement constraints for one object in a furnished scene.\n"
        "Object: {object_name}\n"
        "Objects already in the scene: {placed_names}\n"
        "Say whether it belongs against a wall, and whether it should sit"
        " within a few tiles of one of the existing objects.\n"
        'Reply as JSON: {{"wall_adjacent": false, "near": {{"target_name":'
        ' "...", "max_dist": 1}}}} (near may be null)'
    ),
    "PERSONA_SUGGEST": (
        "Suggest persona attributes for a story character based on a"
        " conversation with the author.\n"
        "Character: {name}\n"
        "Current attributes: {attributes}\n"
        "Conversation:\n{snippets}\n"
        "Suggest values only for attributes that are currently null.\n"
        'Reply as JSON: {{"suggestions": {{"<attribute>": "<value>"}}}}'
    ),
    "CHAR_CHAT": (
        "You are {name}, a character in an interactive story.\n"
        "{persona_block}\n"
        "Conversation so far:\n{history}\n"
        "The player says: {message}\n"
        "Reply in character, one or two short sentences.\n"
        'Reply as JSON: {{"reply": "..."}}'
    ),
    "PLAN_ACTIVITY": (
        "You plan the next activity of {name}, a character in an"
        " interactive scene.\n"
        "{persona_block}\n"
        "{storyline_block}\n"
        "Assumed future: {branch_description}\n"
        "Choose the most believable next activity from this menu of"
        " (object_id, action) options:\n{object_menu}\n"
        'Reply as JSON: {{"action": "...", "object_id": "..."}}'
    ),
    "INNER_VOICE": (
        "Write the player character's inner thought nudging them toward the"
        " next story beat.\n"
        "Next activity: {action} (object: {object_name})\n"
        "One short first-person sentence, warm and gentle, no commands.\n"
        'Reply as JSON: {{"cue": "..."}}'
    ),
    "GUIDE_REPLY": (
        "You are {name}, a character in an interactive story.\n"
        "{persona_block}\n"
        "The player just told you: {message}\n"
        "They are drifting away from the story. The next story beat needs"
        " the player to: {action}.\n"
        "Reply in character: show the activity matters to you and invite"
        " the player to do it together. Never scold, never block.\n"
        'Reply as JSON: {{"reply": "..."}}'
    ),
    "DIVERGENCE_INTENT": (
        "Classify the player's message with respect to the next story"
        ' activity "{action}".\n'
        "Message: {message}\n"
        "Categories: follow (cooperating with the activity), small_talk"
        " (unrelated or neutral chat), derail (refusing, skipping, or"
        " abandoning the activity).\n"
        'Reply as JSON: {{"intent": "<category>"}}'
    ),
    "BL_ACTIVITY": (
        "Invent a plausible activity for {name} using the object below.\n"
        "Object: {object_name}\n"
        "Typical actions: {object_actions}\n"
        'Reply as JSON: {{"action": "..."}}'
    ),
}

TEMPLATE_IDS: tuple[str, ...] = tuple(TEMPLATES)

# Extraction-side calls want reproducible output; in-scene dialogue and
# planning may use mild sampling on a live provider. The mock ignores this.
TEMPERATURES: dict[str, float] = {
    "EXTRACT_CHARACTERS": 0.0,
    "SELECT_LAYOUT": 0.0,
    "LABEL_ROOMS": 0.0,
    "EXTRACT_EVENTS": 0.0,
    "AFFORDANCE": 0.0,
    "PLACE_REASONING": 0.0,
    "PERSONA_SUGGEST": 0.7,
    "CHAR_CHAT": 0.7,
    "PLAN_ACTIVITY": 0.7,
    "INNER_VOICE": 0.7,
    "GUIDE_REPLY": 0.7,
    "DIVERGENCE_INTENT": 0.0,
    "BL_ACTIVITY": 0.7,
}


def default_schema_id(template_id: str) -> str:
    return template_id.lower()


def placeholders(template_id: str) -> set[str]:
    text = TEMPLATES[template_id]
    return {
        field
        for _, field, _, _ in string.Formatter().parse(text)
        if field is not None and field != ""
    }


def render_template(template_id: str, variables: dict) -> str:
    """Render a template, requiring every placeholder to be covered."""
    if template_id not in TEMPLATES:
        raise KeyError(f"unknown template: {template_id!r}")
    needed = placeholders(template_id)
    missing = needed - set(variables)
    if missing:
        raise ValueError(
            f"{template_id}: missing variables {sorted(missing)!r}"
        )
    return TEMPLATES[template_id].format(
        **{k: variables[k] for k in needed}
    )
