"""Story-to-elements extraction steps.

Each function here is one model-backed step of the authoring pipeline:
characters, layout, room labels, key events, persona suggestions and the
author-facing chat simulation. They are deliberately stage-free — the
session object owns ordering and confirmation — so each can be exercised
alone in tests with a scripted provider.

Extraction is conservative by contract: persona attributes the story does
not state stay blank, the narrator must be first person, and anything the
model gets structurally wrong (bad grouping, invented orderings) is
rejected in favor of the story's own mention order rather than repaired
by guesswork.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass

from vignette.build.layouts import LayoutCatalog, LayoutTemplate
from vignette.core.types import (
    ActivityTuple,
    Character,
    Environment,
    KeyEvent,
    Role,
    VignetteSpec,
)
from vignette.llm.gateway import Gateway, PromptRequest, REFUSAL_LINE
from vignette.plan.planner import chat_reply

__all__ = [
    "CharacterCapExceeded",
    "ExtractionFailed",
    "NoNarratorError",
    "advisory",
    "extract_characters",
    "select_layout",
    "label_rooms",
    "extract_events",
    "suggest_persona",
    "simulate_chat",
]

# sprite ids ship with the asset catalog; assignment is positional so the
# same story always dresses its cast the same way
_SPRITES = tuple(f"sprite_person_{i}" for i in range(1, 7))

_PLURAL_PRONOUN = re.compile(r"\b(we|us|our|ours)\b", re.IGNORECASE)


def advisory(code: str, message: str) -> dict[str, str]:
    """Author-facing advisory; never blocks the pipeline."""
    return {"code": code, "message": message}


class ExtractionFailed(ValueError):
    """The model's answer stayed unusable after all repair attempts."""

    def __init__(self, step: str, detail: str):
        super().__init__(f"{step}: {detail}")
        self.step = step
        self.detail = detail


class NoNarratorError(ValueError):
    """Story has no first-person narrator to map onto the player."""

    def __init__(self) -> None:
        super().__init__(
            "no first-person narrator found; the story must be told by"
            " the player character"
        )


class CharacterCapExceeded(ValueError):
    """More characters than a vignette supports; carries the full list."""

    def __init__(self, detected: tuple[Character, ...], cap: int):
        names = ", ".join(c.name for c in detected)
        super().__init__(f"{len(detected)} characters detected (cap {cap}): {names}")
        self.detected = detected
        self.cap = cap


def _slug(name: str) -> str:
    out = re.sub(r"[^a-z0-9]+", "_", name.lower()).strip("_")
    return out or "char"


def _clean(value: object) -> str | None:
    if value is None:
        return None
    text = str(value).strip()
    return text or None


def extract_characters(
    story: str,
    gateway: Gateway,
    *,
    keep: list[str] | None = None,
    cap: int = VignetteSpec.MAX_CHARACTERS,
) -> tuple[tuple[Character, ...], list[dict[str, str]]]:
    """Story -> cast with persona fields only where the story states them.

    keep, when given, drops detected characters whose names are not in it
    (the merge/drop workflow after a cap overflow). The narrator is not
    droppable.
    """
    warnings: list[dict[str, str]] = []
    result = gateway.complete(PromptRequest("EXTRACT_CHARACTERS", {"story": story}))
    if not result.ok:
        raise ExtractionFailed("extract_characters", result.error or "no reply")
    entries = result.parsed["characters"]

    # normalize the raw list: blank names are useless, duplicates merge
    seen: dict[str, dict] = {}
    for entry in entries:
        name = _clean(entry.get("name"))
        if name is None:
            warnings.append(
                advisory("CHARACTER_DROPPED", "a detected character had no name")
            )
            continue
        lower = name.lower()
        if lower in seen:
            seen[lower]["is_pc"] = seen[lower]["is_pc"] or bool(entry.get("is_pc"))
            warnings.append(
                advisory("CHARACTER_MERGED", f"duplicate mention of {name!r} merged")
            )
            continue
        seen[lower] = dict(entry, name=name)

    raw = list(seen.values())
    pcs = [e for e in raw if e.get("is_pc")]
    if not pcs:
        raise NoNarratorError()
    if len(pcs) > 1:
        for extra in pcs[1:]:
            extra["is_pc"] = False
        warnings.append(
            advisory(
                "EXTRA_NARRATOR_DEMOTED",
                "model flagged several narrators; only the first stays the player",
            )
        )

    if keep is not None:
        wanted = {k.strip().lower() for k in keep}
        unknown = wanted - {e["name"].lower() for e in raw}
        if unknown:
            raise ValueError(f"keep list names unknown characters: {sorted(unknown)}")
        narrator = pcs[0]["name"].lower()
        if narrator not in wanted:
            raise ValueError("the narrator cannot be dropped from the cast")
        raw = [e for e in raw if e["name"].lower() in wanted]

    characters = _build_cast(raw)
    if len(characters) > cap:
        raise CharacterCapExceeded(characters, cap)
    if _PLURAL_PRONOUN.search(story):
        warnings.append(
            advisory(
                "NEEDS_REVIEW",
                "story uses a plural pronoun (we/us/our); check that every"
                " activity is attributed to the right character",
            )
        )
    return characters, warnings


def _build_cast(raw: list[dict]) -> tuple[Character, ...]:
    used_ids: set[str] = set()
    out: list[Character] = []
    for i, entry in enumerate(raw):
        role = Role.PC if entry.get("is_pc") else Role.NPC
        base = f"{role.value}_{_slug(entry['name'])}"
        cid = base
        n = 2
        while cid in used_ids:
            cid = f"{base}_{n}"
            n += 1
        used_ids.add(cid)
        out.append(
            Character(
                id=cid,
                role=role,
                name=entry["name"],
                age=_clean(entry.get("age")),
                personality=_clean(entry.get("personality")),
                social_role=_clean(entry.get("social_role")),
                mood=_clean(entry.get("mood")),
                language_style=_clean(entry.get("language_style")),
                sprite_id=_SPRITES[i % len(_SPRITES)],
            )
        )
    return tuple(out)


def select_layout(
    story: str, gateway: Gateway, layouts: LayoutCatalog
) -> tuple[LayoutTemplate, list[dict[str, str]]]:
    """Pick the floor plan whose tag fits the story; residential otherwise."""
    tags: list[str] = []
    for layout in layouts.layouts:
        if layout.setting not in tags:
            tags.append(layout.setting)
    answer: str | None = None
    try:
        result = gateway.complete(
            PromptRequest("SELECT_LAYOUT", {"story": story, "tags": ", ".join(tags)})
        )
        if result.ok:
            answer = str(result.parsed["tag"]).strip().lower()
    except Exception:
        answer = None
    if answer in tags:
        return layouts.for_setting(answer), []
    fallback = layouts.for_setting("residential")
    return fallback, [
        advisory(
            "LAYOUT_FALLBACK",
            f"setting {answer!r} matched no layout; using {fallback.layout_id}",
        )
    ]


def label_rooms(
    story: str, gateway: Gateway, layout: LayoutTemplate
) -> tuple[dict[str, str], list[dict[str, str]]]:
    """Label every room of the layout to fit the story.

    Rooms the model skips (or a failed call) keep their template default,
    so the result always covers the full floor plan.
    """
    defaults = {rid: label for rid, label, _rect in layout.rooms}
    proposed: dict[str, object] = {}
    warnings: list[dict[str, str]] = []
    try:
        result = gateway.complete(
            PromptRequest(
                "LABEL_ROOMS",
                {"story": story, "rooms": json.dumps(defaults, sort_keys=True)},
            )
        )
        if result.ok:
            proposed = dict(result.parsed["labels"])
        else:
            warnings.append(
                advisory("LABELS_FALLBACK", "room labeling failed; defaults kept")
            )
    except Exception:
        warnings.append(
            advisory("LABELS_FALLBACK", "room labeling failed; defaults kept")
        )
    labels = {}
    for rid, default in defaults.items():
        labels[rid] = _clean(proposed.get(rid)) or default
    return labels, warnings


# ---------------------------------------------------------------------------
# key events: three model calls, each structurally checked


@dataclass(frozen=True)
class _DraftAction:
    """One phase-1 row, in story mention order."""

    character_id: str
    character_name: str
    action: str
    object_id: str  # "" when unmatched
    object_name: str | None


def _match_object(name: str | None, env: Environment) -> str:
    if name is None:
        return ""
    wanted = " ".join(name.strip().lower().split())
    if not wanted:
        return ""
    exact = [o for o in env.objects if o.name.strip().lower() == wanted]
    if exact:
        return min(exact, key=lambda o: o.id).id
    loose = [
        o
        for o in env.objects
        if wanted in o.name.strip().lower() or o.name.strip().lower() in wanted
    ]
    if loose:
        return min(loose, key=lambda o: o.id).id
    return ""


def extract_events(
    story: str,
    characters: tuple[Character, ...],
    env: Environment,
    gateway: Gateway,
) -> tuple[tuple[KeyEvent, ...], list[dict], list[dict[str, str]]]:
    """Story -> ordered key events, in three checked phases.

    Phase 1 lists activities in mention order and matches each to a scene
    object (a miss becomes a NEEDS_OBJECT flag, not an invention). Phase 2
    asks the model to group simultaneous activities; a reply that is not a
    partition into runs of adjacent mentions is rejected for singleton
    groups. Phase 3 asks for the chronological order, but mention order
    always wins — a disagreeing model just earns an ORDER_ADJUSTED flag.
    """
    warnings: list[dict[str, str]] = []
    base = {
        "story": story,
        "characters": json.dumps(
            [{"id": c.id, "name": c.name} for c in characters], sort_keys=True
        ),
        "objects": json.dumps(
            sorted(
                ({"object_id": o.id, "name": o.name} for o in env.objects),
                key=lambda d: d["object_id"],
            ),
            sort_keys=True,
        ),
    }

    result = gateway.complete(
        PromptRequest(
            "EXTRACT_EVENTS",
            {
                **base,
                "phase_instructions": (
                    "List every concrete activity the story describes, in the"
                    " order the story mentions them. Name the character, a"
                    " short action phrase, and the best-matching scene object"
                    " (or null if nothing in the scene fits)."
                ),
                "phase_payload": "",
            },
            output_schema_id="extract_events.actions",
        )
    )
    if not result.ok:
        raise ExtractionFailed("extract_events", result.error or "no reply")

    by_name = {c.name.lower(): c for c in characters}
    drafts: list[_DraftAction] = []
    for row in result.parsed["actions"]:
        who = str(row["character"]).strip()
        char = by_name.get(who.lower())
        if char is None:
            warnings.append(
                advisory(
                    "UNKNOWN_CHARACTER_DROPPED",
                    f"activity for unknown character {who!r} dropped",
                )
            )
            continue
        action = _clean(row["action"])
        if action is None:
            continue
        drafts.append(
            _DraftAction(
                character_id=char.id,
                character_name=char.name,
                action=action,
                object_id=_match_object(row.get("object_name"), env),
                object_name=_clean(row.get("object_name")),
            )
        )
    if not drafts:
        return (), [], warnings

    groups = _group_actions(base, drafts, gateway, warnings)
    _order_groups(base, drafts, groups, gateway, warnings)

    events: list[KeyEvent] = []
    needs_object: list[dict] = []
    for index, group in enumerate(groups):
        activities = []
        for i in group:
            d = drafts[i]
            activities.append(
                ActivityTuple(
                    character_id=d.character_id, action=d.action, object_id=d.object_id
                )
            )
            if not d.object_id:
                needs_object.append(
                    {
                        "event": index,
                        "character_id": d.character_id,
                        "action": d.action,
                        "object_name": d.object_name,
                        "flag": "NEEDS_OBJECT",
                    }
                )
        events.append(KeyEvent(index=index, activities=tuple(activities)))
    return tuple(events), needs_object, warnings


def _group_actions(
    base: dict,
    drafts: list[_DraftAction],
    gateway: Gateway,
    warnings: list[dict[str, str]],
) -> list[list[int]]:
    """Phase 2; returns groups as 0-based draft indices in mention order."""
    numbered = "\n".join(
        f"{i + 1}. {d.character_name}: {d.action}"
        + (f" (object: {d.object_name})" if d.object_name else "")
        for i, d in enumerate(drafts)
    )
    singletons = [[i] for i in range(len(drafts))]
    try:
        result = gateway.complete(
            PromptRequest(
                "EXTRACT_EVENTS",
                {
                    **base,
                    "phase_instructions": (
                        "Group the numbered activities below into simultaneous"
                        " events. Only merge activities that happen at the same"
                        " time; keep the story's order. Every number must"
                        " appear in exactly one group."
                    ),
                    "phase_payload": numbered,
                    "action_count": len(drafts),
                },
                output_schema_id="extract_events.groups",
            )
        )
    except Exception:
        warnings.append(advisory("GROUPING_REJECTED", "grouping call failed"))
        return singletons
    if not result.ok:
        warnings.append(advisory("GROUPING_REJECTED", "grouping reply malformed"))
        return singletons

    proposed = [sorted(int(i) for i in g) for g in result.parsed["groups"]]
    flat = sorted(i for g in proposed for i in g)
    ok = flat == list(range(1, len(drafts) + 1))
    # merging only adjacent mentions: every group is a contiguous run
    ok = ok and all(g[-1] - g[0] + 1 == len(g) for g in proposed if g)
    if ok:
        for g in proposed:
            chars = [drafts[i - 1].character_id for i in g]
            if len(chars) != len(set(chars)):
                ok = False
                break
    if not ok:
        warnings.append(
            advisory(
                "GROUPING_REJECTED",
                "grouping was not a clean partition of adjacent activities;"
                " using one event per activity",
            )
        )
        return singletons
    ordered = sorted(proposed, key=lambda g: g[0])
    return [[i - 1 for i in g] for g in ordered]


def _order_groups(
    base: dict,
    drafts: list[_DraftAction],
    groups: list[list[int]],
    gateway: Gateway,
    warnings: list[dict[str, str]],
) -> None:
    """Phase 3; purely advisory — mention order is authoritative."""
    if len(groups) < 2:
        return
    described = "\n".join(
        f"{gi}: " + "; ".join(f"{drafts[i].character_name} {drafts[i].action}" for i in g)
        for gi, g in enumerate(groups)
    )
    try:
        result = gateway.complete(
            PromptRequest(
                "EXTRACT_EVENTS",
                {
                    **base,
                    "phase_instructions": (
                        "Give the chronological order of the numbered event"
                        " groups below, as a list of group numbers."
                    ),
                    "phase_payload": described,
                    "group_count": len(groups),
                },
                output_schema_id="extract_events.order",
            )
        )
    except Exception:
        warnings.append(advisory("ORDER_ADJUSTED", "ordering call failed"))
        return
    if not result.ok:
        warnings.append(advisory("ORDER_ADJUSTED", "ordering reply malformed"))
        return
    order = [int(i) for i in result.parsed["order"]]
    if order != list(range(len(groups))):
        warnings.append(
            advisory(
                "ORDER_ADJUSTED",
                "model proposed a different event order; keeping the story's"
                " mention order",
            )
        )


def suggest_persona(
    character: Character, gateway: Gateway
) -> dict[str, str]:
    """Suggest values for blank persona fields from chat snippets.

    Fields the author already filled are never suggested, whatever the
    model returns. Needs at least one stored snippet to work from.
    """
    if not character.conversation_snippets:
        raise ValueError("persona suggestions need at least one chat snippet")
    blanks = set(character.blank_persona_fields())
    if not blanks:
        return {}
    attributes = {f: getattr(character, f) for f in Character.PERSONA_FIELDS}
    rendered = "\n".join(
        f"{speaker}: {line}" for speaker, line in character.conversation_snippets
    )
    try:
        result = gateway.complete(
            PromptRequest(
                "PERSONA_SUGGEST",
                {
                    "name": character.name,
                    "attributes": json.dumps(attributes, sort_keys=True),
                    "snippets": rendered,
                },
            )
        )
    except Exception:
        return {}
    if not result.ok:
        return {}
    out = {}
    for field_name, value in result.parsed["suggestions"].items():
        cleaned = _clean(value)
        if field_name in blanks and cleaned is not None:
            out[field_name] = cleaned
    return out


def simulate_chat(character: Character, message: str, gateway: Gateway) -> str:
    """One author<->character exchange during persona editing.

    The reply is proposed, not stored: the author may edit it before the
    session records the pair as a conversation snippet. Moderation applies
    on both directions and withholds with the standard refusal line.
    """
    inbound = gateway.moderate(message)
    if not inbound.allowed:
        return REFUSAL_LINE
    reply = chat_reply(gateway, character, character.conversation_snippets, message)
    outbound = gateway.moderate(reply)
    if not outbound.allowed:
        return REFUSAL_LINE
    return reply
