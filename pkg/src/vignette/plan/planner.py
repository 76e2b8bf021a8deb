"""Controlled-divergence planning.

The loop per NPC: when an activity starts, immediately request a pair of
next-activity plans — plan A for the future where the player performs the
pending key event, plan B for the future where the player keeps
diverging. When the activity ends, resolve() picks one of the two based
on what the player actually did. Requesting at activity start is what
hides model latency behind the activity's duration.

Planner modes ablate the prompt conditioning:

* CD - persona block and storyline block both present.
* PO - persona only, no storyline.
* SO - storyline only, no persona.
* BL - no model-side object choice at all: the object is drawn uniformly
       at random and only the action phrase is generated for it.

Whenever the NPC is assigned an activity in the pending key event, plan A
is that authored activity verbatim, in every mode; the model never gets
to overrule the author on the convergent branch.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from enum import Enum

from vignette.core.types import ActivityTuple, Character, Environment, KeyEvent
from vignette.llm.gateway import Gateway, GatewayTransportError, PromptRequest
from vignette.llm.templates import PERSONA_BLOCK_HEADER, STORYLINE_BLOCK_HEADER

__all__ = [
    "IDLE_ACTION",
    "PlannerMode",
    "Storyline",
    "PlanPair",
    "persona_block",
    "storyline_block",
    "plan_pair",
    "resolve",
    "detect_divergence",
    "inner_voice",
    "classify_intent",
    "guide_reply",
    "chat_reply",
]

IDLE_ACTION = "idle"


class PlannerMode(str, Enum):
    CD = "cd"
    PO = "po"
    SO = "so"
    BL = "bl"


@dataclass(frozen=True)
class PastActivity:
    character_name: str
    action: str
    object_name: str
    divergent: bool


@dataclass(frozen=True)
class Storyline:
    """What the planner knows about the run so far."""

    past: tuple[PastActivity, ...]
    ongoing: tuple[tuple[str, str], ...]  # (character name, description)
    next_event_index: int | None  # None once the story is done
    next_event: KeyEvent | None
    spec_title: str = ""


@dataclass(frozen=True)
class PlanPair:
    npc_id: str
    plan_a: ActivityTuple
    plan_b: ActivityTuple
    planned_at: int
    request_latency_ms: int
    plan_a_generated: bool
    flags: tuple[str, ...] = ()
    prompts: tuple[str, ...] = field(default=(), repr=False, compare=False)


def persona_block(character: Character) -> str:
    lines = [PERSONA_BLOCK_HEADER, f"name: {character.name}"]
    for attr in Character.PERSONA_FIELDS:
        value = getattr(character, attr)
        lines.append(f"{attr}: {value if value else '(unspecified)'}")
    for author_line, char_line in character.conversation_snippets:
        lines.append(f"reference exchange: author: {author_line}")
        lines.append(f"reference exchange: {character.name}: {char_line}")
    return "\n".join(lines)


def _describe_event(event: KeyEvent | None, names: dict[str, str]) -> str:
    if event is None:
        return "(story complete)"
    parts = [
        f"{names.get(a.character_id, a.character_id)} does {a.action}"
        for a in event.activities
    ]
    return f"key event {event.index}: " + "; ".join(parts)


def storyline_block(storyline: Storyline, names: dict[str, str]) -> str:
    lines = [STORYLINE_BLOCK_HEADER, "past activities:"]
    if storyline.past:
        for item in storyline.past:
            marker = " (divergent)" if item.divergent else ""
            lines.append(
                f"- {item.character_name}: {item.action}"
                f" [{item.object_name}]{marker}"
            )
    else:
        lines.append("- (none yet)")
    lines.append("ongoing:")
    if storyline.ongoing:
        for name, description in storyline.ongoing:
            lines.append(f"- {name}: {description}")
    else:
        lines.append("- (everyone idle)")
    lines.append("next: " + _describe_event(storyline.next_event, names))
    return "\n".join(lines)


def _object_menu(env: Environment) -> str:
    menu = [
        {"object_id": obj.id, "action": action}
        for obj in sorted(env.objects, key=lambda o: o.id)
        for action in obj.actions
    ]
    return json.dumps(menu, sort_keys=True, ensure_ascii=False)


def _valid_choice(env: Environment, parsed: object) -> tuple[str, str] | None:
    if not isinstance(parsed, dict):
        return None
    object_id = parsed.get("object_id")
    action = parsed.get("action")
    obj = env.objects_by_id().get(object_id)
    if obj is None or action not in obj.actions:
        return None
    return action, object_id


def _idle_plan(npc_id: str) -> ActivityTuple:
    return ActivityTuple(character_id=npc_id, action=IDLE_ACTION, object_id="")


def _generate_plan(
    npc: Character,
    storyline: Storyline,
    env: Environment,
    mode: PlannerMode,
    gateway: Gateway,
    branch: str,
    rng: random.Random,
    names: dict[str, str],
) -> tuple[ActivityTuple, int, bool, str]:
    """One generated plan: (tuple, latency_ms, fallback_used, prompt)."""
    if mode is PlannerMode.BL:
        candidates = sorted(env.objects, key=lambda o: o.id)
        if not candidates:
            return _idle_plan(npc.id), 0, True, ""
        obj = candidates[rng.randrange(len(candidates))]
        try:
            result = gateway.complete(
                PromptRequest(
                    "BL_ACTIVITY",
                    {
                        "name": npc.name,
                        "object_name": obj.name,
                        "object_actions": json.dumps(
                            list(obj.actions), ensure_ascii=False
                        ),
                        "branch": branch,
                    },
                )
            )
        except GatewayTransportError:
            return _idle_plan(npc.id), 0, True, ""
        if not result.ok:
            return _idle_plan(npc.id), result.latency_ms, True, result.prompt
        action = result.parsed["action"]
        plan = ActivityTuple(character_id=npc.id, action=action, object_id=obj.id)
        return plan, result.latency_ms, False, result.prompt

    if branch == "follow":
        description = (
            "the player performs the next key event as written: "
            + _describe_event(storyline.next_event, names)
        )
    else:
        description = (
            "the player keeps diverging from the storyline and ignores the"
            " next key event for now"
        )
    variables = {
        "name": npc.name,
        "persona_block": persona_block(npc) if mode in (PlannerMode.CD, PlannerMode.PO) else "",
        "storyline_block": (
            storyline_block(storyline, names)
            if mode in (PlannerMode.CD, PlannerMode.SO)
            else ""
        ),
        "branch_description": description,
        "object_menu": _object_menu(env),
    }
    try:
        result = gateway.complete(PromptRequest("PLAN_ACTIVITY", variables))
    except GatewayTransportError:
        return _idle_plan(npc.id), 0, True, ""
    if not result.ok:
        return _idle_plan(npc.id), result.latency_ms, True, result.prompt
    choice = _valid_choice(env, result.parsed)
    if choice is None:
        return _idle_plan(npc.id), result.latency_ms, True, result.prompt
    action, object_id = choice
    plan = ActivityTuple(character_id=npc.id, action=action, object_id=object_id)
    return plan, result.latency_ms, False, result.prompt


def plan_pair(
    npc: Character,
    storyline: Storyline,
    env: Environment,
    mode: PlannerMode,
    gateway: Gateway,
    *,
    planned_at: int,
    rng: random.Random,
    names: dict[str, str] | None = None,
) -> PlanPair:
    """Pre-compute both futures for one NPC at activity start."""
    names = names or {}
    flags: list[str] = []
    prompts: list[str] = []

    authored = None
    if storyline.next_event is not None:
        authored = storyline.next_event.activity_for(npc.id)

    if authored is not None:
        plan_a, latency_a, a_generated = authored, 0, False
    else:
        plan_a, latency_a, a_fallback, prompt_a = _generate_plan(
            npc, storyline, env, mode, gateway, "follow", rng, names
        )
        a_generated = True
        if a_fallback:
            flags.append("plan_a_fallback")
        if prompt_a:
            prompts.append(prompt_a)

    plan_b, latency_b, b_fallback, prompt_b = _generate_plan(
        npc, storyline, env, mode, gateway, "diverge", rng, names
    )
    if b_fallback:
        flags.append("plan_b_fallback")
    if prompt_b:
        prompts.append(prompt_b)

    # Both requests go out together at activity start; the pair is ready
    # when the slower one lands.
    return PlanPair(
        npc_id=npc.id,
        plan_a=plan_a,
        plan_b=plan_b,
        planned_at=planned_at,
        request_latency_ms=max(latency_a, latency_b),
        plan_a_generated=a_generated,
        flags=tuple(flags),
        prompts=tuple(prompts),
    )


def resolve(pair: PlanPair, pc_followed_key_event: bool) -> ActivityTuple:
    """Pure branch pick: A when the player followed, B when they diverged."""
    return pair.plan_a if pc_followed_key_event else pair.plan_b


def detect_divergence(
    *,
    pc_activity: ActivityTuple | None,
    pc_authored: ActivityTuple | None,
    pc_idle_ticks: int,
    glow_active: bool,
    idle_threshold: int,
) -> bool:
    """Has the player left the storyline?

    True when the player performs any activity other than their pending
    authored one, or idles past the threshold while a glow cue is up.
    Events with no player assignment cannot be diverged from by idling;
    only an actual off-story activity counts then.
    """
    if pc_activity is not None:
        if pc_authored is None:
            return True
        if (pc_activity.action, pc_activity.object_id) != (
            pc_authored.action,
            pc_authored.object_id,
        ):
            return True
    if pc_authored is not None and glow_active and pc_idle_ticks >= idle_threshold:
        return True
    return False


def inner_voice(gateway: Gateway, action: str, object_name: str) -> str:
    """First-person nudge toward the pending authored activity."""
    try:
        result = gateway.complete(
            PromptRequest(
                "INNER_VOICE", {"action": action, "object_name": object_name}
            )
        )
    except GatewayTransportError:
        return f"Maybe I should {action} now."
    if not result.ok:
        return f"Maybe I should {action} now."
    return result.parsed["cue"]


def classify_intent(gateway: Gateway, message: str, next_action: str) -> str:
    """follow | small_talk | derail for a player chat message."""
    try:
        result = gateway.complete(
            PromptRequest(
                "DIVERGENCE_INTENT", {"message": message, "action": next_action}
            )
        )
    except GatewayTransportError:
        return "small_talk"
    if not result.ok:
        return "small_talk"
    return result.parsed["intent"]


def guide_reply(
    gateway: Gateway, npc: Character, message: str, next_action: str
) -> str:
    """In-persona reply that defends the next key event."""
    try:
        result = gateway.complete(
            PromptRequest(
                "GUIDE_REPLY",
                {
                    "name": npc.name,
                    "persona_block": persona_block(npc),
                    "message": message,
                    "action": next_action,
                },
            )
        )
    except GatewayTransportError:
        return f"Let's not skip {next_action}. Do it with me?"
    if not result.ok:
        return f"Let's not skip {next_action}. Do it with me?"
    return result.parsed["reply"]


def chat_reply(
    gateway: Gateway,
    npc: Character,
    history: tuple[tuple[str, str], ...],
    message: str,
) -> str:
    """Ordinary persona-conditioned chat reply.

    history pairs are (speaker, line); stored conversation snippets ride
    in via the persona block.
    """
    if history:
        rendered = "\n".join(f"{speaker}: {line}" for speaker, line in history)
    else:
        rendered = "(no conversation yet)"
    try:
        result = gateway.complete(
            PromptRequest(
                "CHAR_CHAT",
                {
                    "name": npc.name,
                    "persona_block": persona_block(npc),
                    "history": rendered,
                    "message": message,
                },
            )
        )
    except GatewayTransportError:
        return "Sorry, I lost my train of thought."
    if not result.ok:
        return "Sorry, I lost my train of thought."
    return result.parsed["reply"]
