"""NPC planning: branch-aware activity pairs, divergence cues, chat guidance."""

from vignette.plan.planner import (
    IDLE_ACTION,
    PlanPair,
    PlannerMode,
    Storyline,
    chat_reply,
    classify_intent,
    detect_divergence,
    guide_reply,
    inner_voice,
    persona_block,
    plan_pair,
    resolve,
    storyline_block,
)

__all__ = [
    "IDLE_ACTION",
    "PlanPair",
    "PlannerMode",
    "Storyline",
    "chat_reply",
    "classify_intent",
    "detect_divergence",
    "guide_reply",
    "inner_voice",
    "persona_block",
    "plan_pair",
    "resolve",
    "storyline_block",
]
