"""Staged story-to-vignette extraction with author confirmations."""

from vignette.extract.pipeline import (
    CharacterCapExceeded,
    ExtractionFailed,
    NoNarratorError,
    extract_characters,
    extract_events,
    label_rooms,
    select_layout,
    simulate_chat,
    suggest_persona,
)
from vignette.extract.session import (
    MAX_STORY_CHARS,
    STAGES,
    DraftInvalidError,
    ExtractionSession,
    StageError,
    StoryError,
)

__all__ = [
    "CharacterCapExceeded",
    "ExtractionFailed",
    "NoNarratorError",
    "extract_characters",
    "extract_events",
    "label_rooms",
    "select_layout",
    "simulate_chat",
    "suggest_persona",
    "MAX_STORY_CHARS",
    "STAGES",
    "DraftInvalidError",
    "ExtractionSession",
    "StageError",
    "StoryError",
]
