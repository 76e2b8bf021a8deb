"""The bundled dinner vignette: a fully scripted sample run.

Ships with the package so demos, tests, and the CLI can exercise the
whole pipeline offline: a three-character story (cooking with Julie,
dinner together, Jack's guitar and Julie's song), the mock script that
answers every extraction and planning prompt for it, a frozen authored
spec, and a recorded viewer trace whose replay is byte-deterministic.

``demos/dinner_walkthrough.py --write`` regenerates the frozen spec and
trace from the story + script sources.
"""

from __future__ import annotations

import json
from importlib import resources

from vignette.core.serialize import decode_spec
from vignette.core.types import VignetteSpec
from vignette.harness.trace import ViewerTrace, load_trace
from vignette.llm.gateway import Gateway
from vignette.llm.providers import ScriptedMockProvider
from vignette.runtime import RuntimeConfig

__all__ = [
    "DINNER_CONFIG",
    "DINNER_SEED",
    "dinner_story",
    "dinner_script",
    "dinner_gateway",
    "dinner_spec",
    "dinner_trace",
]

# Short activities so the full story plays out in a few hundred ticks.
DINNER_CONFIG = RuntimeConfig(
    activity_duration=12, idle_divergence_ticks=6, inner_voice_cooldown=10
)
DINNER_SEED = 7

_DIR = resources.files("vignette.data").joinpath("dinner")


def _read(name: str) -> str:
    try:
        return _DIR.joinpath(name).read_text("utf-8")
    except FileNotFoundError as exc:  # frozen artifacts come from the demo
        raise FileNotFoundError(
            f"{name} missing from the dinner bundle; run "
            "demos/dinner_walkthrough.py --write to regenerate it"
        ) from exc


def dinner_story() -> str:
    return _read("story.txt").strip()


def dinner_script() -> dict:
    return json.loads(_read("script.json"))


def dinner_gateway() -> Gateway:
    """Fresh gateway each call; scripted providers keep per-run fault state."""
    return Gateway(ScriptedMockProvider(dinner_script()))


def dinner_spec() -> VignetteSpec:
    return decode_spec(_read("dinner.vignette.json").encode("utf-8"))


def dinner_trace() -> ViewerTrace:
    with resources.as_file(_DIR.joinpath("follow_trace.json")) as path:
        if not path.exists():
            raise FileNotFoundError(
                "follow_trace.json missing from the dinner bundle; run "
                "demos/dinner_walkthrough.py --write to regenerate it"
            )
        return load_trace(path)
