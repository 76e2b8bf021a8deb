"""Mock provider matching tiers, fault injection, and gateway behavior.

The exact-match tier is checked against a key recomputed here from the
documented derivation (sha-256 of the canonically serialized variables),
so the implementation can't drift from the file format silently.
"""

import hashlib
import json

import pytest

from vignette.llm.gateway import (
    REFUSAL_LINE,
    Gateway,
    GatewayTransportError,
    PromptRequest,
)
from vignette.llm.providers import ScriptedMockProvider, ScriptError
from vignette.llm.templates import render_template


def _key(variables: dict) -> str:
    canon = json.dumps(
        variables, sort_keys=True, separators=(",", ":"), ensure_ascii=False,
        default=str,
    )
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def _chat_vars(name="Ada"):
    return {
        "name": name,
        "persona_block": "[PERSONA]\nname: " + name,
        "history": "(no conversation yet)",
        "message": "hi",
    }


def test_exact_key_beats_subset_match():
    variables = _chat_vars()
    script = {
        "version": 1,
        "entries": [
            {"template_id": "CHAR_CHAT", "match": {"name": "Ada"},
             "response": {"reply": "from the subset tier"}},
            {"template_id": "CHAR_CHAT", "key": _key(variables),
             "response": {"reply": "from the exact tier"}},
        ],
    }
    gw = Gateway(ScriptedMockProvider(script))
    result = gw.complete(PromptRequest("CHAR_CHAT", variables))
    assert result.parsed["reply"] == "from the exact tier"
    assert result.source == "exact"


def test_subset_match_in_file_order():
    script = {
        "version": 1,
        "entries": [
            {"template_id": "CHAR_CHAT", "match": {"name": "Ada"},
             "response": {"reply": "first"}},
            {"template_id": "CHAR_CHAT", "match": {"name": "Ada", "message": "hi"},
             "response": {"reply": "second, more specific, still loses"}},
        ],
    }
    gw = Gateway(ScriptedMockProvider(script))
    result = gw.complete(PromptRequest("CHAR_CHAT", _chat_vars()))
    assert result.parsed["reply"] == "first"
    assert result.source == "match"


def test_default_tier_answers_everything():
    gw = Gateway(ScriptedMockProvider())
    result = gw.complete(PromptRequest("INNER_VOICE", {
        "action": "having dinner", "object_name": "chair",
    }))
    assert result.ok
    assert "having dinner" in result.parsed["cue"]
    assert result.source == "default"


def test_latency_is_reported_not_slept():
    script = {
        "version": 1,
        "default_latency_ms": 30_000,
        "entries": [],
    }
    gw = Gateway(ScriptedMockProvider(script))
    result = gw.complete(PromptRequest("INNER_VOICE", {
        "action": "x", "object_name": "y",
    }))
    assert result.latency_ms == 30_000  # virtual: the call itself returned instantly


def test_entry_latency_overrides_default():
    variables = _chat_vars()
    script = {
        "version": 1,
        "default_latency_ms": 100,
        "entries": [
            {"template_id": "CHAR_CHAT", "match": {"name": "Ada"},
             "response": {"reply": "slow"}, "latency_ms": 900},
        ],
    }
    gw = Gateway(ScriptedMockProvider(script))
    assert gw.complete(PromptRequest("CHAR_CHAT", variables)).latency_ms == 900


def test_transport_fault_consumed_then_recovers():
    script = {
        "version": 1,
        "entries": [],
        "faults": [{"kind": "transport", "template_id": "CHAR_CHAT", "times": 5}],
    }
    gw = Gateway(ScriptedMockProvider(script))
    with pytest.raises(GatewayTransportError, match="CHAR_CHAT"):
        gw.complete(PromptRequest("CHAR_CHAT", _chat_vars()))
    # faults burn down across retries; the sixth attempt goes through
    assert gw.complete(PromptRequest("CHAR_CHAT", _chat_vars())).ok


def test_moderation_denylist_and_fail_closed():
    script = {"version": 1, "entries": [], "moderation_denylist": ["blastpowder"]}
    gw = Gateway(ScriptedMockProvider(script))
    assert gw.moderate("nice weather").allowed
    decision = gw.moderate("where do I buy BLASTPOWDER")
    assert not decision.allowed
    assert decision.reason == "POLICY"

    fault_script = {
        "version": 1,
        "entries": [],
        "faults": [{"kind": "moderation_unavailable", "times": 1}],
    }
    gw2 = Gateway(ScriptedMockProvider(fault_script))
    unavailable = gw2.moderate("anything at all")
    assert not unavailable.allowed
    assert unavailable.reason == "UNAVAILABLE"
    assert REFUSAL_LINE  # callers substitute this for withheld text


def test_malformed_scripts_rejected():
    with pytest.raises(ScriptError, match="version"):
        ScriptedMockProvider({"entries": []})
    with pytest.raises(ScriptError, match="exactly one"):
        ScriptedMockProvider({
            "version": 1,
            "entries": [{"template_id": "CHAR_CHAT", "key": "k", "match": {},
                         "response": {}}],
        })
    with pytest.raises(ScriptError, match="unknown template_id"):
        ScriptedMockProvider({
            "version": 1,
            "entries": [{"template_id": "MAKE_COFFEE", "match": {}, "response": {}}],
        })


def test_rendered_prompt_travels_with_the_result():
    gw = Gateway(ScriptedMockProvider())
    variables = _chat_vars()
    result = gw.complete(PromptRequest("CHAR_CHAT", variables))
    assert result.prompt == render_template("CHAR_CHAT", variables)
    assert "[PERSONA]" in result.prompt
