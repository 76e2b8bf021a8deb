"""Model providers: a deterministic scripted mock and a live HTTP client.

The mock answers from a script file. Lookup order per request:

1. exact entry: ``key`` equals the sha-256 of the canonically serialized
   variables map (sorted keys, compact separators), scoped to template_id;
2. match entry: every pair in ``match`` equals the request's variables
   (first matching entry in file order wins);
3. template default: a safe, deterministic response derived only from the
   request, so full pipelines run with an empty script. Defaults are
   logged and flagged, they signal a hole in the script.

Mock latency is virtual: it is reported on the reply and consumed by the
runtime's plan-readiness model, never slept. That keeps thousand-run
suites fast while still exercising latency overruns.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
import time
from collections import Counter
from dataclasses import dataclass
from typing import Mapping

from vignette.llm.templates import TEMPLATE_IDS

__all__ = [
    "ProviderReply",
    "TransportError",
    "ModerationUnavailable",
    "ScriptError",
    "ScriptedMockProvider",
    "HttpProvider",
    "canonical_variables",
    "variables_key",
]

log = logging.getLogger(__name__)

ENV_URL = "VIGNETTE_LLM_URL"
ENV_MODEL = "VIGNETTE_LLM_MODEL"
ENV_KEY = "VIGNETTE_LLM_KEY"
DEFAULT_MODEL = "gpt-4o-2024-05-13"


class TransportError(Exception):
    """Provider could not be reached or answered with a server error."""


class ModerationUnavailable(Exception):
    """Moderation backend unreachable; callers must fail closed."""


class ScriptError(Exception):
    """Mock script file is malformed."""


@dataclass(frozen=True)
class ProviderReply:
    raw_text: str
    latency_ms: int
    source: str  # "exact" | "match" | "default" | "live"


def canonical_variables(variables: Mapping[str, object]) -> str:
    return json.dumps(
        dict(variables),
        sort_keys=True,
        separators=(",", ":"),
        ensure_ascii=False,
        default=str,
    )


def variables_key(variables: Mapping[str, object]) -> str:
    return hashlib.sha256(canonical_variables(variables).encode("utf-8")).hexdigest()


def _as_text(response: object) -> str:
    if isinstance(response, str):
        return response
    return json.dumps(response, sort_keys=True, ensure_ascii=False)


def _stable_index(seed: str, size: int) -> int:
    digest = hashlib.sha256(seed.encode("utf-8")).hexdigest()
    return int(digest[:8], 16) % size


def _default_response(
    template_id: str, schema_id: str, variables: Mapping[str, object]
) -> object:
    """Deterministic safe default per template (and per phase for events)."""
    if template_id == "EXTRACT_CHARACTERS":
        return {
            "characters": [
                {
                    "name": "me",
                    "is_pc": True,
                    "personality": None,
                    "social_role": None,
                    "mood": None,
                    "language_style": None,
                    "age": None,
                }
            ]
        }
    if template_id == "SELECT_LAYOUT":
        return {"tag": "residential"}
    if template_id == "LABEL_ROOMS":
        try:
            rooms = json.loads(str(variables.get("rooms", "{}")))
        except json.JSONDecodeError:
            rooms = {}
        if isinstance(rooms, dict):
            return {"labels": {k: str(v) for k, v in rooms.items()}}
        return {"labels": {}}
    if template_id == "EXTRACT_EVENTS":
        if schema_id.endswith(".groups"):
            n = int(str(variables.get("action_count", 0)) or 0)
            return {"groups": [[i] for i in range(1, n + 1)]}
        if schema_id.endswith(".order"):
            n = int(str(variables.get("group_count", 0)) or 0)
            return {"order": list(range(n))}
        return {"actions": []}
    if template_id == "AFFORDANCE":
        return {
            "actions": ["inspect"],
            "zone_type": "around",
            "needs_facing": False,
            "footprint": [1, 1],
        }
    if template_id == "PLACE_REASONING":
        return {"wall_adjacent": False, "near": None}
    if template_id == "PERSONA_SUGGEST":
        return {"suggestions": {}}
    if template_id == "CHAR_CHAT":
        return {"reply": "Oh, interesting. Tell me more."}
    if template_id == "PLAN_ACTIVITY":
        try:
            menu = json.loads(str(variables.get("object_menu", "[]")))
        except json.JSONDecodeError:
            menu = []
        if isinstance(menu, list) and menu:
            pick = menu[_stable_index(variables_key(variables), len(menu))]
            if isinstance(pick, dict) and "object_id" in pick:
                return {
                    "action": str(pick.get("action", "inspect")),
                    "object_id": str(pick["object_id"]),
                }
        return {"action": "idle", "object_id": ""}
    if template_id == "INNER_VOICE":
        action = str(variables.get("action", "get going"))
        return {"cue": f"I should start {action} now."}
    if template_id == "GUIDE_REPLY":
        action = str(variables.get("action", "the next part"))
        return {"reply": f"Come on, {action} matters to me. Let's do it together."}
    if template_id == "DIVERGENCE_INTENT":
        message = str(variables.get("message", "")).lower()
        derail_markers = ("skip", "don't want", "not going", "won't", "leave", "quit")
        if any(marker in message for marker in derail_markers):
            return {"intent": "derail"}
        return {"intent": "small_talk"}
    if template_id == "BL_ACTIVITY":
        try:
            actions = json.loads(str(variables.get("object_actions", "[]")))
        except json.JSONDecodeError:
            actions = []
        if isinstance(actions, list) and actions:
            return {"action": str(actions[0])}
        return {"action": "inspect"}
    raise KeyError(f"no default response for template {template_id!r}")


def _validate_script(raw: object) -> dict:
    if not isinstance(raw, dict):
        raise ScriptError("script root must be a JSON object")
    script = {
        "default_latency_ms": raw.get("default_latency_ms", 0),
        "entries": raw.get("entries", []),
        "moderation_denylist": raw.get("moderation_denylist", []),
        "faults": raw.get("faults", []),
    }
    unknown = set(raw) - {"version", *script}
    if unknown:
        raise ScriptError(f"unknown script fields: {sorted(unknown)}")
    if raw.get("version") != 1:
        raise ScriptError(f"unsupported script version {raw.get('version')!r}")
    if not isinstance(script["default_latency_ms"], int) or script["default_latency_ms"] < 0:
        raise ScriptError("default_latency_ms must be a non-negative integer")
    if not isinstance(script["entries"], list):
        raise ScriptError("entries must be a list")
    for i, entry in enumerate(script["entries"]):
        where = f"entries[{i}]"
        if not isinstance(entry, dict):
            raise ScriptError(f"{where}: must be an object")
        if entry.get("template_id") not in TEMPLATE_IDS:
            raise ScriptError(f"{where}: unknown template_id {entry.get('template_id')!r}")
        if "response" not in entry:
            raise ScriptError(f"{where}: missing response")
        has_key = "key" in entry
        has_match = "match" in entry
        if has_key == has_match:
            raise ScriptError(f"{where}: exactly one of key/match required")
        if has_key and not isinstance(entry["key"], str):
            raise ScriptError(f"{where}: key must be a string")
        if has_match and not isinstance(entry["match"], dict):
            raise ScriptError(f"{where}: match must be an object")
        latency = entry.get("latency_ms", 0)
        if not isinstance(latency, int) or latency < 0:
            raise ScriptError(f"{where}: latency_ms must be a non-negative integer")
    if not isinstance(script["moderation_denylist"], list) or not all(
        isinstance(t, str) for t in script["moderation_denylist"]
    ):
        raise ScriptError("moderation_denylist must be a list of strings")
    if not isinstance(script["faults"], list):
        raise ScriptError("faults must be a list")
    for i, fault in enumerate(script["faults"]):
        if not isinstance(fault, dict):
            raise ScriptError(f"faults[{i}]: must be an object")
        if fault.get("kind") not in ("transport", "moderation_unavailable"):
            raise ScriptError(f"faults[{i}]: unknown kind {fault.get('kind')!r}")
        times = fault.get("times", 1)
        if not isinstance(times, int) or times < 1:
            raise ScriptError(f"faults[{i}]: times must be a positive integer")
    return script


class ScriptedMockProvider:
    """Deterministic provider answering from a script document."""

    provider_id = "mock"

    def __init__(self, script: dict | None = None):
        self._script = _validate_script(script if script is not None else {"version": 1})
        self._lock = threading.Lock()
        self._fault_budget = [
            {
                "kind": f["kind"],
                "template_id": f.get("template_id"),
                "times": f.get("times", 1),
            }
            for f in self._script["faults"]
        ]
        self.seen_templates: Counter[str] = Counter()
        self.unknown_requests: list[tuple[str, str]] = []

    @classmethod
    def from_file(cls, path: str) -> "ScriptedMockProvider":
        try:
            with open(path, encoding="utf-8") as fh:
                raw = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ScriptError(f"cannot load script {path!r}: {exc}") from exc
        return cls(raw)

    def _consume_fault(self, kind: str, template_id: str | None) -> bool:
        with self._lock:
            for fault in self._fault_budget:
                if fault["kind"] != kind or fault["times"] < 1:
                    continue
                if fault["template_id"] not in (None, template_id):
                    continue
                fault["times"] -= 1
                return True
        return False

    def generate(
        self,
        template_id: str,
        prompt: str,
        variables: Mapping[str, object],
        temperature: float = 0.0,
        output_schema_id: str = "",
    ) -> ProviderReply:
        del prompt, temperature  # the mock matches on structure, not text
        with self._lock:
            self.seen_templates[template_id] += 1
        if self._consume_fault("transport", template_id):
            raise TransportError("injected transport fault")
        key = variables_key(variables)
        default_latency = self._script["default_latency_ms"]
        for entry in self._script["entries"]:
            if entry["template_id"] != template_id:
                continue
            if entry.get("key") == key:
                return ProviderReply(
                    raw_text=_as_text(entry["response"]),
                    latency_ms=entry.get("latency_ms", default_latency),
                    source="exact",
                )
        for entry in self._script["entries"]:
            if entry["template_id"] != template_id or "match" not in entry:
                continue
            if all(variables.get(k) == v for k, v in entry["match"].items()):
                return ProviderReply(
                    raw_text=_as_text(entry["response"]),
                    latency_ms=entry.get("latency_ms", default_latency),
                    source="match",
                )
        with self._lock:
            self.unknown_requests.append((template_id, key))
        log.debug("mock script has no entry for %s key=%s", template_id, key[:12])
        default = _default_response(template_id, output_schema_id, variables)
        return ProviderReply(
            raw_text=_as_text(default),
            latency_ms=default_latency,
            source="default",
        )

    def moderate(self, text: str) -> bool:
        """True when the text is allowed."""
        if self._consume_fault("moderation_unavailable", None):
            raise ModerationUnavailable("injected moderation fault")
        lowered = text.lower()
        return not any(
            token.lower() in lowered for token in self._script["moderation_denylist"]
        )


class HttpProvider:
    """OpenAI-compatible chat-completions client, configured via env vars."""

    provider_id = "http"

    def __init__(
        self,
        url: str | None = None,
        model: str | None = None,
        api_key: str | None = None,
        timeout: float = 60.0,
    ):
        self.url = (url or os.environ.get(ENV_URL, "")).rstrip("/")
        if not self.url:
            raise ValueError(f"no provider URL; set {ENV_URL}")
        self.model = model or os.environ.get(ENV_MODEL) or DEFAULT_MODEL
        self.api_key = api_key or os.environ.get(ENV_KEY, "")
        self.timeout = timeout

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        return headers

    def generate(
        self,
        template_id: str,
        prompt: str,
        variables: Mapping[str, object],
        temperature: float = 0.0,
        output_schema_id: str = "",
    ) -> ProviderReply:
        import requests

        del variables, output_schema_id
        started = time.monotonic()
        try:
            resp = requests.post(
                f"{self.url}/chat/completions",
                headers=self._headers(),
                json={
                    "model": self.model,
                    "messages": [{"role": "user", "content": prompt}],
                    "temperature": temperature,
                    "response_format": {"type": "json_object"},
                },
                timeout=self.timeout,
            )
            resp.raise_for_status()
            body = resp.json()
            text = body["choices"][0]["message"]["content"]
        except Exception as exc:  # noqa: BLE001 - every failure is a transport error here
            raise TransportError(f"{template_id}: {exc}") from exc
        latency = int((time.monotonic() - started) * 1000)
        return ProviderReply(raw_text=text, latency_ms=latency, source="live")

    def moderate(self, text: str) -> bool:
        import requests

        try:
            resp = requests.post(
                f"{self.url}/moderations",
                headers=self._headers(),
                json={"input": text},
                timeout=self.timeout,
            )
            resp.raise_for_status()
            results = resp.json().get("results", [])
        except Exception as exc:  # noqa: BLE001
            raise ModerationUnavailable(str(exc)) from exc
        return not any(r.get("flagged") for r in results)
