"""The gateway: render, call, validate, repair, moderate.

complete() is the only way the rest of the engine talks to a model.
Schema-invalid replies trigger up to R repair re-asks; each re-ask adds a
``__repair__`` attempt counter to the variables map so the scripted mock
sees a distinct, deterministic key for the retried request. Transport
failures retry up to T times and then surface as GatewayTransportError.

Moderation fails closed: when the moderation backend cannot be reached
the text is withheld with reason UNAVAILABLE, and callers substitute
REFUSAL_LINE for anything withheld.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Mapping

from vignette.llm.providers import ProviderReply, TransportError
from vignette.llm.schemas import validate_output
from vignette.llm.templates import TEMPERATURES, default_schema_id, render_template

__all__ = [
    "REFUSAL_LINE",
    "PromptRequest",
    "ProviderResult",
    "GatewayConfig",
    "GatewayTransportError",
    "ModerationDecision",
    "Gateway",
]

log = logging.getLogger(__name__)

REFUSAL_LINE = "I'd rather not talk about that."

_REPAIR_NOTE = (
    "\n\nYour previous reply was rejected: {error}\n"
    "Answer again with exactly one JSON object matching the requested shape."
)


class GatewayTransportError(Exception):
    """Provider unreachable after all transport retries."""


@dataclass(frozen=True)
class PromptRequest:
    template_id: str
    variables: Mapping[str, object] = field(default_factory=dict)
    output_schema_id: str | None = None

    def schema_id(self) -> str:
        return self.output_schema_id or default_schema_id(self.template_id)


@dataclass(frozen=True)
class ProviderResult:
    raw_text: str
    parsed: object | None
    error: str | None
    latency_ms: int
    provider_id: str
    attempts: int
    prompt: str
    source: str

    @property
    def ok(self) -> bool:
        return self.error is None


@dataclass(frozen=True)
class ModerationDecision:
    allowed: bool
    reason: str | None = None  # "POLICY" or "UNAVAILABLE" when withheld


@dataclass(frozen=True)
class GatewayConfig:
    repair_attempts: int = 2
    transport_attempts: int = 3


def _strip_fences(text: str) -> str:
    stripped = text.strip()
    if stripped.startswith("```"):
        lines = stripped.splitlines()
        if lines and lines[0].startswith("```"):
            lines = lines[1:]
        if lines and lines[-1].strip() == "```":
            lines = lines[:-1]
        return "\n".join(lines)
    return stripped


class Gateway:
    def __init__(self, provider, config: GatewayConfig | None = None):
        self.provider = provider
        self.config = config or GatewayConfig()

    def _call(
        self,
        template_id: str,
        prompt: str,
        variables: Mapping[str, object],
        schema_id: str,
    ) -> ProviderReply:
        last: Exception | None = None
        for _ in range(self.config.transport_attempts):
            try:
                return self.provider.generate(
                    template_id,
                    prompt,
                    variables,
                    temperature=TEMPERATURES.get(template_id, 0.0),
                    output_schema_id=schema_id,
                )
            except TransportError as exc:
                last = exc
                log.warning("transport failure on %s: %s", template_id, exc)
        raise GatewayTransportError(
            f"{template_id}: provider unreachable after "
            f"{self.config.transport_attempts} attempts"
        ) from last

    def complete(self, req: PromptRequest) -> ProviderResult:
        schema_id = req.schema_id()
        base_prompt = render_template(req.template_id, dict(req.variables))
        prompt = base_prompt
        variables = dict(req.variables)
        total_latency = 0
        attempts = 0
        last_error = ""
        raw_text = ""
        source = ""
        while attempts <= self.config.repair_attempts:
            reply = self._call(req.template_id, prompt, variables, schema_id)
            attempts += 1
            total_latency += reply.latency_ms
            raw_text = reply.raw_text
            source = reply.source
            try:
                value = json.loads(_strip_fences(reply.raw_text))
                schema_error = validate_output(schema_id, value)
            except json.JSONDecodeError as exc:
                value = None
                schema_error = f"not valid JSON ({exc.msg} at offset {exc.pos})"
            if schema_error is None:
                return ProviderResult(
                    raw_text=raw_text,
                    parsed=value,
                    error=None,
                    latency_ms=total_latency,
                    provider_id=self.provider.provider_id,
                    attempts=attempts,
                    prompt=prompt,
                    source=source,
                )
            last_error = schema_error
            variables = dict(req.variables)
            variables["__repair__"] = attempts
            prompt = base_prompt + _REPAIR_NOTE.format(error=schema_error)
        return ProviderResult(
            raw_text=raw_text,
            parsed=None,
            error=f"SCHEMA: {last_error}",
            latency_ms=total_latency,
            provider_id=self.provider.provider_id,
            attempts=attempts,
            prompt=prompt,
            source=source,
        )

    def moderate(self, text: str) -> ModerationDecision:
        try:
            allowed = self.provider.moderate(text)
        except Exception as exc:  # noqa: BLE001 - fail closed on any backend trouble
            log.warning("moderation unavailable, withholding: %s", exc)
            return ModerationDecision(allowed=False, reason="UNAVAILABLE")
        if allowed:
            return ModerationDecision(allowed=True)
        return ModerationDecision(allowed=False, reason="POLICY")
