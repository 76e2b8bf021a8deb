"""Text-generation choke point: templates, providers, validation, moderation.

Nothing outside this package renders prompts or talks to a model. Callers
build a PromptRequest, the gateway renders the template, the provider
answers, and the gateway validates the reply against the template's JSON
schema (re-asking with a repair note when the reply is malformed).
"""

from vignette.llm.templates import (
    PERSONA_BLOCK_HEADER,
    STORYLINE_BLOCK_HEADER,
    TEMPLATE_IDS,
    render_template,
)
from vignette.llm.providers import (
    HttpProvider,
    ProviderReply,
    ScriptError,
    ScriptedMockProvider,
    TransportError,
    variables_key,
)
from vignette.llm.gateway import (
    REFUSAL_LINE,
    Gateway,
    GatewayConfig,
    GatewayTransportError,
    ModerationDecision,
    PromptRequest,
    ProviderResult,
)

__all__ = [
    "PERSONA_BLOCK_HEADER",
    "STORYLINE_BLOCK_HEADER",
    "TEMPLATE_IDS",
    "render_template",
    "HttpProvider",
    "ProviderReply",
    "ScriptError",
    "ScriptedMockProvider",
    "TransportError",
    "variables_key",
    "REFUSAL_LINE",
    "Gateway",
    "GatewayConfig",
    "GatewayTransportError",
    "ModerationDecision",
    "PromptRequest",
    "ProviderResult",
]
