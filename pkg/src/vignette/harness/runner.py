"""Replay one ViewerTrace against a spec and judge the outcome.

A replay is bottleneck-safe when the run reached "ended" and the key
events completed strictly in authored order. Anything else comes back
with human-readable diagnostics, which the CLI prints and turns into a
nonzero exit code.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from vignette.core.types import VignetteSpec
from vignette.harness.trace import ViewerTrace
from vignette.llm.gateway import Gateway
from vignette.llm.providers import ScriptedMockProvider
from vignette.plan.planner import PlannerMode
from vignette.runtime import (
    Engine,
    EventLog,
    RuntimeConfig,
    export_activity_table,
    table_to_csv,
)
from vignette.runtime import world as w

__all__ = ["RunResult", "run_trace"]


@dataclass
class RunResult:
    status: str
    ticks: int
    event_order: list[int]
    events_total: int
    fallbacks: int
    bottleneck_safe: bool
    diagnostics: list[str]
    log: EventLog
    table: dict
    files: dict[str, Path] = field(default_factory=dict)

    @property
    def exit_code(self) -> int:
        return 0 if self.bottleneck_safe else 1

    def summary(self) -> dict:
        return {
            "status": self.status,
            "ticks": self.ticks,
            "event_order": self.event_order,
            "events_total": self.events_total,
            "fallbacks": self.fallbacks,
            "bottleneck_safe": self.bottleneck_safe,
            "diagnostics": self.diagnostics,
        }


def _judge(log: EventLog, status: str, total: int) -> tuple[list[int], list[str]]:
    order = [r.payload["event_index"] for r in log.of_kind(w.REC_EVENT_COMPLETED)]
    diagnostics = []
    if status != "ended":
        diagnostics.append(f"run did not end (status={status})")
    if order != list(range(total)):
        diagnostics.append(
            f"key events completed as {order}, expected {list(range(total))}"
        )
    return order, diagnostics


def run_trace(
    spec: VignetteSpec,
    trace: ViewerTrace,
    *,
    mode: PlannerMode = PlannerMode.CD,
    gateway: Gateway | None = None,
    config: RuntimeConfig | None = None,
    out_dir: Path | str | None = None,
    trace_id: str = "",
    max_ticks: int | None = None,
) -> RunResult:
    """Run the trace to completion (or the tick cap) and collect artifacts."""
    gateway = gateway or Gateway(ScriptedMockProvider())
    if config is None:
        config = trace.config  # replay under the timing it was recorded with
    engine = Engine(spec, gateway, mode=mode, config=config, seed=trace.seed)
    engine.run(list(trace.commands), max_ticks=max_ticks)

    log = engine.log
    world = engine.world
    order, diagnostics = _judge(log, world.status, len(spec.key_events))
    result = RunResult(
        status=world.status,
        ticks=world.tick,
        event_order=order,
        events_total=len(spec.key_events),
        fallbacks=len(log.of_kind(w.REC_FALLBACK)),
        bottleneck_safe=not diagnostics,
        diagnostics=diagnostics,
        log=log,
        table=export_activity_table(log, spec),
    )
    if out_dir is not None:
        result.files = _write_artifacts(result, Path(out_dir), trace_id)
    return result


def _write_artifacts(result: RunResult, out_dir: Path, trace_id: str) -> dict[str, Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    prefix = f"{trace_id}_" if trace_id else ""
    files = {
        "events": out_dir / f"{prefix}events.jsonl",
        "table_json": out_dir / f"{prefix}activity_table.json",
        "table_csv": out_dir / f"{prefix}activity_table.csv",
        "summary": out_dir / f"{prefix}summary.json",
    }
    files["events"].write_text(result.log.to_jsonl(), encoding="utf-8")
    files["table_json"].write_text(
        json.dumps(result.table, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    files["table_csv"].write_text(table_to_csv(result.table), encoding="utf-8")
    files["summary"].write_text(
        json.dumps(result.summary(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return files
