"""World state and the append-only event log.

The log is the engine's test surface and the wire format for state
deltas: every observable change becomes one record. Serialization is
canonical (sorted keys, compact separators) so identical runs produce
byte-identical logs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from vignette.core.types import Tile

__all__ = [
    "REC_ACTIVITY_START",
    "REC_ACTIVITY_END",
    "REC_PLAN_REQUESTED",
    "REC_PLAN_RESOLVED",
    "REC_FALLBACK",
    "REC_EVENT_COMPLETED",
    "REC_GLOW_CHANGED",
    "REC_MOVE",
    "REC_BLOCKED",
    "REC_COMMAND_REJECTED",
    "REC_COMMAND_IGNORED",
    "REC_CHAT",
    "REC_INNER_VOICE",
    "REC_DIVERGENCE",
    "REC_RUN_ENDED",
    "ViewerCommand",
    "ActiveActivity",
    "CharacterState",
    "LogRecord",
    "EventLog",
    "WorldState",
]

REC_ACTIVITY_START = "activity_start"
REC_ACTIVITY_END = "activity_end"
REC_PLAN_REQUESTED = "plan_requested"
REC_PLAN_RESOLVED = "plan_resolved"
REC_FALLBACK = "fallback"
REC_EVENT_COMPLETED = "event_completed"
REC_GLOW_CHANGED = "glow_changed"
REC_MOVE = "move"
REC_BLOCKED = "blocked"
REC_COMMAND_REJECTED = "command_rejected"
REC_COMMAND_IGNORED = "command_ignored"
REC_CHAT = "chat"
REC_INNER_VOICE = "inner_voice"
REC_DIVERGENCE = "divergence_detected"
REC_RUN_ENDED = "run_ended"

_DIRECTIONS = {"N": (0, -1), "S": (0, 1), "E": (1, 0), "W": (-1, 0)}


@dataclass(frozen=True)
class ViewerCommand:
    """One viewer input, due at a given tick.

    kind: move | interact | chat | wait. The engine executes at most one
    command per tick, in arrival order; late-queued commands slide to the
    following ticks.
    """

    at_tick: int
    kind: str
    direction: str | None = None  # move: N | S | E | W
    object_id: str | None = None  # interact
    npc_id: str | None = None  # chat
    text: str | None = None  # chat
    ticks: int = 1  # wait

    def direction_offset(self) -> Tile:
        if self.direction not in _DIRECTIONS:
            raise ValueError(f"bad direction {self.direction!r}")
        return _DIRECTIONS[self.direction]

    def to_jsonable(self) -> dict:
        out: dict = {"at_tick": self.at_tick, "kind": self.kind}
        if self.kind == "move":
            out["direction"] = self.direction
        elif self.kind == "interact":
            out["object_id"] = self.object_id
        elif self.kind == "chat":
            out["npc_id"] = self.npc_id
            out["text"] = self.text
        elif self.kind == "wait":
            out["ticks"] = self.ticks
        return out

    @classmethod
    def from_jsonable(cls, raw: dict) -> "ViewerCommand":
        return cls(
            at_tick=int(raw["at_tick"]),
            kind=str(raw["kind"]),
            direction=raw.get("direction"),
            object_id=raw.get("object_id"),
            npc_id=raw.get("npc_id"),
            text=raw.get("text"),
            ticks=int(raw.get("ticks", 1)),
        )


@dataclass
class ActiveActivity:
    """What a character is currently doing (or walking toward doing)."""

    action: str
    object_id: str  # "" means idle in place
    remaining: int
    authored_event: int | None  # key-event index when this is authored
    generated: bool  # planner-origin (an NPC plan)
    divergent: bool  # off-story
    started_at: int


@dataclass
class CharacterState:
    character_id: str
    position: Tile
    activity: ActiveActivity | None = None
    path: list[Tile] = field(default_factory=list)
    idle_ticks: int = 0


@dataclass(frozen=True)
class LogRecord:
    seq: int
    tick: int
    actor: str
    kind: str
    payload: dict

    def to_jsonable(self) -> dict:
        return {
            "seq": self.seq,
            "tick": self.tick,
            "actor": self.actor,
            "kind": self.kind,
            "payload": self.payload,
        }


class EventLog:
    """Append-only, tick-monotone record list."""

    def __init__(self) -> None:
        self.records: list[LogRecord] = []

    def append(self, tick: int, actor: str, kind: str, payload: dict) -> LogRecord:
        if self.records and tick < self.records[-1].tick:
            raise ValueError(
                f"log tick went backwards: {tick} after {self.records[-1].tick}"
            )
        record = LogRecord(
            seq=len(self.records), tick=tick, actor=actor, kind=kind, payload=payload
        )
        self.records.append(record)
        return record

    def since(self, seq: int) -> list[LogRecord]:
        return self.records[seq:]

    def of_kind(self, kind: str) -> list[LogRecord]:
        return [r for r in self.records if r.kind == kind]

    def to_jsonl(self) -> str:
        lines = [
            json.dumps(
                r.to_jsonable(), sort_keys=True, separators=(",", ":"), ensure_ascii=False
            )
            for r in self.records
        ]
        return "\n".join(lines) + ("\n" if lines else "")

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)


@dataclass
class WorldState:
    tick: int
    status: str  # "running" | "ended"
    characters: dict[str, CharacterState]
    glow: frozenset[str]
    pending_event: int  # == len(key_events) once every bottleneck passed
    event_progress: dict[tuple[int, str], int]
    completed_events: int
    last_cue_tick: int | None = None
    diverged: bool = False

    def to_jsonable(self) -> dict:
        chars = {}
        for cid, st in sorted(self.characters.items()):
            activity = None
            if st.activity is not None:
                activity = {
                    "action": st.activity.action,
                    "object_id": st.activity.object_id,
                    "remaining": st.activity.remaining,
                    "authored_event": st.activity.authored_event,
                    "generated": st.activity.generated,
                    "divergent": st.activity.divergent,
                }
            chars[cid] = {
                "position": list(st.position),
                "activity": activity,
            }
        return {
            "tick": self.tick,
            "status": self.status,
            "characters": chars,
            "glow": sorted(self.glow),
            "pending_event": self.pending_event,
            "completed_events": self.completed_events,
        }
