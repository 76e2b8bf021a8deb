"""ViewerTrace files and a synthesizer that records replayable traces.

A trace is the ordered list of viewer commands from one sitting, with
the seed that reproduces the run. Ticks are strictly increasing; the
engine executes at most one command per tick, so a trace recorded one
command per tick replays tick-exact.

File format (JSON):

    {
      "trace_version": 1,
      "seed": 7,
      "description": "follow with short dallies",
      "config": {"activity_duration": 12, ...},
      "commands": [{"at_tick": 3, "kind": "move", "direction": "E"}, ...]
    }

The config block pins the tick timing the trace was recorded under; a
command scheduled around a 12-tick activity is nonsense at 80 ticks.
"""

from __future__ import annotations

import dataclasses
import json
import random

from vignette.build.pathing import find_path
from vignette.core.types import Tile, VignetteSpec
from vignette.llm.gateway import Gateway
from vignette.llm.providers import ScriptedMockProvider
from vignette.plan.planner import PlannerMode
from vignette.runtime import Engine, RuntimeConfig, ViewerCommand

__all__ = [
    "TRACE_VERSION",
    "TraceError",
    "ViewerTrace",
    "load_trace",
    "save_trace",
    "synthesize_trace",
]

TRACE_VERSION = 1

_STEP = {(0, -1): "N", (0, 1): "S", (1, 0): "E", (-1, 0): "W"}


class TraceError(Exception):
    """Trace file missing, malformed, or violating the tick order."""


@dataclasses.dataclass(frozen=True)
class ViewerTrace:
    seed: int
    description: str
    commands: tuple[ViewerCommand, ...]
    config: RuntimeConfig | None = None  # timing the trace was recorded under

    def __post_init__(self) -> None:
        last = 0
        for cmd in self.commands:
            if cmd.at_tick <= last:
                raise TraceError(
                    f"command ticks must be strictly increasing: "
                    f"{cmd.at_tick} after {last}"
                )
            last = cmd.at_tick

    def to_jsonable(self) -> dict:
        out = {
            "trace_version": TRACE_VERSION,
            "seed": self.seed,
            "description": self.description,
            "commands": [c.to_jsonable() for c in self.commands],
        }
        if self.config is not None:
            out["config"] = dataclasses.asdict(self.config)
        return out

    @classmethod
    def from_jsonable(cls, raw: dict) -> "ViewerTrace":
        if not isinstance(raw, dict):
            raise TraceError("trace root must be a JSON object")
        version = raw.get("trace_version")
        if version != TRACE_VERSION:
            raise TraceError(f"unsupported trace_version {version!r}")
        config = None
        if raw.get("config") is not None:
            known = {f.name for f in dataclasses.fields(RuntimeConfig)}
            unknown = set(raw["config"]) - known
            if unknown:
                raise TraceError(f"unknown config fields: {sorted(unknown)}")
            try:
                config = RuntimeConfig(**{k: int(v) for k, v in raw["config"].items()})
            except (TypeError, ValueError) as exc:
                raise TraceError(f"malformed trace config: {exc}") from exc
        try:
            commands = tuple(
                ViewerCommand.from_jsonable(c) for c in raw.get("commands", [])
            )
            return cls(
                seed=int(raw.get("seed", 0)),
                description=str(raw.get("description", "")),
                commands=commands,
                config=config,
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise TraceError(f"malformed trace: {exc}") from exc


def load_trace(path) -> ViewerTrace:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise TraceError(f"cannot read trace {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise TraceError(f"trace {path} is not valid JSON: {exc}") from exc
    return ViewerTrace.from_jsonable(raw)


def save_trace(trace: ViewerTrace, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(trace.to_jsonable(), fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# synthesizer


class _PcDriver:
    """Closed-loop viewer: watches the live world, emits one command per tick.

    Mixes two behaviors. "Follow" walks straight to the player's glowing
    key-event object and interacts; "dally" wanders, pokes non-story
    objects (divergence), chats, or idles first. The recorded command
    list replays against a fresh engine tick-for-tick because the engine
    consumes at most one command per tick.
    """

    def __init__(self, engine: Engine, rng: random.Random, dally_chance: float):
        self.engine = engine
        self.rng = rng
        self.dally_chance = dally_chance
        self.queue: list[dict] = []  # primitive commands without at_tick
        self.performing = False  # issued an interact, waiting it out
        self.committed_event: int | None = None  # assignment already handled

    # -- helpers ------------------------------------------------------------

    def _me(self):
        return self.engine.world.characters[self.engine.pc_id]

    def _walkable_zone(self, object_id: str) -> set[Tile]:
        obj = self.engine.objects[object_id]
        return set(obj.zone.tiles) & self.engine.walkable

    def _path_commands(self, goals: set[Tile]) -> list[dict] | None:
        path = find_path(self.engine.walkable, self._me().position, goals)
        if path is None:
            return None
        steps = []
        for a, b in zip(path, path[1:]):
            delta = (b[0] - a[0], b[1] - a[1])
            steps.append({"kind": "move", "direction": _STEP[delta]})
        return steps

    def _plan_follow(self, object_id: str) -> bool:
        steps = self._path_commands(self._walkable_zone(object_id))
        if steps is None:
            return False
        steps.append({"kind": "interact", "object_id": object_id})
        self.queue = steps
        return True

    def _plan_dally(self) -> None:
        world = self.engine.world
        roll = self.rng.random()
        if roll < 0.45:
            # short random walk
            steps = [
                {"kind": "move", "direction": self.rng.choice("NSEW")}
                for _ in range(self.rng.randint(2, 6))
            ]
            self.queue = steps
        elif roll < 0.75:
            # poke a non-glowing object: an off-story activity
            candidates = sorted(
                oid for oid in self.engine.objects if oid not in world.glow
            )
            if candidates and self._plan_follow(self.rng.choice(candidates)):
                return
            self.queue = [{"kind": "wait"}] * self.rng.randint(2, 5)
        elif roll < 0.9:
            self.queue = [{"kind": "wait"}] * self.rng.randint(1, 4)
        else:
            npcs = [c.id for c in self.engine.spec.characters if c.id != self.engine.pc_id]
            if npcs:
                self.queue = [
                    {
                        "kind": "chat",
                        "npc_id": self.rng.choice(npcs),
                        "text": "what are you up to?",
                    }
                ]

    # -- the per-tick decision ------------------------------------------------

    def next_command(self) -> ViewerCommand | None:
        engine = self.engine
        world = engine.world
        me = self._me()
        spec = engine.spec
        pending = world.pending_event
        story_done = pending >= len(spec.key_events)

        if me.activity is not None:
            act = me.activity
            zone = self._walkable_zone(act.object_id) if act.object_id else None
            if zone is not None and me.position not in zone:
                # wandered off mid-activity: walk back so it can finish
                if not self.queue:
                    steps = self._path_commands(zone)
                    self.queue = steps or []
            elif act.authored_event is not None or story_done:
                # authored work and end-of-story cleanup both just run out
                self.queue = []
                return self._emit()
            # divergent activity in zone: let it finish unless the story
            # needs the player (handled below once it completes)
            if act.divergent and not self.queue:
                pc_act = (
                    spec.key_events[pending].activity_for(engine.pc_id)
                    if not story_done
                    else None
                )
                if pc_act is not None and self.committed_event != pending:
                    # abandon the dally; interacting re-adopts instantly
                    self.committed_event = pending
                    if not self._plan_follow(pc_act.object_id):
                        self.queue = []
            return self._emit()

        self.performing = False
        if story_done:
            return self._emit()

        if not self.queue:
            pc_act = spec.key_events[pending].activity_for(engine.pc_id)
            if pc_act is not None:
                if self.committed_event == pending:
                    # plan exhausted but activity never stuck: re-path
                    self._plan_follow(pc_act.object_id)
                elif self.rng.random() < self.dally_chance:
                    self._plan_dally()
                else:
                    self.committed_event = pending
                    self._plan_follow(pc_act.object_id)
            elif self.rng.random() < 0.25:
                self._plan_dally()
        return self._emit()

    def _emit(self) -> ViewerCommand | None:
        if not self.queue:
            return None
        prim = self.queue.pop(0)
        return ViewerCommand(at_tick=self.engine.world.tick + 1, **prim)


def synthesize_trace(
    spec: VignetteSpec,
    *,
    seed: int,
    mode: PlannerMode = PlannerMode.CD,
    config: RuntimeConfig | None = None,
    gateway: Gateway | None = None,
    dally_chance: float = 0.5,
    description: str = "",
    max_ticks: int | None = None,
) -> ViewerTrace:
    """Play one run with a mixed follow/dally policy and record the commands.

    The driver observes live world state, so the resulting trace always
    carries the player through their authored activities; replaying it
    against the same (spec, mode, seed, mock) reproduces the run exactly.
    """
    gateway = gateway or Gateway(ScriptedMockProvider())
    engine = Engine(spec, gateway, mode=mode, config=config, seed=seed)
    driver = _PcDriver(engine, random.Random(seed), dally_chance)
    limit = max_ticks if max_ticks is not None else engine.config.max_ticks
    recorded: list[ViewerCommand] = []
    while engine.world.status == "running" and engine.world.tick < limit:
        cmd = driver.next_command()
        if cmd is not None:
            engine.post_command(cmd)
            recorded.append(cmd)
        engine.step()
    return ViewerTrace(
        seed=seed,
        description=description or f"synthesized, dally_chance={dally_chance}",
        commands=tuple(recorded),
        config=engine.config,
    )
