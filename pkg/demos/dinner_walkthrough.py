#!/usr/bin/env python3
"""Author and play the bundled dinner vignette, end to end.

Walks the full pipeline against the bundled mock script, narrating as it
goes:

1. extract the story into rooms, characters, and key events;
2. revise the draft the way an author would: relabel a room, rearrange
   furniture, add a dining chair, tune Jack's persona over chat, put him
   at the dinner table;
3. play the run as the viewer: cook with Julie, ask her about the salt,
   wander off to clean the bookshelf, get nudged back to dinner by the
   inner voice and by Julie, then watch Jack's guitar and Julie's song
   close the story.

By default the script checks the frozen bundle artifacts still match
what it produces. With --write it refreshes them in the repo checkout:

    src/vignette/data/dinner/dinner.vignette.json
    src/vignette/data/dinner/follow_trace.json
    tests/golden/dinner_events.jsonl
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from vignette.build.pathing import find_path
from vignette.core.serialize import encode_spec
from vignette.core.types import ObjectKind, VignetteSpec
from vignette.extract.session import DraftInvalidError, ExtractionSession
from vignette.harness.bundle import (
    DINNER_CONFIG,
    DINNER_SEED,
    dinner_gateway,
    dinner_story,
)
from vignette.harness.runner import run_trace
from vignette.harness.trace import ViewerTrace, save_trace
from vignette.runtime import Engine, ViewerCommand
from vignette.runtime import world as w

ROOT = Path(__file__).resolve().parents[1]
BUNDLE = ROOT / "src" / "vignette" / "data" / "dinner"
GOLDEN = ROOT / "tests" / "golden" / "dinner_events.jsonl"

_STEP = {(0, -1): "N", (0, 1): "S", (1, 0): "E", (-1, 0): "W"}

COOK = "cooking an Indonesian dish"
SALT_QUESTION = "How much salt should I add?"
SKIP_LINE = "Actually I want to skip dinner and keep tidying up in here."


def author_spec(say) -> VignetteSpec:
    """Drive the extraction session through every authoring stage."""
    session = ExtractionSession(dinner_story(), dinner_gateway(), seed=DINNER_SEED)
    session.begin()
    say(f"extracted {len(session.characters)} characters on layout "
        f"{session.layout.layout_id}")

    session.set_room_label("room_b", "living room")
    env = session.confirm_rooms()
    say(f"rooms confirmed; {len(env.objects)} objects placed, "
        f"{len(session.key_events)} key events drafted")

    # Rearrange the living room sofa: first legal spot that isn't where
    # it already sits, scanning the room row-major.
    sofa = next(o for o in env.objects if o.name == "sofa")
    room = next(r for r in env.rooms if r.id == sofa.room_id)
    x0, y0, rw, rh = room.rect
    for pos in ((x, y) for y in range(y0, y0 + rh) for x in range(x0, x0 + rw)):
        if pos == sofa.position:
            continue
        try:
            session.move_object(sofa.id, pos)
            say(f"moved the sofa to {pos}")
            break
        except DraftInvalidError:
            continue

    plant = next(
        (o for o in session.environment.objects if o.kind is ObjectKind.DECORATIVE),
        None,
    )
    if plant is not None:
        session.remove_object(plant.id)
        say(f"cleared out the {plant.name}")

    chair = session.add_object("dining chair", "room_a")
    say(f"added a {chair.name} in the kitchen ({chair.id})")
    session.confirm_objects()

    reply = session.simulate_chat("npc_jack", "Hey Jack, rough week. Deadline is close.")
    say(f'tried a chat with Jack -> "{reply}"')
    session.record_chat(
        "npc_jack",
        "Hey Jack, rough week. Deadline is close.",
        reply,
    )
    suggestion = session.suggest_persona("npc_jack")
    session.update_character("npc_jack", personality=suggestion["personality"])
    say(f"set Jack's personality to {suggestion['personality']!r} from the suggestion")
    session.confirm_characters()

    session.add_activity(1, "npc_jack", "having dinner")
    for cid in ("pc_me", "npc_julie", "npc_jack"):
        session.bind_object(1, cid, chair.id)
    say(f"added Jack to the dinner event and bound everyone to {chair.id}")

    spec = session.confirm_events()
    say(f"spec complete: {len(spec.key_events)} key events, "
        f"{len(spec.environment.objects)} objects")
    return spec


class _Beats:
    """The scripted viewer: one beat at a time, one command per tick."""

    def __init__(self, engine: Engine):
        self.engine = engine
        self.queue: list[dict] = []
        self.stage = 0

    def _me(self):
        return self.engine.world.characters[self.engine.pc_id]

    def _route(self, object_id: str) -> list[dict]:
        obj = self.engine.objects[object_id]
        goals = set(obj.zone.tiles) & self.engine.walkable
        path = find_path(self.engine.walkable, self._me().position, goals)
        if path is None:
            raise RuntimeError(f"no path to {object_id}")
        steps = [
            {"kind": "move", "direction": _STEP[(b[0] - a[0], b[1] - a[1])]}
            for a, b in zip(path, path[1:])
        ]
        steps.append({"kind": "interact", "object_id": object_id})
        return steps

    def _object_named(self, name: str) -> str:
        return next(o.id for o in self.engine.spec.environment.objects if o.name == name)

    def _seen(self, kind: str, **payload) -> bool:
        for record in self.engine.log.of_kind(kind):
            if all(record.payload.get(k) == v for k, v in payload.items()):
                return True
        return False

    def _cooking_since(self) -> int | None:
        for record in self.engine.log.of_kind(w.REC_ACTIVITY_START):
            if record.actor == self.engine.pc_id and record.payload.get("action") == COOK:
                return record.tick
        return None

    def next_command(self) -> ViewerCommand | None:
        tick = self.engine.world.tick
        if not self.queue:
            if self.stage == 0 and tick >= 2:
                # beat 1: walk to the stove and start cooking
                self.queue = self._route(self._object_named("stove"))
                self.stage = 1
            elif self.stage == 1:
                # beat 2: a few ticks into cooking, ask Julie about the salt
                started = self._cooking_since()
                if started is not None and tick >= started + 3:
                    self.queue = [
                        {"kind": "chat", "npc_id": "npc_julie", "text": SALT_QUESTION}
                    ]
                    self.stage = 2
            elif self.stage == 2 and self._seen(w.REC_EVENT_COMPLETED, event_index=0):
                # beat 3: drift off-story to the bookshelf
                self.queue = self._route(self._object_named("bookshelf"))
                self.stage = 3
            elif self.stage == 3 and self.engine.log.of_kind(w.REC_INNER_VOICE):
                # beat 4: the inner voice fired; float skipping dinner at Julie
                self.queue = [
                    {"kind": "chat", "npc_id": "npc_julie", "text": SKIP_LINE}
                ]
                self.stage = 4
            elif self.stage == 4 and self._seen(w.REC_CHAT, guide=True):
                # beat 5: take the guidance, head to the chair for dinner
                self.queue = self._route(self._object_named("dining chair"))
                self.stage = 5
        if not self.queue:
            return None
        prim = self.queue.pop(0)
        return ViewerCommand(at_tick=tick + 1, **prim)


def record_trace(spec: VignetteSpec, say) -> ViewerTrace:
    engine = Engine(
        spec, dinner_gateway(), config=DINNER_CONFIG, seed=DINNER_SEED
    )
    beats = _Beats(engine)
    recorded: list[ViewerCommand] = []
    while engine.world.status == "running" and engine.world.tick < 4000:
        command = beats.next_command()
        if command is not None:
            engine.post_command(command)
            recorded.append(command)
        engine.step()

    for record in engine.log.records:
        if record.kind == w.REC_CHAT and record.payload["to"] == engine.pc_id:
            who = engine.names.get(record.actor, record.actor)
            tag = " (guiding)" if record.payload.get("guide") else ""
            say(f'tick {record.tick}: {who}{tag}: "{record.payload["text"]}"')
        elif record.kind == w.REC_INNER_VOICE:
            say(f'tick {record.tick}: inner voice: "{record.payload["text"]}"')
    completed = [
        r.payload["event_index"] for r in engine.log.of_kind(w.REC_EVENT_COMPLETED)
    ]
    say(f"run {engine.world.status} after {engine.world.tick} ticks; "
        f"events completed in order {completed}")

    return ViewerTrace(
        seed=DINNER_SEED,
        description="dinner walkthrough: cook with Julie, dally at the "
        "bookshelf, rejoin for dinner",
        commands=tuple(recorded),
        config=engine.config,
    )


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    parser.add_argument(
        "--write",
        action="store_true",
        help="refresh the frozen bundle artifacts in the repo checkout",
    )
    parser.add_argument(
        "--quiet", action="store_true", help="suppress the narration"
    )
    args = parser.parse_args(argv)
    say = (lambda _msg: None) if args.quiet else print

    say("-- authoring --")
    spec = author_spec(say)
    say("")
    say("-- viewing --")
    trace = record_trace(spec, say)

    result = run_trace(spec, trace, gateway=dinner_gateway())
    if not result.bottleneck_safe:
        print("replay diverged from the storyline:", result.diagnostics,
              file=sys.stderr)
        return 1
    replay_log = result.log.to_jsonl()

    spec_bytes = encode_spec(spec)
    trace_doc = trace.to_jsonable()

    if args.write:
        BUNDLE.mkdir(parents=True, exist_ok=True)
        GOLDEN.parent.mkdir(parents=True, exist_ok=True)
        (BUNDLE / "dinner.vignette.json").write_bytes(spec_bytes)
        save_trace(trace, BUNDLE / "follow_trace.json")
        GOLDEN.write_text(replay_log, encoding="utf-8")
        say("")
        say(f"wrote {BUNDLE / 'dinner.vignette.json'}")
        say(f"wrote {BUNDLE / 'follow_trace.json'}")
        say(f"wrote {GOLDEN}")
        return 0

    # check mode: the frozen bundle must match what we just produced
    stale = []
    frozen_spec = BUNDLE / "dinner.vignette.json"
    if not frozen_spec.exists() or frozen_spec.read_bytes() != spec_bytes:
        stale.append(str(frozen_spec))
    frozen_trace = BUNDLE / "follow_trace.json"
    import json as _json

    if (
        not frozen_trace.exists()
        or _json.loads(frozen_trace.read_text("utf-8")) != trace_doc
    ):
        stale.append(str(frozen_trace))
    if not GOLDEN.exists() or GOLDEN.read_text(encoding="utf-8") != replay_log:
        stale.append(str(GOLDEN))
    say("")
    if stale:
        print("stale bundle artifacts (rerun with --write):", file=sys.stderr)
        for path in stale:
            print(f"  {path}", file=sys.stderr)
        return 1
    say("frozen bundle artifacts are up to date")
    return 0


if __name__ == "__main__":
    sys.exit(main())
