"""The tick engine.

Branch-and-bottleneck rules, in order of importance:

* Key events complete strictly in authored order. Progress toward event
  k accrues only while k is the pending event, only for characters doing
  their authored activity for k inside the right trigger zone. An NPC
  that arrives at a future event's object early simply waits there.
* The player may diverge at will; divergence never blocks, it only
  triggers cues (inner voice, NPC chat guidance).
* NPC plans are requested the moment an activity is adopted and become
  consumable after the provider's latency, converted to whole ticks.
  When a plan is not ready at an activity boundary the NPC takes a
  logged idle fallback and recovers at the end of it.

Per-tick order of operations (fixed, for determinism): viewer command,
plan deliveries, NPC adoption at boundaries, movement, performing
decrements, completions, bottleneck advance, divergence cues, end check.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass

from vignette.build.pathing import find_path
from vignette.core.types import ActivityTuple, Role, Tile, VignetteSpec
from vignette.core.validation import validate_spec
from vignette.build.envcheck import validate_environment
from vignette.build.placement import spawn_tiles
from vignette.llm.gateway import Gateway, REFUSAL_LINE
from vignette.plan.planner import (
    IDLE_ACTION,
    PlannerMode,
    PlanPair,
    PastActivity,
    Storyline,
    chat_reply,
    classify_intent,
    detect_divergence,
    guide_reply,
    inner_voice,
    plan_pair,
    resolve,
)
from vignette.runtime import world as w
from vignette.runtime.world import (
    ActiveActivity,
    CharacterState,
    EventLog,
    ViewerCommand,
    WorldState,
)

__all__ = ["RuntimeConfig", "Engine"]


@dataclass(frozen=True)
class RuntimeConfig:
    activity_duration: int = 80  # D: performing ticks per activity
    idle_divergence_ticks: int = 30  # G: idle-under-glow threshold
    inner_voice_cooldown: int = 60  # C: min ticks between cues
    ms_per_tick: int = 100
    max_ticks: int = 200_000


@dataclass
class _PendingPlan:
    pair: PlanPair
    premise_event: int | None  # pending event at request time
    content_event: int | None  # event plan_a's authored tuple belongs to
    ready_tick: int


class Engine:
    """One live run of a vignette. Single-writer; step() owns the world."""

    def __init__(
        self,
        spec: VignetteSpec,
        gateway: Gateway,
        mode: PlannerMode = PlannerMode.CD,
        config: RuntimeConfig | None = None,
        seed: int = 0,
    ):
        report = validate_spec(spec)
        if not report.ok:
            raise ValueError(f"invalid spec: {sorted(report.codes())}")
        env_report = validate_environment(spec.environment, spec.key_events)
        if not env_report.ok:
            raise ValueError(f"invalid environment: {sorted(env_report.codes())}")

        self.spec = spec
        self.gateway = gateway
        self.mode = mode
        self.config = config or RuntimeConfig()
        self.rng = random.Random(seed)
        self.log = EventLog()

        self.env = spec.environment
        self.walkable = self.env.walkable_tiles()
        self.objects = self.env.objects_by_id()
        self.names = {c.id: c.name for c in spec.characters}
        pc = spec.player()
        if pc is None:
            raise ValueError("spec has no player character")
        self.pc_id = pc.id

        ordered = [pc] + [c for c in spec.characters if c.role is Role.NPC]
        tiles = spawn_tiles(self.env, len(ordered))
        self.world = WorldState(
            tick=0,
            status="running",
            characters={
                c.id: CharacterState(character_id=c.id, position=tiles[i])
                for i, c in enumerate(ordered)
            },
            glow=frozenset(),
            pending_event=0,
            event_progress={},
            completed_events=0,
        )
        self._commands: list[ViewerCommand] = []
        self._pending_plans: dict[str, _PendingPlan] = {}
        self._ready_plans: dict[str, _PendingPlan] = {}
        self._past: list[PastActivity] = []
        self._update_glow(initial=True)

        # Every NPC opens with one full idle window; its plan request goes
        # out at tick 0, so a latency below one activity duration is
        # always hidden, including at the very first boundary.
        for npc in self._npc_ids():
            self._adopt(
                npc,
                ActivityTuple(character_id=npc, action=IDLE_ACTION, object_id=""),
                authored_event=None,
                generated=False,
                divergent=False,
                request_plan=True,
            )

    # ----- small helpers ---------------------------------------------------

    def _npc_ids(self) -> list[str]:
        return sorted(
            c.id for c in self.spec.characters if c.role is Role.NPC
        )

    def _events(self):
        return self.spec.key_events

    def _pending(self) -> int:
        return self.world.pending_event

    def _story_done(self) -> bool:
        return self._pending() >= len(self._events())

    def _duration(self) -> int:
        return self.config.activity_duration

    def _progress(self, event_index: int, character_id: str) -> int:
        return self.world.event_progress.get((event_index, character_id), 0)

    def _pc_state(self) -> CharacterState:
        return self.world.characters[self.pc_id]

    def _pc_pending_authored(self) -> ActivityTuple | None:
        """The player's not-yet-performed activity in the pending key event.

        None when the story is over, the event has no player part, or the
        player already performed it (then they owe the story nothing and
        may wait for co-actors without counting as diverged).
        """
        if self._story_done():
            return None
        k = self._pending()
        act = self._events()[k].activity_for(self.pc_id)
        if act is None or self._progress(k, self.pc_id) >= self._duration():
            return None
        return act

    def _in_zone(self, state: CharacterState) -> bool:
        act = state.activity
        if act is None:
            return False
        if act.object_id == "":
            return True
        obj = self.objects.get(act.object_id)
        return obj is not None and state.position in obj.zone.tiles

    def _log(self, actor: str, kind: str, payload: dict) -> None:
        self.log.append(self.world.tick, actor, kind, payload)

    # ----- glow / storyline -------------------------------------------------

    def _update_glow(self, initial: bool = False) -> None:
        if self._story_done():
            new = frozenset()
        else:
            event = self._events()[self._pending()]
            new = frozenset(a.object_id for a in event.activities)
        if initial or new != self.world.glow:
            self.world.glow = new
            self._log("world", w.REC_GLOW_CHANGED, {"object_ids": sorted(new)})

    def _storyline(self) -> Storyline:
        ongoing = []
        for cid in sorted(self.world.characters):
            st = self.world.characters[cid]
            if st.activity is not None and st.activity.action != IDLE_ACTION:
                obj = self.objects.get(st.activity.object_id)
                where = obj.name if obj else "somewhere"
                ongoing.append((self.names[cid], f"{st.activity.action} ({where})"))
        next_event = None if self._story_done() else self._events()[self._pending()]
        return Storyline(
            past=tuple(self._past),
            ongoing=tuple(ongoing),
            next_event_index=None if self._story_done() else self._pending(),
            next_event=next_event,
            spec_title=self.spec.title,
        )

    # ----- planning ---------------------------------------------------------

    def _content_event(self, npc_id: str, adopted_event: int | None) -> int | None:
        """Which event the convergent plan should draw its activity from.

        The first event at or after the pending one (and strictly after
        whatever authored activity is being adopted right now) where this
        NPC still has authored work to do, or the next bottleneck it is
        not part of. None once the convergent future runs past the story.
        """
        events = self._events()
        start = self._pending()
        if adopted_event is not None:
            start = max(start, adopted_event + 1)
        for e in range(start, len(events)):
            authored = events[e].activity_for(npc_id)
            if authored is None:
                return e
            if self._progress(e, npc_id) < self._duration():
                return e
        return None

    def _request_plan(self, npc_id: str, adopted_event: int | None) -> None:
        if self._story_done():
            return
        npc = self.spec.characters_by_id()[npc_id]
        content = self._content_event(npc_id, adopted_event)
        storyline = self._storyline()
        if content is not None and content != self._pending():
            storyline = Storyline(
                past=storyline.past,
                ongoing=storyline.ongoing,
                next_event_index=content,
                next_event=self._events()[content],
                spec_title=storyline.spec_title,
            )
        elif content is None:
            storyline = Storyline(
                past=storyline.past,
                ongoing=storyline.ongoing,
                next_event_index=None,
                next_event=None,
                spec_title=storyline.spec_title,
            )
        pair = plan_pair(
            npc,
            storyline,
            self.env,
            self.mode,
            self.gateway,
            planned_at=self.world.tick,
            rng=self.rng,
            names=self.names,
        )
        ready_tick = self.world.tick + math.ceil(
            pair.request_latency_ms / self.config.ms_per_tick
        )
        plan = _PendingPlan(
            pair=pair,
            premise_event=self._pending(),
            content_event=content,
            ready_tick=ready_tick,
        )
        self._pending_plans[npc_id] = plan
        self._log(
            npc_id,
            w.REC_PLAN_REQUESTED,
            {
                "ready_tick": ready_tick,
                "latency_ms": pair.request_latency_ms,
                "premise_event": plan.premise_event,
                "content_event": plan.content_event,
                "flags": list(pair.flags),
            },
        )

    def _deliver_plans(self) -> None:
        for npc_id in list(self._pending_plans):
            plan = self._pending_plans[npc_id]
            if plan.ready_tick <= self.world.tick:
                self._ready_plans[npc_id] = plan
                del self._pending_plans[npc_id]

    def _pc_followed(self, premise: int | None) -> bool:
        if premise is None or premise >= len(self._events()):
            return True
        if self._pending() > premise:
            return True
        k = self._pending()
        event = self._events()[k]
        pc_act = event.activity_for(self.pc_id)
        pc_state = self._pc_state()
        if pc_act is None:
            cur = pc_state.activity
            return not (cur is not None and cur.divergent)
        if self._progress(k, self.pc_id) >= self._duration():
            return True
        cur = pc_state.activity
        return cur is not None and cur.authored_event == k

    # ----- activity lifecycle -----------------------------------------------

    def _adopt(
        self,
        character_id: str,
        tup: ActivityTuple,
        *,
        authored_event: int | None,
        generated: bool,
        divergent: bool,
        request_plan: bool,
    ) -> None:
        state = self.world.characters[character_id]
        remaining = self._duration()
        if authored_event is not None:
            remaining = max(
                0, self._duration() - self._progress(authored_event, character_id)
            )
        state.activity = ActiveActivity(
            action=tup.action,
            object_id=tup.object_id,
            remaining=remaining,
            authored_event=authored_event,
            generated=generated,
            divergent=divergent,
            started_at=self.world.tick,
        )
        state.idle_ticks = 0
        if tup.object_id:
            obj = self.objects.get(tup.object_id)
            if obj is None or state.position in obj.zone.tiles:
                state.path = []
            else:
                path = find_path(self.walkable, state.position, obj.zone.tiles)
                state.path = path[1:] if path else []
        else:
            state.path = []
        obj = self.objects.get(tup.object_id)
        self._log(
            character_id,
            w.REC_ACTIVITY_START,
            {
                "action": tup.action,
                "object_id": tup.object_id,
                "object_name": obj.name if obj else None,
                "authored_event": authored_event,
                "generated": generated,
                "divergent": divergent,
            },
        )
        if character_id != self.pc_id and request_plan:
            self._request_plan(character_id, authored_event)

    def _finish_activity(self, character_id: str, completed: bool) -> None:
        state = self.world.characters[character_id]
        act = state.activity
        if act is None:
            return
        obj = self.objects.get(act.object_id)
        self._log(
            character_id,
            w.REC_ACTIVITY_END,
            {
                "action": act.action,
                "object_id": act.object_id,
                "completed": completed,
                "authored_event": act.authored_event,
                "generated": act.generated,
                "divergent": act.divergent,
            },
        )
        if act.action != IDLE_ACTION:
            self._past.append(
                PastActivity(
                    character_name=self.names[character_id],
                    action=act.action,
                    object_name=obj.name if obj else "",
                    divergent=act.divergent,
                )
            )
        state.activity = None
        state.path = []

    def _npc_boundary(self, npc_id: str) -> None:
        """Pick the NPC's next activity at the end of the previous one."""
        if self._story_done():
            self._pending_plans.pop(npc_id, None)
            self._ready_plans.pop(npc_id, None)
            return
        plan = self._ready_plans.pop(npc_id, None)
        if plan is None:
            in_flight = npc_id in self._pending_plans
            self._log(
                npc_id,
                w.REC_FALLBACK,
                {"reason": "plan_not_ready" if in_flight else "no_plan"},
            )
            self._adopt(
                npc_id,
                ActivityTuple(character_id=npc_id, action=IDLE_ACTION, object_id=""),
                authored_event=None,
                generated=False,
                divergent=False,
                # an in-flight request will land during this idle window;
                # only re-request when the slot is somehow empty
                request_plan=not in_flight,
            )
            return
        followed = self._pc_followed(plan.premise_event)
        tup = resolve(plan.pair, followed)
        authored_event = None
        if followed and not plan.pair.plan_a_generated:
            authored_event = plan.content_event
        generated = plan.pair.plan_a_generated if followed else True
        if authored_event is None:
            # a generated pick that lands on the pending event's authored
            # activity for this NPC still advances the bottleneck
            k = self._pending()
            authored = self._events()[k].activity_for(npc_id)
            if (
                authored is not None
                and (tup.action, tup.object_id) == (authored.action, authored.object_id)
                and self._progress(k, npc_id) < self._duration()
            ):
                authored_event = k
        self._log(
            npc_id,
            w.REC_PLAN_RESOLVED,
            {
                "branch": "follow" if followed else "diverge",
                "action": tup.action,
                "object_id": tup.object_id,
                "authored_event": authored_event,
                "fallback": bool(plan.pair.flags),
            },
        )
        self._adopt(
            npc_id,
            tup,
            authored_event=authored_event,
            generated=generated,
            divergent=authored_event is None and tup.action != IDLE_ACTION,
            request_plan=True,
        )

    # ----- viewer commands ---------------------------------------------------

    def post_command(self, command: ViewerCommand) -> None:
        self._commands.append(command)

    def _execute_command(self, cmd: ViewerCommand) -> None:
        if cmd.kind == "move":
            self._do_move(cmd)
        elif cmd.kind == "interact":
            self._do_interact(cmd.object_id or "")
        elif cmd.kind == "chat":
            self._do_chat(cmd.npc_id or "", cmd.text or "")
        elif cmd.kind == "wait":
            pass
        else:
            self._log(
                self.pc_id, w.REC_COMMAND_REJECTED, {"reason": f"unknown kind {cmd.kind}"}
            )

    def _do_move(self, cmd: ViewerCommand) -> None:
        state = self._pc_state()
        dx, dy = cmd.direction_offset()
        target = (state.position[0] + dx, state.position[1] + dy)
        if target not in self.walkable:
            self._log(
                self.pc_id,
                w.REC_BLOCKED,
                {"direction": cmd.direction, "at": list(state.position)},
            )
            return
        state.position = target
        state.idle_ticks = 0
        self._log(
            self.pc_id,
            w.REC_MOVE,
            {"direction": cmd.direction, "to": list(target)},
        )

    def _do_interact(self, object_id: str) -> None:
        state = self._pc_state()
        obj = self.objects.get(object_id)
        if obj is None:
            self._log(
                self.pc_id,
                w.REC_COMMAND_REJECTED,
                {"reason": "NO_SUCH_OBJECT", "object_id": object_id},
            )
            return
        if state.position not in obj.zone.tiles:
            self._log(
                self.pc_id,
                w.REC_COMMAND_REJECTED,
                {"reason": "NOT_IN_ZONE", "object_id": object_id},
            )
            return
        authored = None
        if not self._story_done():
            event = self._events()[self._pending()]
            pc_act = event.activity_for(self.pc_id)
            if (
                pc_act is not None
                and pc_act.object_id == object_id
                and object_id in self.world.glow
            ):
                authored = pc_act
        cur = state.activity
        if authored is not None:
            if cur is not None and cur.authored_event == self._pending():
                self._log(
                    self.pc_id,
                    w.REC_COMMAND_IGNORED,
                    {"reason": "already_active", "object_id": object_id},
                )
                return
            if cur is not None:
                self._finish_activity(self.pc_id, completed=False)
            self._adopt(
                self.pc_id,
                ActivityTuple(
                    character_id=self.pc_id,
                    action=authored.action,
                    object_id=object_id,
                ),
                authored_event=self._pending(),
                generated=False,
                divergent=False,
                request_plan=False,
            )
            return
        # Non-glowing (or not the player's authored) object: divergence.
        action = obj.actions[0] if obj.actions else "inspect"
        if (
            cur is not None
            and cur.divergent
            and cur.object_id == object_id
            and cur.action == action
        ):
            self._log(
                self.pc_id,
                w.REC_COMMAND_IGNORED,
                {"reason": "already_active", "object_id": object_id},
            )
            return
        if cur is not None:
            self._finish_activity(self.pc_id, completed=False)
        self._adopt(
            self.pc_id,
            ActivityTuple(
                character_id=self.pc_id, action=action, object_id=object_id
            ),
            authored_event=None,
            generated=False,
            divergent=True,
            request_plan=False,
        )

    def _do_chat(self, npc_id: str, text: str) -> None:
        npc = self.spec.characters_by_id().get(npc_id)
        if npc is None or npc.role is not Role.NPC:
            self._log(
                self.pc_id,
                w.REC_COMMAND_REJECTED,
                {"reason": "NO_SUCH_NPC", "npc_id": npc_id},
            )
            return
        decision = self.gateway.moderate(text)
        if not decision.allowed:
            self._log(
                self.pc_id,
                w.REC_CHAT,
                {
                    "to": npc_id,
                    "text": "",
                    "withheld": True,
                    "reason": decision.reason,
                },
            )
            self._log(
                npc_id,
                w.REC_CHAT,
                {"to": self.pc_id, "text": REFUSAL_LINE, "withheld": False, "guide": False},
            )
            return
        self._log(
            self.pc_id,
            w.REC_CHAT,
            {"to": npc_id, "text": text, "withheld": False},
        )
        intent = "small_talk"
        guide = False
        if not self._story_done():
            pc_act = self._pc_pending_authored()
            next_action = pc_act.action if pc_act else ""
            if pc_act is not None:
                intent = classify_intent(self.gateway, text, next_action)
            if intent == "derail":
                guide = True
                reply = guide_reply(self.gateway, npc, text, next_action)
            else:
                reply = chat_reply(self.gateway, npc, self._chat_history(npc_id), text)
        else:
            reply = chat_reply(self.gateway, npc, self._chat_history(npc_id), text)
        reply_decision = self.gateway.moderate(reply)
        if not reply_decision.allowed:
            reply = REFUSAL_LINE
        self._log(
            npc_id,
            w.REC_CHAT,
            {
                "to": self.pc_id,
                "text": reply,
                "withheld": not reply_decision.allowed,
                "guide": guide,
                "intent": intent,
            },
        )

    def _chat_history(self, npc_id: str) -> tuple[tuple[str, str], ...]:
        history = []
        for record in self.log.of_kind(w.REC_CHAT):
            payload = record.payload
            if payload.get("withheld"):
                continue
            pair = {record.actor, payload.get("to")}
            if pair == {self.pc_id, npc_id}:
                speaker = self.names.get(record.actor, record.actor)
                history.append((speaker, payload["text"]))
        return tuple(history[-10:])

    # ----- per-tick phases ----------------------------------------------------

    def _phase_commands(self) -> None:
        due = [c for c in self._commands if c.at_tick <= self.world.tick]
        if not due:
            return
        cmd = due[0]
        self._commands.remove(cmd)
        self._execute_command(cmd)

    def _phase_npc_movement(self) -> None:
        for npc_id in self._npc_ids():
            state = self.world.characters[npc_id]
            if state.path:
                state.position = state.path.pop(0)

    def _phase_perform(self) -> None:
        duration = self._duration()
        for cid in sorted(self.world.characters):
            state = self.world.characters[cid]
            act = state.activity
            if act is None:
                continue
            if state.path:
                continue  # still walking there
            if not self._in_zone(state):
                continue  # paused (player stepped out)
            if act.authored_event is not None:
                if act.authored_event != self._pending():
                    continue  # waiting for its event to become pending
                key = (act.authored_event, cid)
                self.world.event_progress[key] = min(
                    duration, self._progress(*key) + 1
                )
            if act.remaining > 0:
                act.remaining -= 1

    def _phase_completions(self) -> None:
        for cid in sorted(self.world.characters):
            state = self.world.characters[cid]
            act = state.activity
            if act is None or act.remaining > 0:
                continue
            self._finish_activity(cid, completed=True)
            if cid != self.pc_id:
                self._npc_boundary(cid)

    def _phase_bottleneck(self) -> None:
        if self._story_done():
            return
        k = self._pending()
        event = self._events()[k]
        duration = self._duration()
        if all(
            self._progress(k, a.character_id) >= duration for a in event.activities
        ):
            self._log("world", w.REC_EVENT_COMPLETED, {"event_index": k})
            self.world.pending_event += 1
            self.world.completed_events += 1
            self.world.diverged = False
            self._pc_state().idle_ticks = 0
            self._update_glow()

    def _phase_divergence(self) -> None:
        if self._story_done():
            self.world.diverged = False
            return
        pc_authored = self._pc_pending_authored()
        pc_state = self._pc_state()
        act = pc_state.activity
        pc_tuple = None
        if act is not None and act.authored_event != self._pending():
            pc_tuple = ActivityTuple(
                character_id=self.pc_id, action=act.action, object_id=act.object_id
            )
        authored_tuple = None
        if pc_authored is not None:
            authored_tuple = ActivityTuple(
                character_id=self.pc_id,
                action=pc_authored.action,
                object_id=pc_authored.object_id,
            )
        diverged = detect_divergence(
            pc_activity=pc_tuple,
            pc_authored=authored_tuple,
            pc_idle_ticks=pc_state.idle_ticks,
            glow_active=bool(self.world.glow),
            idle_threshold=self.config.idle_divergence_ticks,
        )
        if diverged and not self.world.diverged:
            self._log(
                self.pc_id,
                w.REC_DIVERGENCE,
                {
                    "via": "activity" if pc_tuple is not None else "idle",
                    "pending_event": self._pending(),
                },
            )
        self.world.diverged = diverged
        if not diverged or pc_authored is None:
            return
        last = self.world.last_cue_tick
        if last is not None and self.world.tick - last < self.config.inner_voice_cooldown:
            return
        obj = self.objects.get(pc_authored.object_id)
        cue = inner_voice(
            self.gateway, pc_authored.action, obj.name if obj else "it"
        )
        self.world.last_cue_tick = self.world.tick
        self._log(self.pc_id, w.REC_INNER_VOICE, {"text": cue})

    def _phase_end(self) -> None:
        if not self._story_done():
            return
        # the end screen follows the final key event immediately; anything
        # still in flight (a dally, an NPC side errand) is cut short
        for cid, st in self.world.characters.items():
            if st.activity is not None:
                self._finish_activity(cid, completed=False)
        self.world.status = "ended"
        self._log("world", w.REC_RUN_ENDED, {"ticks": self.world.tick})

    # ----- public stepping ------------------------------------------------------

    def step(self) -> None:
        """Advance the world by one tick."""
        if self.world.status != "running":
            due = [c for c in self._commands if c.at_tick <= self.world.tick]
            for cmd in due:
                self._commands.remove(cmd)
                self._log(
                    self.pc_id,
                    w.REC_COMMAND_IGNORED,
                    {"reason": "run_ended", "kind": cmd.kind},
                )
            return
        self.world.tick += 1
        pc_state = self._pc_state()
        had_move = False
        due = [c for c in self._commands if c.at_tick <= self.world.tick]
        if due and due[0].kind == "move":
            had_move = True
        self._phase_commands()
        self._deliver_plans()
        self._phase_npc_movement()
        self._phase_perform()
        if pc_state.activity is None and not had_move:
            pc_state.idle_ticks += 1
        self._phase_completions()
        self._phase_bottleneck()
        self._phase_divergence()
        self._phase_end()

    def run(self, commands: list[ViewerCommand] | None = None, max_ticks: int | None = None) -> WorldState:
        """Feed a whole command list and step until the run ends."""
        for cmd in commands or []:
            self.post_command(cmd)
        limit = max_ticks if max_ticks is not None else self.config.max_ticks
        while self.world.status == "running" and self.world.tick < limit:
            self.step()
        return self.world
