"""The staged authoring session: story in, confirmed vignette out.

One session owns one story and walks it through the confirmation stages

    layout_pending -> rooms_pending -> objects_pending
                   -> characters_pending -> events_pending -> complete

in that order and no other. Every author-visible mutation happens through
a method that names its stage; calling out of order raises StageError, so
the service can answer 409 without bookkeeping of its own. Edits are
last-writer-wins over whatever the extractor proposed, and every edit
re-validates the draft — an edit that would break an invariant raises
DraftInvalidError with the full report and leaves the draft untouched.

Sessions serialize to a plain JSON document and back, so a restart picks
up mid-authoring drafts exactly where they stopped.
"""

from __future__ import annotations

import dataclasses
import random
from typing import Any

from vignette.build.affordance import build_request
from vignette.build.catalog import AssetCatalog, load_catalog
from vignette.build.layouts import LayoutCatalog, load_layouts
from vignette.build.placement import (
    PlacementFailure,
    PlacementRequest,
    fill_decorative,
    place_objects,
    spawn_tile,
)
from vignette.build.zones import compute_trigger_tiles
from vignette.build.envcheck import validate_environment
from vignette.core.serialize import spec_from_jsonable, spec_to_jsonable
from vignette.core.types import (
    ActivityTuple,
    Character,
    Environment,
    Facing,
    KeyEvent,
    ObjectInstance,
    ObjectKind,
    TriggerZone,
    VignetteSpec,
)
from vignette.core.validation import (
    CHARACTER_NAME_BLANK,
    UNKNOWN_CHARACTER_REF,
    UNKNOWN_OBJECT_REF,
    CHARACTER_DOUBLE_BOOKED,
    EVENT_EMPTY,
    ValidationReport,
    validate_environment_geometry,
    validate_spec,
)
from vignette.extract import pipeline
from vignette.extract.pipeline import advisory
from vignette.llm.gateway import Gateway

__all__ = [
    "MAX_STORY_CHARS",
    "STAGES",
    "StageError",
    "StoryError",
    "DraftInvalidError",
    "ExtractionSession",
]

MAX_STORY_CHARS = 2000

STAGES = (
    "layout_pending",
    "rooms_pending",
    "objects_pending",
    "characters_pending",
    "events_pending",
    "complete",
)


class StageError(RuntimeError):
    """Operation called out of stage order."""

    def __init__(self, current: str, allowed: tuple[str, ...]):
        super().__init__(
            f"session is at stage {current!r}; this needs {' or '.join(allowed)}"
        )
        self.current = current
        self.allowed = allowed


class StoryError(ValueError):
    """Story fails the basic size contract (empty, or over the cap)."""

    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code


class DraftInvalidError(ValueError):
    """An edit or confirmation would break a draft invariant."""

    def __init__(self, report: ValidationReport):
        codes = ", ".join(sorted(report.codes())) or "invalid"
        super().__init__(f"draft rejected: {codes}")
        self.report = report


def _report(code: str, path: str, message: str) -> ValidationReport:
    rep = ValidationReport()
    rep.add(code, path, message)
    return rep


class ExtractionSession:
    """Single-writer authoring state for one story."""

    def __init__(
        self,
        story_text: str,
        gateway: Gateway,
        *,
        assets: AssetCatalog | None = None,
        layouts: LayoutCatalog | None = None,
        seed: int = 0,
        title: str | None = None,
    ):
        if not story_text.strip():
            raise StoryError("EMPTY_STORY", "story text is empty")
        if len(story_text) > MAX_STORY_CHARS:
            raise StoryError(
                "STORY_TOO_LONG",
                f"story is {len(story_text)} chars; the cap is {MAX_STORY_CHARS}",
            )
        self.story_text = story_text
        self.title = title or story_text.strip().splitlines()[0][:60]
        self.gateway = gateway
        self.assets = assets or load_catalog()
        self.layouts = layouts or load_layouts()
        self.seed = seed
        self._rng = random.Random(seed)

        self.stage = "layout_pending"
        self.warnings: list[dict[str, str]] = []
        self.characters: tuple[Character, ...] = ()
        self.layout = None
        self.room_labels: dict[str, str] = {}
        self.environment: Environment | None = None
        self.placement_failures: list[PlacementFailure] = []
        self.key_events: tuple[KeyEvent, ...] = ()
        self.needs_object: list[dict] = []
        self._next_object = 0
        self._affordances: dict = {}
        self._rules: dict = {}

    # ----- stage plumbing ----------------------------------------------------

    def _require(self, *allowed: str) -> None:
        if self.stage not in allowed:
            raise StageError(self.stage, allowed)

    def _character(self, character_id: str) -> Character:
        for c in self.characters:
            if c.id == character_id:
                return c
        raise LookupError(f"no character {character_id!r}")

    def _object(self, object_id: str) -> ObjectInstance:
        assert self.environment is not None
        obj = self.environment.objects_by_id().get(object_id)
        if obj is None:
            raise LookupError(f"no object {object_id!r}")
        return obj

    # ----- opening extraction --------------------------------------------------

    def begin(self, keep_characters: list[str] | None = None) -> "ExtractionSession":
        """Run the opening extraction chain; lands at rooms_pending."""
        self._require("layout_pending")
        chars, warns = pipeline.extract_characters(
            self.story_text, self.gateway, keep=keep_characters
        )
        self.characters = chars
        self.warnings.extend(warns)
        layout, warns = pipeline.select_layout(self.story_text, self.gateway, self.layouts)
        self.layout = layout
        self.warnings.extend(warns)
        labels, warns = pipeline.label_rooms(self.story_text, self.gateway, layout)
        self.room_labels = labels
        self.warnings.extend(warns)
        self.stage = "rooms_pending"
        return self

    # ----- rooms ---------------------------------------------------------------

    def set_room_label(self, room_id: str, label: str) -> None:
        self._require("rooms_pending")
        if room_id not in self.room_labels:
            raise LookupError(f"no room {room_id!r} in layout")
        cleaned = label.strip()
        if not cleaned:
            raise DraftInvalidError(
                _report("ROOM_LABEL_BLANK", f"rooms[{room_id}]", "label is empty")
            )
        self.room_labels[room_id] = cleaned

    def confirm_rooms(self, labels: dict[str, str] | None = None) -> Environment:
        """Freeze room labels, then furnish: defaults per label + decoration."""
        self._require("rooms_pending")
        for rid, label in (labels or {}).items():
            self.set_room_label(rid, label)
        assert self.layout is not None
        rooms = self.layout.make_rooms(self.room_labels)
        env = Environment(
            layout_id=self.layout.layout_id,
            grid_width=self.layout.grid_width,
            grid_height=self.layout.grid_height,
            rooms=rooms,
        )
        requests = []
        for room in rooms:
            for asset in self.assets.defaults_for_room(room.label):
                requests.append(
                    build_request(
                        f"obj_{self._next_object}",
                        asset.name,
                        room.id,
                        ObjectKind.NECESSARY_ROOM,
                        self.gateway,
                        self.assets,
                    )
                )
                self._next_object += 1
        result = place_objects(env, requests)
        for failure in result.failures:
            self.placement_failures.append(failure)
            self.warnings.append(
                advisory(failure.code, f"{failure.name}: {failure.reason}")
            )
        self.environment = result.environment

        # events are drafted now so the scene can receive the objects the
        # story needs (the extractor's "guitar for the practice" case);
        # the author reviews the drafts at the events stage
        events, needs, warns = pipeline.extract_events(
            self.story_text, self.characters, self.environment, self.gateway
        )
        self.key_events = events
        self.needs_object = needs
        self.warnings.extend(warns)
        self._auto_place_event_objects()

        self.environment = fill_decorative(self.environment, self.assets, self._rng)
        self.stage = "objects_pending"
        return self.environment

    def _room_for_asset(self, asset) -> str:
        """Deterministic room choice for an auto-placed event object."""
        assert self.environment is not None
        rooms = self.environment.rooms
        for room in rooms:
            defaults = {a.asset_id for a in self.assets.defaults_for_room(room.label)}
            if asset.asset_id in defaults:
                return room.id
        tags = {d.strip().lower() for d in asset.decorative_for}
        for room in rooms:
            if room.label.strip().lower() in tags:
                return room.id
        walkable = self.environment.walkable_tiles()
        ranked = sorted(
            rooms, key=lambda r: (-len(set(r.tiles()) & walkable), r.id)
        )
        return ranked[0].id

    def _auto_place_event_objects(self) -> None:
        """Place catalog-known objects the drafted events still lack."""
        assert self.environment is not None
        names: list[str] = []
        for entry in self.needs_object:
            name = (entry.get("object_name") or "").strip()
            if name and name.lower() not in [n.lower() for n in names]:
                names.append(name)
        for name in names:
            asset = self.assets.lookup(name)
            if asset is None:
                continue  # stays a NEEDS_OBJECT flag for the author
            request = PlacementRequest.from_asset(
                f"obj_{self._next_object}",
                asset,
                self._room_for_asset(asset),
                ObjectKind.NECESSARY_EVENT,
            )
            result = place_objects(self.environment, [request])
            if result.failures:
                for failure in result.failures:
                    self.placement_failures.append(failure)
                    self.warnings.append(
                        advisory(failure.code, f"{failure.name}: {failure.reason}")
                    )
                continue
            self._next_object += 1
            self.environment = result.environment
            self._bind_by_name(name, request.object_id)

    def _bind_by_name(self, object_name: str, object_id: str) -> None:
        wanted = object_name.strip().lower()
        flagged = {
            (n["event"], n["character_id"])
            for n in self.needs_object
            if (n.get("object_name") or "").strip().lower() == wanted
        }
        events = []
        for event in self.key_events:
            acts = tuple(
                dataclasses.replace(act, object_id=object_id)
                if not act.object_id and (event.index, act.character_id) in flagged
                else act
                for act in event.activities
            )
            events.append(dataclasses.replace(event, activities=acts))
        self.key_events = tuple(events)
        self.needs_object = [
            n
            for n in self.needs_object
            if (n["event"], n["character_id"]) not in flagged
        ]

    # ----- objects ---------------------------------------------------------------

    def add_object(self, name: str, room_id: str) -> ObjectInstance:
        """Text-to-object: type a name, get a placed, reachable instance."""
        self._require("objects_pending", "events_pending")
        assert self.environment is not None
        if room_id not in self.environment.rooms_by_id():
            raise LookupError(f"no room {room_id!r}")
        request = build_request(
            f"obj_{self._next_object}",
            name,
            room_id,
            ObjectKind.NECESSARY_ROOM,
            self.gateway,
            self.assets,
            affordances=self._affordances,
            rules=self._rules,
            placed_names=[o.name for o in self.environment.objects],
        )
        result = place_objects(self.environment, [request])
        if result.failures:
            failure = result.failures[0]
            self.placement_failures.append(failure)
            raise DraftInvalidError(
                _report(failure.code, f"objects[{failure.object_id}]", failure.reason)
            )
        self._next_object += 1
        self.environment = result.environment
        return self._object(request.object_id)

    def move_object(
        self,
        object_id: str,
        position: tuple[int, int],
        facing: Facing | None = None,
    ) -> ObjectInstance:
        self._require("objects_pending", "events_pending")
        assert self.environment is not None
        obj = self._object(object_id)
        new_facing = facing or obj.facing
        entry = self.assets.by_id(obj.asset_id) if obj.asset_id else None
        tiles = compute_trigger_tiles(
            tuple(position),
            obj.footprint,
            obj.zone.zone_type,
            new_facing,
            partial_rect=entry.partial_rect if entry else None,
            clip=(self.environment.grid_width, self.environment.grid_height),
        )
        moved = dataclasses.replace(
            obj,
            position=tuple(position),
            facing=new_facing,
            zone=TriggerZone(obj.zone.zone_type, tiles),
        )
        objects = tuple(
            moved if o.id == object_id else o for o in self.environment.objects
        )
        self._commit_environment(
            dataclasses.replace(self.environment, objects=objects)
        )
        return moved

    def remove_object(self, object_id: str) -> None:
        self._require("objects_pending", "events_pending")
        assert self.environment is not None
        self._object(object_id)
        for event in self.key_events:
            for act in event.activities:
                if act.object_id == object_id:
                    raise DraftInvalidError(
                        _report(
                            UNKNOWN_OBJECT_REF,
                            f"key_events[{event.index}]",
                            f"event {event.index} still uses {object_id!r};"
                            " unbind it first",
                        )
                    )
        objects = tuple(o for o in self.environment.objects if o.id != object_id)
        self._commit_environment(
            dataclasses.replace(self.environment, objects=objects)
        )

    def _commit_environment(self, env: Environment) -> None:
        """Re-validate a prospective environment; keep the old one on failure."""
        report = ValidationReport()
        validate_environment_geometry(env, report)
        # tuples still waiting for an object carry an empty object_id and
        # are flagged elsewhere; only bound ones constrain the scene
        bound = tuple(
            dataclasses.replace(
                e,
                activities=tuple(a for a in e.activities if a.object_id),
            )
            for e in self.key_events
        )
        checked = validate_environment(
            env, bound, spawn=spawn_tile(env) if env.objects else None
        )
        report.violations.extend(checked.violations)
        if not report.ok:
            raise DraftInvalidError(report)
        self.environment = env

    def confirm_objects(self) -> None:
        self._require("objects_pending")
        assert self.environment is not None
        self._commit_environment(self.environment)
        self.stage = "characters_pending"

    # ----- characters ---------------------------------------------------------

    def update_character(self, character_id: str, **fields: str | None) -> Character:
        """Edit name or persona fields; blank strings clear a field."""
        self._require("characters_pending")
        char = self._character(character_id)
        allowed = {"name", *Character.PERSONA_FIELDS}
        unknown = set(fields) - allowed
        if unknown:
            raise ValueError(f"unknown character fields: {sorted(unknown)}")
        updates: dict[str, str | None] = {}
        for key, value in fields.items():
            cleaned = value.strip() if isinstance(value, str) else None
            if key == "name":
                if not cleaned:
                    raise DraftInvalidError(
                        _report(
                            CHARACTER_NAME_BLANK,
                            f"characters[{character_id}]",
                            "name cannot be blank",
                        )
                    )
                updates[key] = cleaned
            else:
                updates[key] = cleaned or None
        newchar = char.with_fields(**updates)
        self.characters = tuple(
            newchar if c.id == character_id else c for c in self.characters
        )
        return newchar

    def simulate_chat(self, character_id: str, message: str) -> str:
        self._require("characters_pending")
        return pipeline.simulate_chat(self._character(character_id), message, self.gateway)

    def record_chat(self, character_id: str, author_line: str, reply_line: str) -> Character:
        """Store one (possibly author-edited) exchange as snippets."""
        self._require("characters_pending")
        char = self._character(character_id)
        snippets = char.conversation_snippets + (
            ("author", author_line),
            (char.name, reply_line),
        )
        newchar = char.with_fields(conversation_snippets=snippets)
        self.characters = tuple(
            newchar if c.id == character_id else c for c in self.characters
        )
        return newchar

    def suggest_persona(self, character_id: str) -> dict[str, str]:
        self._require("characters_pending")
        return pipeline.suggest_persona(self._character(character_id), self.gateway)

    def confirm_characters(self) -> tuple[KeyEvent, ...]:
        """Freeze the cast; the drafted events open for review next."""
        self._require("characters_pending")
        self.stage = "events_pending"
        return self.key_events

    # ----- events ----------------------------------------------------------------

    def _event_report(self, events: tuple[KeyEvent, ...]) -> ValidationReport:
        report = ValidationReport()
        assert self.environment is not None
        object_ids = set(self.environment.objects_by_id())
        character_ids = {c.id for c in self.characters}
        for event in events:
            path = f"key_events[{event.index}]"
            if not event.activities:
                report.add(EVENT_EMPTY, path, "event has no activities")
            seen: set[str] = set()
            for act in event.activities:
                if act.character_id not in character_ids:
                    report.add(
                        UNKNOWN_CHARACTER_REF, path, f"unknown character {act.character_id!r}"
                    )
                if act.character_id in seen:
                    report.add(
                        CHARACTER_DOUBLE_BOOKED,
                        path,
                        f"{act.character_id} appears twice",
                    )
                seen.add(act.character_id)
                if act.object_id and act.object_id not in object_ids:
                    report.add(
                        UNKNOWN_OBJECT_REF, path, f"unknown object {act.object_id!r}"
                    )
                if not act.action.strip():
                    report.add(EVENT_EMPTY, path, "activity with empty action")
        return report

    def set_events(
        self, events: list[list[tuple[str, str, str]]]
    ) -> tuple[KeyEvent, ...]:
        """Replace the whole event list (author edit, last-writer-wins).

        Each entry is (character_id, action, object_id); an empty object_id
        keeps the tuple but flags it as still needing an object.
        """
        self._require("events_pending")
        rebuilt = tuple(
            KeyEvent(
                index=i,
                activities=tuple(
                    ActivityTuple(character_id=c, action=a, object_id=o)
                    for c, a, o in group
                ),
            )
            for i, group in enumerate(events)
        )
        report = self._event_report(rebuilt)
        if not report.ok:
            raise DraftInvalidError(report)
        self.key_events = rebuilt
        self.needs_object = [
            {
                "event": e.index,
                "character_id": a.character_id,
                "action": a.action,
                "flag": "NEEDS_OBJECT",
            }
            for e in rebuilt
            for a in e.activities
            if not a.object_id
        ]
        return rebuilt

    def add_activity(
        self, event_index: int, character_id: str, action: str, object_id: str = ""
    ) -> None:
        """Add one activity to an existing event (the "add Jack" edit)."""
        self._require("events_pending")
        char = self._character(character_id)
        if object_id:
            self._object(object_id)
        if not 0 <= event_index < len(self.key_events):
            raise LookupError(f"no event {event_index}")
        cleaned = action.strip()
        if not cleaned:
            raise DraftInvalidError(
                _report(EVENT_EMPTY, f"key_events[{event_index}]", "empty action")
            )
        event = self.key_events[event_index]
        if event.activity_for(character_id) is not None:
            raise DraftInvalidError(
                _report(
                    CHARACTER_DOUBLE_BOOKED,
                    f"key_events[{event_index}]",
                    f"{char.name} already has an activity in this event",
                )
            )
        extended = dataclasses.replace(
            event,
            activities=event.activities
            + (ActivityTuple(character_id, cleaned, object_id),),
        )
        events = list(self.key_events)
        events[event_index] = extended
        self.key_events = tuple(events)
        if not object_id:
            self.needs_object.append(
                {
                    "event": event_index,
                    "character_id": character_id,
                    "action": cleaned,
                    "object_name": None,
                    "flag": "NEEDS_OBJECT",
                }
            )

    def bind_object(self, event_index: int, character_id: str, object_id: str) -> None:
        """Resolve one NEEDS_OBJECT flag by pointing the tuple at an object."""
        self._require("events_pending")
        self._object(object_id)
        events = list(self.key_events)
        if not 0 <= event_index < len(events):
            raise LookupError(f"no event {event_index}")
        event = events[event_index]
        acts = []
        found = False
        for act in event.activities:
            if act.character_id == character_id:
                acts.append(dataclasses.replace(act, object_id=object_id))
                found = True
            else:
                acts.append(act)
        if not found:
            raise LookupError(
                f"character {character_id!r} has no activity in event {event_index}"
            )
        events[event_index] = dataclasses.replace(event, activities=tuple(acts))
        self.key_events = tuple(events)
        self.needs_object = [
            n
            for n in self.needs_object
            if not (n["event"] == event_index and n["character_id"] == character_id)
        ]

    def confirm_events(self) -> VignetteSpec:
        """Final validation; retags event objects; lands at complete."""
        self._require("events_pending")
        assert self.environment is not None
        report = self._event_report(self.key_events)
        for entry in self.needs_object:
            report.add(
                UNKNOWN_OBJECT_REF,
                f"key_events[{entry['event']}]",
                f"{entry['character_id']}: {entry['action']!r} still needs an object",
            )
        if not report.ok:
            raise DraftInvalidError(report)

        # object kinds follow actual usage: whatever the events touch is an
        # event object; an auto-placed event object the author rebound away
        # from demotes to plain furniture instead of tripping validation
        used = {act.object_id for e in self.key_events for act in e.activities}
        objects = []
        for o in self.environment.objects:
            if o.id in used and o.kind is not ObjectKind.NECESSARY_EVENT:
                objects.append(dataclasses.replace(o, kind=ObjectKind.NECESSARY_EVENT))
            elif o.id not in used and o.kind is ObjectKind.NECESSARY_EVENT:
                objects.append(dataclasses.replace(o, kind=ObjectKind.NECESSARY_ROOM))
            else:
                objects.append(o)
        objects = tuple(objects)
        env = dataclasses.replace(self.environment, objects=objects)
        spec = VignetteSpec(
            story_text=self.story_text,
            title=self.title,
            environment=env,
            characters=self.characters,
            key_events=self.key_events,
        )
        final = validate_spec(spec)
        if not final.ok:
            raise DraftInvalidError(final)
        self.environment = env
        self.stage = "complete"
        return spec

    # ----- views -----------------------------------------------------------------

    def spec(self) -> VignetteSpec:
        self._require("complete")
        return self.draft_spec()

    def draft_spec(self) -> VignetteSpec:
        """The draft as a spec; placeholder environment before confirm_rooms."""
        env = self.environment or Environment(layout_id="", grid_width=0, grid_height=0)
        return VignetteSpec(
            story_text=self.story_text,
            title=self.title,
            environment=env,
            characters=self.characters,
            key_events=self.key_events,
        )

    # ----- persistence -------------------------------------------------------------

    def to_jsonable(self) -> dict[str, Any]:
        return {
            "session_version": 1,
            "stage": self.stage,
            "seed": self.seed,
            "warnings": list(self.warnings),
            "layout_id": self.layout.layout_id if self.layout else None,
            "room_labels": dict(self.room_labels),
            "placement_failures": [
                {
                    "object_id": f.object_id,
                    "name": f.name,
                    "code": f.code,
                    "reason": f.reason,
                }
                for f in self.placement_failures
            ],
            "needs_object": list(self.needs_object),
            "next_object_index": self._next_object,
            "spec": spec_to_jsonable(self.draft_spec()),
        }

    @classmethod
    def from_jsonable(
        cls,
        doc: dict[str, Any],
        gateway: Gateway,
        *,
        assets: AssetCatalog | None = None,
        layouts: LayoutCatalog | None = None,
    ) -> "ExtractionSession":
        spec = spec_from_jsonable(doc["spec"])
        session = cls(
            spec.story_text,
            gateway,
            assets=assets,
            layouts=layouts,
            seed=doc["seed"],
            title=spec.title,
        )
        session.stage = doc["stage"]
        session.warnings = list(doc["warnings"])
        layout_id = doc["layout_id"]
        session.layout = session.layouts.by_id(layout_id) if layout_id else None
        session.room_labels = dict(doc["room_labels"])
        session.characters = spec.characters
        session.environment = spec.environment if spec.environment.layout_id else None
        session.key_events = spec.key_events
        session.needs_object = list(doc["needs_object"])
        session.placement_failures = [
            PlacementFailure(
                object_id=f["object_id"],
                name=f["name"],
                code=f["code"],
                reason=f["reason"],
            )
            for f in doc["placement_failures"]
        ]
        session._next_object = doc["next_object_index"]
        return session
