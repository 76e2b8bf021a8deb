"""Spec validation: every type invariant maps to exactly one violation code.

Code map
--------
CHAR_CAP_EXCEEDED            more than three characters
NO_PLAYER_CHARACTER          no character with the PC role
MULTIPLE_PLAYER_CHARACTERS   more than one PC
CHARACTER_NAME_BLANK         character name empty
UNKNOWN_CHARACTER_REF        activity names a character id not in the spec
UNKNOWN_OBJECT_REF           activity names an object id not in the environment
EVENT_INDEX_BROKEN           key-event indices not contiguous 0..n-1 in order
EVENT_EMPTY                  key event with no activities
CHARACTER_DOUBLE_BOOKED      character appears twice in one key event
EVENT_COUNT_EXCEEDED         more key events than the configured soft cap
ROOM_OUT_OF_BOUNDS           room rectangle leaves the grid
ROOM_OVERLAP                 two rooms overlap
ROOM_TOO_SMALL               room smaller than 2x2
ROOM_LABEL_BLANK             room label empty
OBJECT_OVERLAP               two object footprints overlap
OBJECT_OUTSIDE_ROOM          footprint not fully inside its room
OBJECT_COUNT_EXCEEDED        more objects than the configured soft cap
ACTIONS_EMPTY                object with no affordance actions
EVENT_OBJECT_UNREFERENCED    kind=necessary_event object never used by an event
ZONE_EMPTY                   trigger zone with no tiles
ZONE_OUT_OF_BOUNDS           trigger zone tile outside the grid
ZONE_ON_OUTSIDE_FOOTPRINT    on-zone tile outside the footprint
ZONE_AROUND_OVERLAPS_FOOTPRINT  around-zone tile inside the footprint
DIRECTIONAL_FACING_MISSING   directional zone without a facing

Validation reports, it never raises: authoring surfaces show the
violations inline and let the author fix them.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from vignette.core.types import (
    Environment,
    ObjectKind,
    Role,
    VignetteSpec,
    ZoneType,
)

CHAR_CAP_EXCEEDED = "CHAR_CAP_EXCEEDED"
NO_PLAYER_CHARACTER = "NO_PLAYER_CHARACTER"
MULTIPLE_PLAYER_CHARACTERS = "MULTIPLE_PLAYER_CHARACTERS"
CHARACTER_NAME_BLANK = "CHARACTER_NAME_BLANK"
UNKNOWN_CHARACTER_REF = "UNKNOWN_CHARACTER_REF"
UNKNOWN_OBJECT_REF = "UNKNOWN_OBJECT_REF"
EVENT_INDEX_BROKEN = "EVENT_INDEX_BROKEN"
EVENT_EMPTY = "EVENT_EMPTY"
CHARACTER_DOUBLE_BOOKED = "CHARACTER_DOUBLE_BOOKED"
EVENT_COUNT_EXCEEDED = "EVENT_COUNT_EXCEEDED"
ROOM_OUT_OF_BOUNDS = "ROOM_OUT_OF_BOUNDS"
ROOM_OVERLAP = "ROOM_OVERLAP"
ROOM_TOO_SMALL = "ROOM_TOO_SMALL"
ROOM_LABEL_BLANK = "ROOM_LABEL_BLANK"
OBJECT_OVERLAP = "OBJECT_OVERLAP"
OBJECT_OUTSIDE_ROOM = "OBJECT_OUTSIDE_ROOM"
OBJECT_COUNT_EXCEEDED = "OBJECT_COUNT_EXCEEDED"
ACTIONS_EMPTY = "ACTIONS_EMPTY"
EVENT_OBJECT_UNREFERENCED = "EVENT_OBJECT_UNREFERENCED"
ZONE_EMPTY = "ZONE_EMPTY"
ZONE_OUT_OF_BOUNDS = "ZONE_OUT_OF_BOUNDS"
ZONE_ON_OUTSIDE_FOOTPRINT = "ZONE_ON_OUTSIDE_FOOTPRINT"
ZONE_AROUND_OVERLAPS_FOOTPRINT = "ZONE_AROUND_OVERLAPS_FOOTPRINT"
DIRECTIONAL_FACING_MISSING = "DIRECTIONAL_FACING_MISSING"


@dataclass(frozen=True)
class SpecLimits:
    """Soft caps; artifact configuration, not story semantics."""

    max_key_events: int = 12
    max_objects: int = 64


DEFAULT_LIMITS = SpecLimits()


@dataclass(frozen=True)
class Violation:
    code: str
    path: str
    message: str


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def codes(self) -> set[str]:
        return {v.code for v in self.violations}

    def add(self, code: str, path: str, message: str) -> None:
        self.violations.append(Violation(code, path, message))

    def __iter__(self):
        return iter(self.violations)

    def __len__(self) -> int:
        return len(self.violations)


def _rects_overlap(a: tuple[int, int, int, int], b: tuple[int, int, int, int]) -> bool:
    ax, ay, aw, ah = a
    bx, by, bw, bh = b
    return ax < bx + bw and bx < ax + aw and ay < by + bh and by < ay + ah


def validate_environment_geometry(
    env: Environment, report: ValidationReport, limits: SpecLimits = DEFAULT_LIMITS
) -> None:
    """Geometry-only checks; event cross-references live in validate_spec."""
    rooms = list(env.rooms)
    for i, room in enumerate(rooms):
        path = f"environment.rooms[{i}]"
        x, y, w, h = room.rect
        if w < 2 or h < 2:
            report.add(ROOM_TOO_SMALL, path, f"room {room.id} is {w}x{h}, minimum 2x2")
        if x < 0 or y < 0 or x + w > env.grid_width or y + h > env.grid_height:
            report.add(ROOM_OUT_OF_BOUNDS, path, f"room {room.id} leaves the grid")
        if not room.label.strip():
            report.add(ROOM_LABEL_BLANK, path, f"room {room.id} has no label")
        for other in rooms[i + 1 :]:
            if _rects_overlap(room.rect, other.rect):
                report.add(ROOM_OVERLAP, path, f"rooms {room.id} and {other.id} overlap")

    rooms_by_id = env.rooms_by_id()
    if len(env.objects) > limits.max_objects:
        report.add(
            OBJECT_COUNT_EXCEEDED,
            "environment.objects",
            f"{len(env.objects)} objects, cap {limits.max_objects}",
        )

    seen_tiles: dict[tuple[int, int], str] = {}
    for i, obj in enumerate(env.objects):
        path = f"environment.objects[{i}]"
        if not obj.actions:
            report.add(ACTIONS_EMPTY, path, f"object {obj.id} has no actions")

        room = rooms_by_id.get(obj.room_id)
        footprint = list(obj.footprint_tiles())
        if room is None or not all(room.contains(t) for t in footprint):
            report.add(
                OBJECT_OUTSIDE_ROOM, path, f"object {obj.id} not fully inside room {obj.room_id}"
            )
        overlapped = False
        for tile in footprint:
            if tile in seen_tiles and not overlapped:
                report.add(
                    OBJECT_OVERLAP, path, f"objects {seen_tiles[tile]} and {obj.id} overlap"
                )
                overlapped = True
            seen_tiles[tile] = obj.id

        zone = obj.zone
        zpath = f"{path}.zone"
        if not zone.tiles:
            report.add(ZONE_EMPTY, zpath, f"object {obj.id} has an empty trigger zone")
        if any(not env.in_grid(t) for t in zone.tiles):
            report.add(ZONE_OUT_OF_BOUNDS, zpath, f"object {obj.id} zone leaves the grid")
        fp = set(footprint)
        if zone.zone_type == ZoneType.ON and not zone.tiles <= fp:
            report.add(
                ZONE_ON_OUTSIDE_FOOTPRINT, zpath, f"object {obj.id} on-zone outside footprint"
            )
        if zone.zone_type == ZoneType.AROUND and zone.tiles & fp:
            report.add(
                ZONE_AROUND_OVERLAPS_FOOTPRINT,
                zpath,
                f"object {obj.id} around-zone intersects footprint",
            )
        if zone.zone_type == ZoneType.DIRECTIONAL and obj.facing is None:
            report.add(
                DIRECTIONAL_FACING_MISSING, path, f"object {obj.id} is directional without facing"
            )


def validate_spec(spec: VignetteSpec, limits: SpecLimits = DEFAULT_LIMITS) -> ValidationReport:
    """Check every invariant; an empty report means the spec is well formed."""
    report = ValidationReport()

    if len(spec.characters) > VignetteSpec.MAX_CHARACTERS:
        report.add(
            CHAR_CAP_EXCEEDED,
            "characters",
            f"{len(spec.characters)} characters, cap {VignetteSpec.MAX_CHARACTERS}",
        )
    pcs = [c for c in spec.characters if c.role == Role.PC]
    if not pcs:
        report.add(NO_PLAYER_CHARACTER, "characters", "no character has the PC role")
    elif len(pcs) > 1:
        report.add(
            MULTIPLE_PLAYER_CHARACTERS,
            "characters",
            f"{len(pcs)} characters have the PC role",
        )
    for i, ch in enumerate(spec.characters):
        if not ch.name.strip():
            report.add(CHARACTER_NAME_BLANK, f"characters[{i}]", f"character {ch.id} unnamed")

    validate_environment_geometry(spec.environment, report, limits)

    char_ids = {c.id for c in spec.characters}
    object_ids = {o.id for o in spec.environment.objects}

    if len(spec.key_events) > limits.max_key_events:
        report.add(
            EVENT_COUNT_EXCEEDED,
            "key_events",
            f"{len(spec.key_events)} events, cap {limits.max_key_events}",
        )
    indices = [e.index for e in spec.key_events]
    if indices != list(range(len(indices))):
        report.add(
            EVENT_INDEX_BROKEN, "key_events", f"indices {indices} are not contiguous 0..n-1"
        )

    referenced_objects: set[str] = set()
    for i, event in enumerate(spec.key_events):
        path = f"key_events[{i}]"
        if not event.activities:
            report.add(EVENT_EMPTY, path, "key event has no activities")
        seen_chars: set[str] = set()
        for j, act in enumerate(event.activities):
            apath = f"{path}.activities[{j}]"
            if act.character_id in seen_chars:
                report.add(
                    CHARACTER_DOUBLE_BOOKED,
                    apath,
                    f"character {act.character_id} appears twice in event {event.index}",
                )
            seen_chars.add(act.character_id)
            if act.character_id not in char_ids:
                report.add(
                    UNKNOWN_CHARACTER_REF, apath, f"unknown character {act.character_id!r}"
                )
            if act.object_id not in object_ids:
                report.add(UNKNOWN_OBJECT_REF, apath, f"unknown object {act.object_id!r}")
            referenced_objects.add(act.object_id)

    for i, obj in enumerate(spec.environment.objects):
        if obj.kind == ObjectKind.NECESSARY_EVENT and obj.id not in referenced_objects:
            report.add(
                EVENT_OBJECT_UNREFERENCED,
                f"environment.objects[{i}]",
                f"necessary_event object {obj.id} is referenced by no activity",
            )

    return report
