"""Core vignette element types.

A vignette is described by three elements: the environment (rooms plus
placed objects), the characters (one player character, up to two
non-player characters), and an ordered list of key events, each grouping
simultaneous (character, action, object) activities.

All geometry is in integer tiles; one tile is one character step.
Every type here is an immutable value: mutation means building a new value,
which makes the types safe to share across sessions and threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterator, Optional

Tile = tuple[int, int]


class Role(str, Enum):
    PC = "pc"
    NPC = "npc"


class ZoneType(str, Enum):
    """Where a character must stand to interact with an object.

    on          -- on top of the object (sleeping on a bed)
    partial     -- on a designated part of the object (the seat of a sofa)
    around      -- on any tile of the one-tile ring surrounding the object
    directional -- on the row of tiles adjacent to the object's facing side
    """

    ON = "on"
    PARTIAL = "partial"
    AROUND = "around"
    DIRECTIONAL = "directional"


class ObjectKind(str, Enum):
    NECESSARY_EVENT = "necessary_event"
    NECESSARY_ROOM = "necessary_room"
    DECORATIVE = "decorative"


class Facing(str, Enum):
    NORTH = "north"
    SOUTH = "south"
    EAST = "east"
    WEST = "west"


@dataclass(frozen=True)
class Room:
    """An axis-aligned rectangular room, rect = (x, y, w, h) in tiles."""

    id: str
    label: str
    rect: tuple[int, int, int, int]

    def tiles(self) -> Iterator[Tile]:
        x, y, w, h = self.rect
        for ty in range(y, y + h):
            for tx in range(x, x + w):
                yield (tx, ty)

    def contains(self, tile: Tile) -> bool:
        x, y, w, h = self.rect
        return x <= tile[0] < x + w and y <= tile[1] < y + h


@dataclass(frozen=True)
class TriggerZone:
    zone_type: ZoneType
    tiles: frozenset[Tile]


@dataclass(frozen=True)
class ObjectInstance:
    """A placed object with its footprint, affordances and trigger zone.

    ``facing`` is meaningful only for directional zones and is None
    otherwise.  ``asset_id`` keys into the placeholder asset catalog; no
    image data lives in the spec.
    """

    id: str
    name: str
    room_id: str
    position: Tile
    footprint: tuple[int, int]
    actions: tuple[str, ...]
    zone: TriggerZone
    kind: ObjectKind
    facing: Optional[Facing] = None
    asset_id: str = "asset_generic"

    def footprint_tiles(self) -> Iterator[Tile]:
        x, y = self.position
        w, h = self.footprint
        for ty in range(y, y + h):
            for tx in range(x, x + w):
                yield (tx, ty)


@dataclass(frozen=True)
class Character:
    """A story character.  Persona fields left blank stay None.

    Blank persona fields are the author's choice and are preserved, never
    inferred.  ``conversation_snippets`` holds (speaker, utterance) pairs
    collected while the author chatted with the character; they condition
    later dialogue generation.
    """

    id: str
    role: Role
    name: str
    age: Optional[str] = None
    personality: Optional[str] = None
    social_role: Optional[str] = None
    mood: Optional[str] = None
    language_style: Optional[str] = None
    conversation_snippets: tuple[tuple[str, str], ...] = ()
    sprite_id: str = "sprite_neutral"

    PERSONA_FIELDS = ("age", "personality", "social_role", "mood", "language_style")

    def blank_persona_fields(self) -> tuple[str, ...]:
        return tuple(f for f in self.PERSONA_FIELDS if getattr(self, f) is None)

    def with_fields(self, **updates) -> "Character":
        return replace(self, **updates)


@dataclass(frozen=True)
class ActivityTuple:
    """One character activity: who did what with which object."""

    character_id: str
    action: str
    object_id: str


@dataclass(frozen=True)
class KeyEvent:
    """A group of simultaneous activities; at most one per character."""

    index: int
    activities: tuple[ActivityTuple, ...]

    def activity_for(self, character_id: str) -> Optional[ActivityTuple]:
        for act in self.activities:
            if act.character_id == character_id:
                return act
        return None


@dataclass(frozen=True)
class Environment:
    """Rooms and placed objects on a tile grid.

    Walkability is derived, never stored: a tile is walkable when it lies
    inside some room and is not blocked by an object footprint.  Footprint
    tiles that belong to the object's own on/partial trigger zone stay
    walkable, since characters stand on them to interact (a bed, a sofa
    seat).
    """

    layout_id: str
    grid_width: int
    grid_height: int
    rooms: tuple[Room, ...] = ()
    objects: tuple[ObjectInstance, ...] = ()

    def rooms_by_id(self) -> dict[str, Room]:
        return {r.id: r for r in self.rooms}

    def objects_by_id(self) -> dict[str, ObjectInstance]:
        return {o.id: o for o in self.objects}

    def room_at(self, tile: Tile) -> Optional[Room]:
        for room in self.rooms:
            if room.contains(tile):
                return room
        return None

    def in_grid(self, tile: Tile) -> bool:
        return 0 <= tile[0] < self.grid_width and 0 <= tile[1] < self.grid_height

    def walkable_tiles(self) -> set[Tile]:
        """Tiles a character may occupy; see class docstring for the rule."""
        walkable: set[Tile] = set()
        for room in self.rooms:
            walkable.update(room.tiles())
        for obj in self.objects:
            standable = (
                obj.zone.tiles
                if obj.zone.zone_type in (ZoneType.ON, ZoneType.PARTIAL)
                else frozenset()
            )
            for tile in obj.footprint_tiles():
                if tile not in standable:
                    walkable.discard(tile)
        return walkable


@dataclass(frozen=True)
class VignetteSpec:
    """The author-confirmed bundle every other module consumes."""

    story_text: str
    title: str
    environment: Environment
    characters: tuple[Character, ...] = ()
    key_events: tuple[KeyEvent, ...] = ()
    spec_version: int = 1

    MAX_CHARACTERS = 3

    def player(self) -> Optional[Character]:
        for ch in self.characters:
            if ch.role == Role.PC:
                return ch
        return None

    def npcs(self) -> tuple[Character, ...]:
        return tuple(ch for ch in self.characters if ch.role == Role.NPC)

    def characters_by_id(self) -> dict[str, Character]:
        return {c.id: c for c in self.characters}
