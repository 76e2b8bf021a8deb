"""Random valid vignettes for stress and acceptance runs.

Builds on the same placement pipeline the authoring flow uses, so every
generated spec satisfies the geometry invariants by construction: no
footprint overlaps, all trigger zones reachable, every key-event object
placed. Event structure is randomized (which characters act, on which
objects, over how many bottlenecks)."""

from __future__ import annotations

import dataclasses
import random

from vignette.build.catalog import AssetCatalog, load_catalog
from vignette.build.envcheck import validate_environment
from vignette.build.layouts import LayoutCatalog, load_layouts
from vignette.build.placement import PlacementRequest, fill_decorative, place_objects
from vignette.core.types import (
    ActivityTuple,
    Character,
    Environment,
    KeyEvent,
    ObjectKind,
    Role,
    VignetteSpec,
)
from vignette.core.validation import validate_spec

__all__ = ["generate_spec"]

_PC_NAMES = ("Kim", "Alex", "Sam", "Noor", "Dana", "Riko")
_NPC_NAMES = ("Julie", "Jack", "Mina", "Theo", "Priya", "Leo", "Ana", "Omar")


def _place_rooms(env: Environment, catalog: AssetCatalog) -> Environment:
    requests = []
    counter = 0
    for room in env.rooms:
        for asset in catalog.defaults_for_room(room.label):
            counter += 1
            requests.append(
                PlacementRequest.from_asset(
                    f"obj_{counter}", asset, room.id, kind=ObjectKind.NECESSARY_ROOM
                )
            )
    result = place_objects(env, requests)
    if result.failures:
        # room defaults always fit the bundled layouts; anything else is
        # a generator bug worth failing loudly on
        raise RuntimeError(f"default placement failed: {result.failures}")
    return result.environment


def _make_characters(rng: random.Random) -> tuple[Character, ...]:
    npc_count = rng.randint(1, 2)
    names = rng.sample(_NPC_NAMES, npc_count)
    pc_name = rng.choice(_PC_NAMES)
    chars = [
        Character(
            id="player_1",
            role=Role.PC,
            name=pc_name,
            sprite_id="sprite_person_1",
        )
    ]
    moods = (None, "cheerful", "focused", "tired")
    for i, name in enumerate(names, start=2):
        chars.append(
            Character(
                id=f"npc_{name.lower()}",
                role=Role.NPC,
                name=name,
                personality=rng.choice((None, "supportive", "curious", "quiet")),
                mood=rng.choice(moods),
                sprite_id=f"sprite_person_{i}",
            )
        )
    return tuple(chars)


def _make_events(
    rng: random.Random, characters: tuple[Character, ...], env: Environment
) -> tuple[KeyEvent, ...]:
    objects = sorted(env.objects, key=lambda o: o.id)
    usable = [o for o in objects if o.actions]
    event_count = rng.randint(2, 4)
    events = []
    for index in range(event_count):
        cast_size = rng.randint(1, len(characters))
        cast = rng.sample(list(characters), cast_size)
        picks = rng.sample(usable, min(cast_size, len(usable)))
        activities = tuple(
            ActivityTuple(
                character_id=ch.id,
                action=rng.choice(obj.actions),
                object_id=obj.id,
            )
            for ch, obj in zip(sorted(cast, key=lambda c: c.id), picks)
        )
        events.append(KeyEvent(index=index, activities=activities))
    return tuple(events)


def _story_text(characters, events, env) -> str:
    by_id = {c.id: c for c in characters}
    objects = env.objects_by_id()
    sentences = []
    for event in events:
        parts = [
            f"{by_id[a.character_id].name} was {a.action.replace('_', ' ')} "
            f"at the {objects[a.object_id].name}"
            for a in event.activities
        ]
        sentences.append(" while ".join(parts) + ".")
    return " ".join(sentences)


def generate_spec(
    seed: int,
    *,
    layouts: LayoutCatalog | None = None,
    catalog: AssetCatalog | None = None,
) -> VignetteSpec:
    """One random, fully validated vignette spec."""
    rng = random.Random(seed)
    layouts = layouts or load_layouts()
    catalog = catalog or load_catalog()

    template = rng.choice(layouts.layouts)
    env = Environment(
        layout_id=template.layout_id,
        grid_width=template.grid_width,
        grid_height=template.grid_height,
        rooms=template.make_rooms(),
    )
    env = _place_rooms(env, catalog)
    env = fill_decorative(env, catalog, rng)

    characters = _make_characters(rng)
    events = _make_events(rng, characters, env)

    # mirror the authoring flow: story objects get the event kind
    used = {a.object_id for e in events for a in e.activities}
    env = dataclasses.replace(
        env,
        objects=tuple(
            o if o.id not in used
            else dataclasses.replace(o, kind=ObjectKind.NECESSARY_EVENT)
            for o in env.objects
        ),
    )

    spec = VignetteSpec(
        story_text=_story_text(characters, events, env),
        title=f"generated vignette {seed}",
        environment=env,
        characters=characters,
        key_events=events,
    )
    report = validate_spec(spec)
    if not report.ok:
        raise RuntimeError(f"generated spec invalid: {sorted(report.codes())}")
    env_report = validate_environment(spec.environment, spec.key_events)
    if not env_report.ok:
        raise RuntimeError(f"generated environment invalid: {sorted(env_report.codes())}")
    return spec
