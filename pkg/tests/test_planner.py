"""Plan pairs, prompt ablations, and the divergence predicate."""

import random
from collections import Counter

import pytest
from scipy import stats

from vignette.core.types import (
    ActivityTuple,
    Character,
    Environment,
    KeyEvent,
    ObjectInstance,
    ObjectKind,
    Role,
    Room,
    TriggerZone,
    ZoneType,
)
from vignette.llm.gateway import Gateway
from vignette.llm.providers import ScriptedMockProvider
from vignette.plan.planner import (
    IDLE_ACTION,
    PlannerMode,
    Storyline,
    detect_divergence,
    plan_pair,
    resolve,
)
from tests.conftest import RecordingProvider


def _env(n_objects=10):
    objects = tuple(
        ObjectInstance(
            id=f"obj_{i}",
            name=f"thing {i}",
            room_id="room_a",
            position=(1 + i, 1),
            footprint=(1, 1),
            actions=(f"using thing {i}",),
            zone=TriggerZone(ZoneType.AROUND, frozenset({(1 + i, 2)})),
            kind=ObjectKind.NECESSARY_ROOM,
        )
        for i in range(n_objects)
    )
    return Environment(
        layout_id="synthetic",
        grid_width=n_objects + 2,
        grid_height=4,
        rooms=(Room(id="room_a", label="workshop", rect=(0, 0, n_objects + 2, 4)),),
        objects=objects,
    )


NPC = Character(id="npc_x", role=Role.NPC, name="Xan", personality="restless")
AUTHORED = ActivityTuple(character_id="npc_x", action="using thing 0", object_id="obj_0")
EVENT = KeyEvent(index=0, activities=(AUTHORED,))
STORYLINE = Storyline(
    past=(), ongoing=(), next_event_index=0, next_event=EVENT, spec_title="t"
)
UNASSIGNED = Storyline(
    past=(),
    ongoing=(),
    next_event_index=0,
    next_event=KeyEvent(
        index=0,
        activities=(
            ActivityTuple(character_id="npc_other", action="using thing 1", object_id="obj_1"),
        ),
    ),
    spec_title="t",
)


def _pair(mode, storyline=STORYLINE, gateway=None, seed=1):
    gateway = gateway or Gateway(ScriptedMockProvider())
    return plan_pair(
        NPC, storyline, _env(), mode, gateway,
        planned_at=0, rng=random.Random(seed), names={"npc_x": "Xan"},
    )


@pytest.mark.parametrize("mode", list(PlannerMode))
def test_assigned_plan_a_is_authored_verbatim_in_every_mode(mode):
    pair = _pair(mode)
    assert pair.plan_a == AUTHORED
    assert not pair.plan_a_generated


def test_resolve_is_a_pure_branch_pick():
    pair = _pair(PlannerMode.CD)
    assert resolve(pair, True) == pair.plan_a
    assert resolve(pair, False) == pair.plan_b


def test_plan_b_is_a_legal_menu_choice():
    pair = _pair(PlannerMode.CD)
    env = _env()
    obj = env.objects_by_id()[pair.plan_b.object_id]
    assert pair.plan_b.action in obj.actions


def _prompts(mode):
    provider = RecordingProvider(ScriptedMockProvider())
    _pair(mode, gateway=Gateway(provider))
    prompts = provider.prompts_for("PLAN_ACTIVITY")
    assert prompts, "expected at least one planning prompt"
    return prompts


def test_cd_prompts_carry_persona_and_storyline():
    for prompt in _prompts(PlannerMode.CD):
        assert "[PERSONA]" in prompt
        assert "[STORYLINE]" in prompt


def test_po_prompts_lack_storyline():
    for prompt in _prompts(PlannerMode.PO):
        assert "[PERSONA]" in prompt
        assert "[STORYLINE]" not in prompt


def test_so_prompts_lack_persona():
    for prompt in _prompts(PlannerMode.SO):
        assert "[PERSONA]" not in prompt
        assert "[STORYLINE]" in prompt


def test_bl_mode_never_renders_a_planning_prompt():
    provider = RecordingProvider(ScriptedMockProvider())
    _pair(PlannerMode.BL, gateway=Gateway(provider))
    assert not provider.prompts_for("PLAN_ACTIVITY")
    assert provider.prompts_for("BL_ACTIVITY")


def test_bl_object_choice_is_uniform():
    env = _env(10)
    gateway = Gateway(ScriptedMockProvider())
    rng = random.Random(2024)
    counts = Counter()
    for _ in range(1000):
        pair = plan_pair(
            NPC, STORYLINE, env, PlannerMode.BL, gateway,
            planned_at=0, rng=rng, names={},
        )
        counts[pair.plan_b.object_id] += 1  # plan_a is authored; one draw per call
    observed = [counts[f"obj_{i}"] for i in range(10)]
    assert sum(observed) == 1000
    p = stats.chisquare(observed).pvalue
    assert p > 0.01, f"BL object draw looks non-uniform: {observed}, p={p}"


def test_invalid_model_choice_falls_back_to_idle():
    script = {
        "version": 1,
        "entries": [
            {"template_id": "PLAN_ACTIVITY", "match": {},
             "response": {"object_id": "obj_0", "action": "juggling chainsaws"}},
        ],
    }
    pair = _pair(PlannerMode.CD, storyline=UNASSIGNED,
                 gateway=Gateway(ScriptedMockProvider(script)))
    assert pair.plan_a.action == IDLE_ACTION
    assert pair.plan_b.action == IDLE_ACTION
    assert "plan_a_fallback" in pair.flags
    assert "plan_b_fallback" in pair.flags


def test_transport_failure_falls_back_to_idle():
    script = {
        "version": 1,
        "entries": [],
        "faults": [{"kind": "transport", "template_id": "PLAN_ACTIVITY", "times": 99}],
    }
    pair = _pair(PlannerMode.CD, gateway=Gateway(ScriptedMockProvider(script)))
    assert pair.plan_a == AUTHORED  # authored side never needs the model
    assert pair.plan_b.action == IDLE_ACTION
    assert "plan_b_fallback" in pair.flags


# ----- divergence predicate ------------------------------------------------

COOK = ActivityTuple(character_id="pc", action="cooking", object_id="obj_0")
CLEAN = ActivityTuple(character_id="pc", action="cleaning", object_id="obj_3")


@pytest.mark.parametrize(
    "activity,authored,idle,glow,expected",
    [
        (None, COOK, 0, True, False),       # waiting, under threshold
        (None, COOK, 4, True, True),        # idled past G with cue up
        (None, COOK, 4, False, False),      # no cue, idling is fine
        (COOK, COOK, 0, True, False),       # doing the authored thing
        (CLEAN, COOK, 0, True, True),       # doing something else
        (CLEAN, None, 0, True, True),       # off-story act, no assignment
        (None, None, 99, True, False),      # unassigned idling never diverges
    ],
)
def test_detect_divergence_table(activity, authored, idle, glow, expected):
    got = detect_divergence(
        pc_activity=activity,
        pc_authored=authored,
        pc_idle_ticks=idle,
        glow_active=glow,
        idle_threshold=4,
    )
    assert got is expected
