import io
import json
import urllib.error

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from homeplan.errors import (
    BackendError,
    EmptyDecompositionError,
    ReplayMissError,
    UnallocatableError,
)
from homeplan.knowledge import KnowledgeBase
from homeplan.planner import (
    COMMONSENSE_TYPICAL_ROOM,
    Instruction,
    RemoteChatBackend,
    ReplayBackend,
    RuleBasedBackend,
    Subtask,
    allocate,
    allocate_commonsense,
    allocate_random,
    decompose,
    parse_allocation_response,
    render_allocation_prompt,
)
from homeplan.world import load_environment

VOCAB_24 = sorted(load_environment("paper_home").placements)
ROBOCUP_VOCAB = sorted(load_environment("robocup_arena").placements)


# ---------------------------------------------------------------- decompose

def test_decompose_explicit_pair_order_preserving():
    instr = Instruction("I want to make a fruit smoothie, so please find an apple and a banana.")
    subtasks = decompose(instr, VOCAB_24)
    assert subtasks == [Subtask("find", "apple"), Subtask("find", "banana")]


def test_decompose_single_explicit_target():
    subtasks = decompose(Instruction("Could you please find apple."), VOCAB_24)
    assert subtasks == [Subtask("find", "apple")]


def test_decompose_ambiguous_field_trip_via_synonyms():
    instr = Instruction("Get ready for a field trip.", category="ambiguous")
    subtasks = decompose(instr, ROBOCUP_VOCAB, backend=RuleBasedBackend(),
                         synonyms={"water bottle": "water_bottle", "backpack": "bag"})
    assert subtasks == [Subtask("bring", "water_bottle"), Subtask("bring", "bag")]


def test_decompose_underscore_label_with_space_mention():
    subtasks = decompose(Instruction("Please search for the pitcher base."), VOCAB_24)
    assert subtasks == [Subtask("find", "pitcher_base")]


def test_decompose_drops_unanchorable_items():
    class InventiveBackend:
        tag = "replay"

        def complete(self, prompt):
            return "SubTask 1: Bring a water bottle.\nSubTask 2: Bring a jetpack."

    instr = Instruction("Get ready for a field trip.", category="ambiguous")
    subtasks = decompose(instr, ROBOCUP_VOCAB, backend=InventiveBackend())
    assert subtasks == [Subtask("bring", "water_bottle")]


def test_decompose_no_targets_is_error():
    with pytest.raises(EmptyDecompositionError):
        decompose(Instruction("Sing me a song."), VOCAB_24, backend=RuleBasedBackend())


def test_decompose_requires_vocab():
    with pytest.raises(ValueError):
        decompose(Instruction("find apple"), [])


@given(st.permutations(["apple", "banana", "cup", "towel", "plate"]), st.integers(2, 5))
@settings(max_examples=40, deadline=None)
def test_decompose_preserves_mention_order(perm, count):
    mentioned = list(perm)[:count]
    text = "Please " + " and then ".join(f"find the {obj}" for obj in mentioned) + "."
    subtasks = decompose(Instruction(text), VOCAB_24)
    assert [s.target_object for s in subtasks] == mentioned


# ----------------------------------------------------------------- allocate

def test_allocate_apple_goes_to_robot1(kb_robot1, kb_robot2):
    [assignment] = allocate([Subtask("find", "apple")], [kb_robot1, kb_robot2])
    assert assignment.robot_id == "Robot1"
    room, prob = assignment.justification
    assert room == "kitchen"
    assert prob == pytest.approx(0.729, abs=0.005)


def test_allocate_car_toy_goes_to_robot2(kb_robot1, kb_robot2):
    [assignment] = allocate([Subtask("find", "car_toy")], [kb_robot1, kb_robot2])
    assert assignment.robot_id == "Robot2"
    room, prob = assignment.justification
    assert room == "front_of_stairs"
    assert prob == pytest.approx(0.899, abs=0.005)


def test_allocate_single_knowledge_base(kb_robot2):
    subtasks = [Subtask("find", "cup"), Subtask("find", "banana")]
    assignments = allocate(subtasks, [kb_robot2])
    assert all(a.robot_id == "Robot2" for a in assignments)


def test_allocate_unknown_object_raises(kb_robot1, kb_robot2):
    with pytest.raises(UnallocatableError, match="spaceship"):
        allocate([Subtask("find", "spaceship")], [kb_robot1, kb_robot2])


def test_allocate_covers_each_subtask_once(kb_robot1, kb_robot2):
    subtasks = [Subtask("find", o) for o in ("apple", "banana", "cup", "towel")]
    assignments = allocate(subtasks, [kb_robot1, kb_robot2])
    assert [a.subtask for a in assignments] == subtasks


@given(st.floats(0.01, 100.0), st.floats(0.01, 100.0), st.integers(0, 10_000))
@settings(max_examples=50, deadline=None)
def test_allocate_invariant_under_table_rescaling(scale1, scale2, seed):
    rng = np.random.default_rng(seed)
    rooms1 = ["a", "b"]
    rooms2 = ["c", "d"]
    objects = [f"o{i}" for i in range(4)]
    t1 = {o: rng.dirichlet(np.ones(2)).tolist() for o in objects[:3]}
    t2 = {o: rng.dirichlet(np.ones(2)).tolist() for o in objects[1:]}
    kb1 = KnowledgeBase("Robot1", rooms1, [[], []], t1)
    kb2 = KnowledgeBase("Robot2", rooms2, [[], []], t2)
    scaled1 = KnowledgeBase("Robot1", rooms1, [[], []],
                            {o: [v * scale1 for v in row] for o, row in t1.items()})
    scaled2 = KnowledgeBase("Robot2", rooms2, [[], []],
                            {o: [v * scale2 for v in row] for o, row in t2.items()})
    subtasks = [Subtask("find", o) for o in objects]
    base = [a.robot_id for a in allocate(subtasks, [kb1, kb2])]
    scaled = [a.robot_id for a in allocate(subtasks, [scaled1, scaled2])]
    assert base == scaled


# ------------------------------------------------------------------ random

def test_allocate_random_single_robot():
    assignments = allocate_random([Subtask("find", "apple")] * 5, ["OnlyBot"], seed=0)
    assert all(a.robot_id == "OnlyBot" for a in assignments)
    assert all(a.justification is None for a in assignments)


def test_allocate_random_is_roughly_uniform():
    subtasks = [Subtask("find", "apple")] * 10_000
    assignments = allocate_random(subtasks, ["R1", "R2"], seed=5)
    share = sum(a.robot_id == "R1" for a in assignments) / len(assignments)
    assert 0.48 <= share <= 0.52


def test_allocate_random_deterministic_under_seed():
    subtasks = [Subtask("find", "apple")] * 100
    a = [x.robot_id for x in allocate_random(subtasks, ["R1", "R2"], seed=3)]
    b = [x.robot_id for x in allocate_random(subtasks, ["R1", "R2"], seed=3)]
    assert a == b


# ------------------------------------------------------------- commonsense

@pytest.fixture
def room_to_robot():
    env = load_environment("paper_home")
    floor_robot = {"1F": "Robot1", "2F": "Robot2"}
    return {r.name: floor_robot[r.floor] for r in env.rooms}


def test_commonsense_banana_misallocated(room_to_robot):
    [assignment] = allocate_commonsense([Subtask("find", "banana")],
                                        COMMONSENSE_TYPICAL_ROOM, room_to_robot)
    assert assignment.robot_id == "Robot1"  # banana actually lives on 2F


def test_commonsense_apple_correct(room_to_robot):
    [assignment] = allocate_commonsense([Subtask("find", "apple")],
                                        COMMONSENSE_TYPICAL_ROOM, room_to_robot)
    assert assignment.robot_id == "Robot1"


def test_commonsense_empty_subtasks(room_to_robot):
    assert allocate_commonsense([], COMMONSENSE_TYPICAL_ROOM, room_to_robot) == []


def test_commonsense_missing_object_raises(room_to_robot):
    with pytest.raises(UnallocatableError):
        allocate_commonsense([Subtask("find", "hoverboard")],
                             COMMONSENSE_TYPICAL_ROOM, room_to_robot)


def test_commonsense_table_covers_all_24_objects():
    assert set(COMMONSENSE_TYPICAL_ROOM) == set(VOCAB_24)


# -------------------------------------------------------- replay and remote

def test_replay_backend_round_trip(tmp_path):
    backend = ReplayBackend(tmp_path)
    backend.store("prompt text", "canned answer")
    assert backend.complete("prompt text") == "canned answer"
    with pytest.raises(ReplayMissError):
        backend.complete("unseen prompt")


def test_replay_allocation_parses_to_rule_based_assignments(tmp_path, kb_robot1, kb_robot2):
    subtasks = [Subtask("find", "apple"), Subtask("find", "banana"), Subtask("find", "towel")]
    kbs = [kb_robot1, kb_robot2]
    rule_assignments = allocate(subtasks, kbs)

    backend = ReplayBackend(tmp_path)
    prompt = render_allocation_prompt(subtasks, kbs)
    response = "\n".join(
        f"SubTask {i}: {a.subtask.describe()} -> {a.robot_id}"
        for i, a in enumerate(rule_assignments, start=1)
    )
    backend.store(prompt, response)

    replayed = allocate(subtasks, kbs, backend=backend)
    assert [a.robot_id for a in replayed] == [a.robot_id for a in rule_assignments]


def test_malformed_response_falls_back_per_subtask(tmp_path, kb_robot1, kb_robot2):
    subtasks = [Subtask("find", "apple"), Subtask("find", "banana")]
    kbs = [kb_robot1, kb_robot2]
    backend = ReplayBackend(tmp_path)
    prompt = render_allocation_prompt(subtasks, kbs)
    backend.store(prompt, "SubTask 1: Find an apple. -> Robot2\ngarbled line without arrow")

    assignments = allocate(subtasks, kbs, backend=backend)
    assert assignments[0].robot_id == "Robot2"  # parsed as given, even if unwise
    assert assignments[1].robot_id == "Robot2"  # fallback: rule-based choice for banana


def test_replay_miss_propagates_during_allocation(tmp_path, kb_robot1, kb_robot2):
    # A missing canned response is a transport error, not a parse failure,
    # so it must surface instead of silently falling back.
    backend = ReplayBackend(tmp_path)
    with pytest.raises(ReplayMissError):
        allocate([Subtask("find", "apple")], [kb_robot1, kb_robot2], backend=backend)


def test_subtask_describe_grammar():
    assert Subtask("find", "apple").describe() == "Find an apple."
    assert Subtask("bring", "cup").describe() == "Bring a cup."
    assert Subtask("bring", "cup", "kitchen").describe() == "Bring a cup to the kitchen."


def test_parse_allocation_response_grammar():
    parsed = parse_allocation_response(
        "SubTask 1: Bring a cup. -> Robot2\n"
        "noise\n"
        "subtask 2: Find an apple. -> Robot1\n"
    )
    assert parsed == {1: "Robot2", 2: "Robot1"}


class _FakeResponse(io.BytesIO):
    def __enter__(self):
        return self

    def __exit__(self, *args):
        return False


def test_remote_backend_request_and_parse(monkeypatch):
    captured = {}

    def fake_urlopen(request, timeout=None):
        captured["url"] = request.full_url
        captured["timeout"] = timeout
        captured["headers"] = dict(request.header_items())
        captured["body"] = json.loads(request.data.decode("utf-8"))
        return _FakeResponse(json.dumps(
            {"choices": [{"message": {"content": "SubTask 1: Find an apple. -> Robot1"}}]}
        ).encode("utf-8"))

    monkeypatch.setattr("urllib.request.urlopen", fake_urlopen)
    monkeypatch.setenv("HOMEPLAN_LLM_KEY", "secret-key")
    backend = RemoteChatBackend("https://example.test/v1/chat", model="gpt-4", timeout=11.0)
    out = backend.complete("hello prompt")

    assert out == "SubTask 1: Find an apple. -> Robot1"
    assert captured["url"] == "https://example.test/v1/chat"
    assert captured["timeout"] == 11.0
    assert captured["body"] == {"model": "gpt-4",
                                "messages": [{"role": "system", "content": "hello prompt"}]}
    assert captured["headers"].get("Authorization") == "Bearer secret-key"


def test_remote_backend_retries_then_succeeds(monkeypatch):
    calls = {"n": 0}

    def flaky_urlopen(request, timeout=None):
        calls["n"] += 1
        if calls["n"] == 1:
            raise urllib.error.URLError("connection refused")
        return _FakeResponse(json.dumps(
            {"choices": [{"message": {"content": "ok"}}]}).encode("utf-8"))

    monkeypatch.setattr("urllib.request.urlopen", flaky_urlopen)
    backend = RemoteChatBackend("https://example.test", api_key="k", retries=2, retry_wait=0.0)
    assert backend.complete("p") == "ok"
    assert calls["n"] == 2


def test_remote_backend_exhausted_retries_raise(monkeypatch):
    def dead_urlopen(request, timeout=None):
        raise urllib.error.URLError("down")

    monkeypatch.setattr("urllib.request.urlopen", dead_urlopen)
    backend = RemoteChatBackend("https://example.test", api_key="k", retries=1, retry_wait=0.0)
    with pytest.raises(BackendError):
        backend.complete("p")


def test_remote_backend_requires_api_key(monkeypatch):
    monkeypatch.delenv("HOMEPLAN_LLM_KEY", raising=False)
    backend = RemoteChatBackend("https://example.test")
    from homeplan.errors import ConfigurationError
    with pytest.raises(ConfigurationError):
        backend.complete("p")
