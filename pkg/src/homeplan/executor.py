"""Closed-loop execution of assigned subtasks as a skill state machine.

A fetch subtask runs navigate -> detect -> pick -> navigate -> place against
the world, consuming succeeded/failed outcomes.  Failed skills retry in
place; exhausted detection advances to the next room in descending presence
order.  Batches interleave robots one skill per turn so per-robot traces are
independent of scheduling when their state does not overlap.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import PlanningError, UnknownRoomError
from .knowledge import KnowledgeBase
from .planner import Assignment
from .world import GATHER, SkillOutcome, World

SUBTASK_SUCCEEDED = "subtask_succeeded"
SUBTASK_FAILED = "subtask_failed"


@dataclass
class ExecutionPolicy:
    """Retry and fallback budget for one subtask.

    ``max_room_fallbacks`` of None means "all remaining rooms";
    ``room_order`` of None derives the search order from the knowledge base.
    """

    max_retries_per_skill: int = 2
    max_room_fallbacks: int | None = None
    room_order: list[str] | None = None

    def __post_init__(self):
        if self.max_retries_per_skill < 0:
            raise ValueError("max_retries_per_skill must be >= 0")
        if self.max_room_fallbacks is not None and self.max_room_fallbacks < 0:
            raise ValueError("max_room_fallbacks must be >= 0")


@dataclass(frozen=True)
class TraceStep:
    skill: str
    argument: str
    outcome: SkillOutcome


@dataclass
class ExecutionTrace:
    robot_id: str
    target_object: str
    steps: list[TraceStep] = field(default_factory=list)
    result: str = SUBTASK_FAILED
    rooms_visited: list[str] = field(default_factory=list)

    def skill_sequence(self) -> list[tuple[str, str]]:
        return [(s.skill, s.argument) for s in self.steps]


def search_order(kb: KnowledgeBase, target: str) -> list[str]:
    """Rooms in descending presence probability for the target object."""
    row = kb.row(target)
    order = np.argsort(-row, kind="stable")
    return [kb.room_names[i] for i in order]


def _resolve_room_order(assignment: Assignment, kb: KnowledgeBase | None,
                        policy: ExecutionPolicy) -> list[str]:
    if policy.room_order is not None:
        return list(policy.room_order)
    target = assignment.subtask.target_object
    if kb is None or target not in kb.presence_table:
        raise PlanningError(
            f"object {assignment.subtask.target_object!r} is not in the knowledge base "
            "and no explicit room_order was given")
    return search_order(kb, target)


def _subtask_machine(target: str, room_order: list[str], destination: str,
                     retries: int, fallbacks: int):
    """Generator yielding (skill, argument), receiving SkillOutcome via send().

    Returns (result, rooms_visited) when exhausted.  Keeping the control flow
    here lets tests replay scripted outcome sequences without a world.
    """
    rooms_visited: list[str] = []
    attempts = retries + 1
    for room in room_order[:fallbacks + 1]:
        reached = False
        for _ in range(attempts):
            outcome = yield ("navigation", room)
            if outcome.succeeded:
                reached = True
                break
        if not reached:
            continue
        rooms_visited.append(room)

        detected = False
        for _ in range(attempts):
            outcome = yield ("object_detection", target)
            if outcome.succeeded:
                detected = True
                break
        if not detected:
            continue

        picked = False
        for _ in range(attempts):
            outcome = yield ("pick", target)
            if outcome.succeeded:
                picked = True
                break
        if not picked:
            return (SUBTASK_FAILED, rooms_visited)

        delivered = False
        for _ in range(attempts):
            outcome = yield ("navigation", destination)
            if outcome.succeeded:
                delivered = True
                break
        if not delivered:
            return (SUBTASK_FAILED, rooms_visited)
        rooms_visited.append(destination)

        for _ in range(attempts):
            outcome = yield ("place", destination)
            if outcome.succeeded:
                return (SUBTASK_SUCCEEDED, rooms_visited)
        return (SUBTASK_FAILED, rooms_visited)
    return (SUBTASK_FAILED, rooms_visited)


def drive_machine(machine, step_fn, trace: ExecutionTrace) -> ExecutionTrace:
    """Run a subtask machine against a ``step_fn(skill, argument) -> SkillOutcome``."""
    try:
        skill, argument = next(machine)
        while True:
            outcome = step_fn(skill, argument)
            trace.steps.append(TraceStep(skill, argument, outcome))
            skill, argument = machine.send(outcome)
    except StopIteration as stop:
        result, rooms = stop.value
        trace.result = result
        trace.rooms_visited = rooms
    return trace


def _setup(world: World, assignment: Assignment, kb: KnowledgeBase | None,
           policy: ExecutionPolicy):
    robot = world.robot(assignment.robot_id)
    destination = assignment.subtask.destination or GATHER
    if not world.known_location(destination):
        raise UnknownRoomError(f"unknown destination {destination!r}")
    room_order = _resolve_room_order(assignment, kb, policy)
    for room in room_order:
        if not world.known_location(room):
            raise UnknownRoomError(f"unknown room {room!r} in search order")
    fallbacks = policy.max_room_fallbacks
    if fallbacks is None:
        fallbacks = len(room_order) - 1
    machine = _subtask_machine(assignment.subtask.target_object, room_order,
                               destination, policy.max_retries_per_skill, fallbacks)
    trace = ExecutionTrace(robot_id=robot.robot_id, target_object=assignment.subtask.target_object)
    return machine, trace


def run_subtask(world: World, robot_id: str, assignment: Assignment,
                kb: KnowledgeBase | None = None,
                policy: ExecutionPolicy | None = None,
                seed: int | None = None) -> ExecutionTrace:
    """Execute one assignment to completion on its robot."""
    if robot_id != assignment.robot_id:
        raise PlanningError(f"assignment is for {assignment.robot_id!r}, not {robot_id!r}")
    policy = policy or ExecutionPolicy()
    if seed is not None:
        world.reseed(seed)
    machine, trace = _setup(world, assignment, kb, policy)
    return drive_machine(machine, lambda s, a: world.step_skill(robot_id, s, a), trace)


def run_assignments(world: World, assignments: list[Assignment],
                    kbs: list[KnowledgeBase],
                    policy: ExecutionPolicy | None = None,
                    seed: int | None = None) -> list[ExecutionTrace]:
    """Round-robin execution: one skill per robot per turn.

    A robot's assignments run back-to-back.  Setup errors for individual
    assignments are deferred until every other assignment has finished, then
    the first one is raised with the completed traces attached.
    """
    policy = policy or ExecutionPolicy()
    if seed is not None:
        world.reseed(seed)
    kb_by_robot = {kb.robot_id: kb for kb in kbs}

    queues: dict[str, list[int]] = {}
    robot_order: list[str] = []
    for idx, assignment in enumerate(assignments):
        rid = assignment.robot_id
        if rid not in queues:
            queues[rid] = []
            robot_order.append(rid)
        queues[rid].append(idx)

    traces: dict[int, ExecutionTrace] = {}
    errors: list[Exception] = []
    active: dict[str, tuple] = {}

    def start_next(rid: str):
        while queues[rid]:
            idx = queues[rid].pop(0)
            assignment = assignments[idx]
            try:
                machine, trace = _setup(world, assignment, kb_by_robot.get(rid), policy)
            except Exception as exc:  # deferred, see docstring
                errors.append(exc)
                continue
            try:
                skill_arg = next(machine)
            except StopIteration as stop:
                trace.result, trace.rooms_visited = stop.value
                traces[idx] = trace
                continue
            active[rid] = (idx, machine, trace, skill_arg)
            return

    for rid in robot_order:
        start_next(rid)

    while active:
        for rid in list(robot_order):
            if rid not in active:
                continue
            idx, machine, trace, (skill, argument) = active[rid]
            outcome = world.step_skill(rid, skill, argument)
            trace.steps.append(TraceStep(skill, argument, outcome))
            try:
                skill_arg = machine.send(outcome)
                active[rid] = (idx, machine, trace, skill_arg)
            except StopIteration as stop:
                trace.result, trace.rooms_visited = stop.value
                traces[idx] = trace
                del active[rid]
                start_next(rid)

    ordered = [traces[i] for i in sorted(traces)]
    if errors:
        first = errors[0]
        first.completed_traces = ordered  # type: ignore[attr-defined]
        raise first
    return ordered


def traces_to_jsonl(traces: list[ExecutionTrace]) -> str:
    """One step per line: robot_id, index, skill, argument, status, detail.

    Step indices are 1-based and continue across a robot's consecutive
    subtasks, matching how execution logs are usually read.
    """
    counters: dict[str, int] = {}
    lines = []
    for trace in traces:
        for step in trace.steps:
            counters[trace.robot_id] = counters.get(trace.robot_id, 0) + 1
            lines.append(json.dumps({
                "robot_id": trace.robot_id,
                "index": counters[trace.robot_id],
                "skill": step.skill,
                "argument": step.argument,
                "status": step.outcome.status,
                "detail": step.outcome.detail,
            }))
    return "\n".join(lines)
