"""Command-line interface: learn, extract, prompt, decompose, allocate, run, suite."""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import experiment, knowledge, learner, planner, spatial, world
from .errors import ConfigurationError, HomeplanError
from .executor import ExecutionPolicy, run_assignments, traces_to_jsonl

SEED_ENV_VAR = "HOMEPLAN_SEED"


def _default_seed() -> int:
    return int(os.environ.get(SEED_ENV_VAR, "0"))


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text + ("" if text.endswith("\n") else "\n"))
    else:
        print(text)


def _add_common(parser: argparse.ArgumentParser, env: bool = True) -> None:
    if env:
        parser.add_argument("--env", default="paper_home",
                            help="builtin environment name or JSON path")
    parser.add_argument("--seed", type=int, default=None,
                        help=f"random seed (default: ${SEED_ENV_VAR} or 0)")
    parser.add_argument("--out", default=None, help="output path (default: stdout)")


def _seed_of(args) -> int:
    return _default_seed() if args.seed is None else args.seed


def _backend_of(args) -> planner.PlannerBackend:
    name = getattr(args, "backend", "rule")
    if name == "rule":
        return planner.RuleBasedBackend()
    if name == "replay":
        if not args.replay_dir:
            raise ConfigurationError("--backend replay requires --replay-dir")
        return planner.ReplayBackend(args.replay_dir)
    if name == "remote":
        if not args.endpoint:
            raise ConfigurationError("--backend remote requires --endpoint")
        return planner.RemoteChatBackend(args.endpoint, model=args.model)
    raise ConfigurationError(f"unknown backend {name!r}")


def _add_backend(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--backend", choices=("rule", "remote", "replay"), default="rule")
    parser.add_argument("--replay-dir", default=None, help="canned response directory (replay backend)")
    parser.add_argument("--endpoint", default=None, help="chat completion URL (remote backend)")
    parser.add_argument("--model", default="gpt-4", help="remote model name")


def _load_sessions(path: str) -> list[spatial.Session]:
    data = json.loads(Path(path).read_text())
    return [
        spatial.Session(
            position=np.asarray(item["position"], dtype=float),
            object_labels=list(item["object_labels"]),
            place_words=list(item["place_words"]),
            room_hint=item.get("room_hint"),
        )
        for item in data
    ]


def cmd_learn(args) -> int:
    seed = _seed_of(args)
    hp = spatial.Hyperparameters(num_particles=args.particles, lag_window=args.lag)
    if args.sessions:
        sessions = _load_sessions(args.sessions)
        regions = args.regions
    else:
        if not args.floor:
            raise ConfigurationError("learn needs --sessions or --floor")
        env = world.load_environment(args.env)
        rooms = env.rooms_on(args.floor)
        if not rooms:
            raise ConfigurationError(f"floor {args.floor!r} has no rooms")
        robot = world.RobotState(robot_id=args.robot, floor=args.floor, current_room=rooms[0].name)
        sessions = world.generate_floor_sessions(env, robot, np.random.default_rng(seed),
                                                 visits_per_room=args.visits)
        regions = args.regions or len(rooms)
    regions = regions or 5
    model = learner.learn_fixed_lag(sessions, hp, seed=seed,
                                    num_concepts=regions, num_regions=regions)
    _emit(json.dumps(spatial.model_to_dict(model), indent=2), args.out)
    return 0


def cmd_extract(args) -> int:
    model = spatial.load_model(args.model_path)
    env = world.load_environment(args.env)
    rooms = env.rooms_on(args.floor) if args.floor else env.rooms
    room_names = knowledge.match_room_names(model, rooms)
    kb = knowledge.extract_knowledge(model, room_names, vocab_threshold=args.threshold,
                                     robot_id=args.robot)
    _emit(json.dumps(knowledge.knowledge_to_dict(kb), indent=2), args.out)
    return 0


def cmd_prompt(args) -> int:
    kbs = [knowledge.load_knowledge(p) for p in args.kb]
    if args.kind == "place_vocab":
        component = knowledge.render_place_vocab(kbs[0])
    elif args.kind == "presence_table":
        component = knowledge.render_presence_table(kbs)
    elif args.kind == "skills":
        component = knowledge.skills_component()
    elif args.kind == "behaviors":
        component = knowledge.behaviors_component()
    elif args.kind == "allocation_rule":
        component = knowledge.allocation_rule_component()
    elif args.kind == "dialogue_example":
        component = knowledge.dialogue_example_component()
    elif args.kind == "decomposition_example":
        component = knowledge.decomposition_example_component()
    else:
        component = knowledge.objects_component(sorted({o for kb in kbs for o in kb.presence_table}))
    _emit(component.text, args.out)
    return 0


def cmd_decompose(args) -> int:
    env = world.load_environment(args.env)
    backend = _backend_of(args)
    instruction = planner.Instruction(args.text)
    subtasks = planner.decompose(instruction, sorted(env.placements), backend=backend)
    payload = [{"verb": s.verb, "target_object": s.target_object, "destination": s.destination}
               for s in subtasks]
    _emit(json.dumps(payload, indent=2), args.out)
    return 0


def cmd_allocate(args) -> int:
    env = world.load_environment(args.env)
    backend = _backend_of(args)
    kbs = [knowledge.load_knowledge(p) for p in args.kb]
    if args.text:
        instruction = planner.Instruction(args.text)
        subtasks = planner.decompose(instruction, sorted(env.placements), backend=backend)
    else:
        if not args.subtasks:
            raise ConfigurationError("allocate needs --text or --subtasks")
        data = json.loads(Path(args.subtasks).read_text())
        subtasks = [planner.Subtask(d["verb"], d["target_object"], d.get("destination"))
                    for d in data]
    assignments = planner.allocate(subtasks, kbs, backend=backend)
    payload = [
        {
            "verb": a.subtask.verb,
            "target_object": a.subtask.target_object,
            "destination": a.subtask.destination,
            "robot_id": a.robot_id,
            "justification": None if a.justification is None else list(a.justification),
        }
        for a in assignments
    ]
    _emit(json.dumps(payload, indent=2), args.out)
    return 0


def cmd_run(args) -> int:
    seed = _seed_of(args)
    env = world.load_environment(args.env)
    kbs = [knowledge.load_knowledge(p) for p in args.kb]
    data = json.loads(Path(args.assignments).read_text())
    assignments = [
        planner.Assignment(
            planner.Subtask(d["verb"], d["target_object"], d.get("destination")),
            d["robot_id"],
        )
        for d in data
    ]
    robots = []
    for kb in kbs:
        floors = {env.floor_of_room(r) for r in kb.room_names if env.has_room(r)}
        if len(floors) != 1:
            raise ConfigurationError(f"knowledge base {kb.robot_id!r} does not map to one floor")
        floor = floors.pop()
        start = env.rooms_on(floor)[0].name
        robots.append(world.RobotState(robot_id=kb.robot_id, floor=floor, current_room=start))
    sim = world.World(env, robots, seed=seed)
    traces = run_assignments(sim, assignments, kbs, policy=ExecutionPolicy(), seed=seed)
    _emit(traces_to_jsonl(traces), args.out)
    return 0


def cmd_suite(args) -> int:
    cfg = experiment.SuiteConfig(
        env=args.env,
        seed=_seed_of(args),
        strategies=tuple(args.strategies.split(",")),
        backend=args.backend,
        replay_dir=args.replay_dir,
        remote_endpoint=args.endpoint,
        remote_model=args.model,
        kb_paths=tuple(args.kb) if args.kb else None,
        visits_per_room=args.visits,
        out=args.out,
    )
    report = experiment.run_suite(cfg)
    print(report.text_table())
    if args.out:
        print(f"\nreport written to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="homeplan",
                                     description="Multi-robot household task allocation toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("learn", help="learn a spatial concept model from sessions")
    _add_common(p)
    p.add_argument("--floor", default=None, help="generate the observation protocol on this floor")
    p.add_argument("--sessions", default=None, help="JSON session file instead of generation")
    p.add_argument("--robot", default="Robot1")
    p.add_argument("--visits", type=int, default=30, help="visits per room")
    p.add_argument("--particles", type=int, default=30)
    p.add_argument("--lag", type=int, default=10)
    p.add_argument("--regions", type=int, default=None, help="concept/region count (default: room count)")
    p.set_defaults(func=cmd_learn)

    p = sub.add_parser("extract", help="turn a model into a knowledge base")
    _add_common(p)
    p.add_argument("--model-path", required=True, dest="model_path")
    p.add_argument("--floor", default=None, help="restrict room labels to this floor")
    p.add_argument("--robot", default="Robot1")
    p.add_argument("--threshold", type=float, default=0.05)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("prompt", help="render a prompt component from knowledge bases")
    _add_common(p, env=False)
    p.add_argument("--kb", nargs="+", required=True)
    p.add_argument("--kind", default="presence_table",
                   choices=knowledge.PROMPT_KINDS)
    p.set_defaults(func=cmd_prompt)

    p = sub.add_parser("decompose", help="split an instruction into subtasks")
    _add_common(p)
    _add_backend(p)
    p.add_argument("--text", required=True)
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("allocate", help="assign subtasks to robots by knowledge")
    _add_common(p)
    _add_backend(p)
    p.add_argument("--kb", nargs="+", required=True)
    p.add_argument("--text", default=None, help="instruction to decompose first")
    p.add_argument("--subtasks", default=None, help="JSON subtask file")
    p.set_defaults(func=cmd_allocate)

    p = sub.add_parser("run", help="execute assignments and emit a JSONL trace")
    _add_common(p)
    p.add_argument("--assignments", required=True, help="JSON assignment file")
    p.add_argument("--kb", nargs="+", required=True)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("suite", help="run the full allocation experiment")
    _add_common(p)
    _add_backend(p)
    p.add_argument("--strategies", default="proposed,random,commonsense")
    p.add_argument("--kb", nargs="*", default=None, help="pre-built knowledge bases")
    p.add_argument("--visits", type=int, default=30)
    p.set_defaults(func=cmd_suite)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except HomeplanError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
