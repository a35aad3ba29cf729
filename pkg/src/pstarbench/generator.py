"""Seeded construction of path-star blocksworld curricula.

Every instance is a forest of towers on the table with the goal blocks
placed so the closed-form optimal cost applies.  Seeds are derived with a
SplitMix64 mix of (master seed, curriculum name, step index, attempt), so a
(schedule, seed) pair always reproduces the same files on any platform.
"""

from __future__ import annotations

import json
import random
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable, Literal, Optional

from .core import BlocksError, Chain, Retrieve, WorldState, predicates_from_state
from .pddl import ProblemDoc, emit_problem
from .planner import CostBreakdown, optimal_cost

GoalMode = Literal["chain", "retrieve", "interleaved"]

MASK64 = (1 << 64) - 1
DEFAULT_MAX_ATTEMPTS = 10_000


class InfeasibleParams(BlocksError):
    pass


class RejectionExhausted(BlocksError):
    pass


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def _fnv1a(text: str) -> int:
    h = 0xCBF29CE484222325
    for byte in text.encode("utf-8"):
        h = ((h ^ byte) * 0x100000001B3) & MASK64
    return h


def derive_seed(master: int, name: str, index: int, attempt: int = 0) -> int:
    h = splitmix64(master & MASK64)
    for part in (_fnv1a(name), index, attempt):
        h = splitmix64(h ^ (part & MASK64))
    return h


@dataclass(frozen=True)
class CurriculumParams:
    width: int
    h_min: int
    h_max: int
    targets: int
    goal_mode: GoalMode = "chain"

    def __post_init__(self):
        if self.width < 1:
            raise InfeasibleParams("width must be at least 1")
        if not 1 <= self.h_min <= self.h_max:
            raise InfeasibleParams("need 1 <= h_min <= h_max")
        if self.goal_mode == "chain" and not 1 <= self.targets <= self.width:
            raise InfeasibleParams("chain mode needs 1 <= targets <= width")
        if self.goal_mode == "retrieve" and self.targets != 1:
            raise InfeasibleParams("retrieve mode has exactly one target")
        if self.goal_mode == "interleaved" and (self.targets != 2 * self.width or self.h_min < 3):
            raise InfeasibleParams("interleaved mode needs targets = 2 * width and h_min >= 3")
        if self.goal_mode not in ("chain", "retrieve", "interleaved"):
            raise InfeasibleParams(f"unknown goal mode {self.goal_mode!r}")

    @property
    def tag(self) -> str:
        return f"h{self.h_min:02d}-{self.h_max:02d}_w{self.width:03d}_s{self.targets:02d}"


@dataclass(frozen=True)
class CurriculumSchedule:
    name: str
    steps: tuple[CurriculumParams, ...]

    def __post_init__(self):
        object.__setattr__(self, "steps", tuple(self.steps))
        if not self.steps:
            raise InfeasibleParams("a schedule needs at least one step")


@dataclass(frozen=True)
class Instance:
    """A generated problem plus the metadata written to the manifest."""

    doc: ProblemDoc
    params: CurriculumParams
    seed: int
    cost: CostBreakdown
    state: WorldState
    attempts: int = 1
    index: int = 0

    @property
    def c_opt(self) -> int:
        return self.cost.total


# (W, S, h_min, h_max) rows of the published grand-challenge table
_GRAND_CHALLENGE_ROWS = [
    (6, 2, 5, 10), (9, 3, 6, 11), (11, 3, 8, 13), (14, 4, 9, 14), (17, 4, 11, 16),
    (20, 5, 12, 17), (23, 6, 14, 19), (26, 6, 15, 20), (29, 7, 17, 22), (32, 7, 19, 24),
    (35, 8, 20, 25), (37, 9, 22, 27), (40, 9, 23, 28), (43, 10, 25, 30), (46, 10, 26, 31),
    (49, 11, 28, 33), (52, 12, 29, 34), (55, 12, 31, 36), (58, 13, 32, 37), (61, 13, 34, 39),
    (63, 14, 36, 41), (66, 15, 37, 42), (69, 15, 39, 44), (72, 16, 40, 45), (75, 16, 42, 47),
    (78, 17, 43, 48), (81, 18, 45, 50), (84, 18, 46, 51), (87, 19, 48, 53), (90, 20, 50, 55),
    (92, 20, 51, 56), (95, 21, 53, 58), (98, 21, 54, 59),
]

PRESETS: dict[str, CurriculumSchedule] = {
    "high_towers": CurriculumSchedule(
        "high_towers",
        tuple(CurriculumParams(12, h, h + 5, 1, "retrieve") for h in range(8, 989, 20)),
    ),
    "harvest": CurriculumSchedule(
        "harvest",
        tuple(CurriculumParams(s, 5, 8, s, "chain") for s in range(4, 221, 4)),
    ),
    "interleaved_harvest": CurriculumSchedule(
        "interleaved_harvest",
        tuple(CurriculumParams(w, 5, 8, 2 * w, "interleaved") for w in range(2, 101, 2)),
    ),
    "grand_challenge": CurriculumSchedule(
        "grand_challenge",
        tuple(CurriculumParams(w, lo, hi, s, "chain") for w, s, lo, hi in _GRAND_CHALLENGE_ROWS),
    ),
}


def preset(name: str, max_h_min: Optional[int] = None) -> CurriculumSchedule:
    """Look up a preset; ``max_h_min`` truncates steps whose h_min exceeds it."""
    schedule = PRESETS[name]
    if max_h_min is None:
        return schedule
    return CurriculumSchedule(name, tuple(p for p in schedule.steps if p.h_min <= max_h_min))


def complexity(params: CurriculumParams, curriculum: str) -> int:
    """The x-axis each curriculum is plotted against."""
    if curriculum == "high_towers" or params.goal_mode == "retrieve":
        return params.h_min
    if curriculum == "grand_challenge":
        return params.h_max * params.width * params.targets
    return params.width


def generate_instance(params: CurriculumParams, seed: int, name_prefix: str = "pstar") -> Instance:
    rng = random.Random(seed)
    heights = [rng.randint(params.h_min, params.h_max) for _ in range(params.width)]
    n = sum(heights)
    names = list(range(1, n + 1))
    rng.shuffle(names)
    towers, pos = [], 0
    for h in heights:
        towers.append(tuple(names[pos:pos + h]))
        pos += h

    if params.goal_mode == "chain":
        base_tower = rng.randrange(params.width)
        others = [i for i in range(params.width) if i != base_tower]
        picked = rng.sample(others, params.targets - 1)
        targets = [towers[base_tower][0]] + [towers[i][rng.randrange(heights[i])] for i in picked]
        goal = Chain(tuple(targets))
    elif params.goal_mode == "retrieve":
        goal = Retrieve(rng.choice(names))
    else:
        deep, shallow = [], []
        for i, t in enumerate(towers):
            lo, hi = sorted(rng.sample(range(heights[i]), 2))
            deep.append(t[lo])
            shallow.append(t[hi])
        goal = Chain(tuple(deep + shallow))

    state = WorldState(tuple(towers))
    init = predicates_from_state(state)
    rng.shuffle(init)
    doc = ProblemDoc(f"{name_prefix}_{params.tag}", tuple(range(1, n + 1)), tuple(init), goal)
    return Instance(doc, params, seed, optimal_cost(doc, state), state)


def generate_curriculum(
    schedule: CurriculumSchedule,
    master_seed: int,
    max_attempts: int = DEFAULT_MAX_ATTEMPTS,
) -> list[Instance]:
    """Draw each step until its optimal cost is at least the previous accepted one."""
    accepted: list[Instance] = []
    floor = 0
    for index, params in enumerate(schedule.steps):
        for attempt in range(max_attempts):
            seed = derive_seed(master_seed, schedule.name, index, attempt)
            inst = generate_instance(params, seed, schedule.name)
            if inst.c_opt >= floor:
                break
        else:
            raise RejectionExhausted(
                f"{schedule.name} step {index}: no instance with C_opt >= {floor} in {max_attempts} draws"
            )
        inst = Instance(inst.doc, params, seed, inst.cost, inst.state, attempt + 1, index)
        accepted.append(inst)
        floor = inst.c_opt
    return accepted


def instance_filename(inst: Instance) -> str:
    return f"{inst.index:03d}_{inst.params.tag}.pddl"


def manifest_record(inst: Instance, curriculum: str, filename: str) -> dict:
    return {
        "index": inst.index,
        "curriculum": curriculum,
        "name": inst.doc.name,
        "file": filename,
        "params": asdict(inst.params),
        "seed": inst.seed,
        "attempts": inst.attempts,
        "c_opt": inst.c_opt,
        "goal_mode": inst.params.goal_mode,
        "complexity": complexity(inst.params, curriculum),
    }


def write_curriculum(instances: Iterable[Instance], curriculum: str, out_dir: Path) -> Path:
    """Write ``<out_dir>/<index>_<params>.pddl`` files and ``manifest.jsonl``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = out_dir / "manifest.jsonl"
    with manifest.open("w", encoding="utf-8", newline="\n") as fh:
        for inst in instances:
            filename = instance_filename(inst)
            (out_dir / filename).write_text(emit_problem(inst.doc), encoding="utf-8", newline="\n")
            fh.write(json.dumps(manifest_record(inst, curriculum, filename), sort_keys=True) + "\n")
    return manifest


def load_schedule(path: Path) -> CurriculumSchedule:
    """Read a custom schedule: ``{"name": ..., "steps": [{width, h_min, h_max, targets, goal_mode}, ...]}``."""
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    try:
        steps = tuple(CurriculumParams(**step) for step in data["steps"])
        return CurriculumSchedule(data.get("name", Path(path).stem), steps)
    except (KeyError, TypeError) as exc:
        raise InfeasibleParams(f"bad schedule file {path}: {exc}") from exc
