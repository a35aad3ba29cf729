"""Closed-form optimal costs, the clear-and-stack plan synthesizer, and a
brute-force shortest-plan oracle.

The analytic cost applies to the generated problem classes only: chain goals
with at most one target per tower, single-block retrieval, and the
interleaved two-targets-per-tower pattern.  Anything else raises
:class:`UnsupportedGoalShape`; the oracle accepts any problem.
"""

from __future__ import annotations

import time
from collections import deque
from dataclasses import dataclass
from typing import Optional

from .core import (
    Action,
    BlocksError,
    BlockId,
    Chain,
    PickUp,
    PutDown,
    Retrieve,
    Stack,
    Unstack,
    WorldState,
    apply,
    depth,
    satisfies,
)
from .pddl import PlanDoc, ProblemDoc


class UnsupportedGoalShape(BlocksError):
    pass


class LimitExceeded(BlocksError):
    pass


class Unsolvable(BlocksError):
    pass


@dataclass(frozen=True)
class CostBreakdown:
    clearing: int
    construction: int
    total: int

    def __post_init__(self):
        assert self.total == self.clearing + self.construction
        assert self.clearing >= 0 and self.construction >= 0 and self.clearing % 2 == 0


@dataclass(frozen=True)
class SearchLimits:
    max_states: int = 2_000_000
    max_seconds: float = 60.0

    def __post_init__(self):
        if self.max_states <= 0 or self.max_seconds <= 0:
            raise ValueError("search limits must be positive")


@dataclass(frozen=True)
class GoalShape:
    """Classification of a problem's goal against the generated classes."""

    kind: str  # "chain", "retrieve" or "interleaved"
    deep: tuple[BlockId, ...] = ()  # interleaved: deeper target per tower, goal order
    shallow: tuple[BlockId, ...] = ()


def classify(problem: ProblemDoc, state: Optional[WorldState] = None) -> GoalShape:
    state = state or problem.initial_state()
    goal = problem.goal
    if isinstance(goal, Retrieve):
        return GoalShape("retrieve")
    if not isinstance(goal, Chain):
        raise UnsupportedGoalShape("goal is not a single chain or a retrieval")
    if state.held is not None:
        raise UnsupportedGoalShape("closed-form costs assume an empty hand")
    targets = goal.targets
    for b in targets:
        if b not in state.positions:
            raise UnsupportedGoalShape(f"target b{b} is not in any tower")
    tower_ids = [state.positions[b][0] for b in targets]
    if len(set(tower_ids)) == len(tower_ids):
        return GoalShape("chain")

    # interleaved: first half are the deeper targets in tower order, second
    # half the shallower ones in the same tower order
    k = len(targets)
    if k % 2 == 0:
        deep, shallow = targets[: k // 2], targets[k // 2:]
        deep_towers = [state.positions[b][0] for b in deep]
        if (
            len(set(deep_towers)) == len(deep)
            and deep_towers == [state.positions[b][0] for b in shallow]
            and all(state.positions[s][1] > state.positions[d][1] for d, s in zip(deep, shallow))
        ):
            return GoalShape("interleaved", tuple(deep), tuple(shallow))
    raise UnsupportedGoalShape("targets share towers outside the interleaved pattern")


def optimal_cost(problem: ProblemDoc, state: Optional[WorldState] = None) -> CostBreakdown:
    """Closed-form optimum; pass ``state`` when the initial state is already at hand."""
    state = problem.initial_state() if state is None else state
    shape = classify(problem, state)
    goal = problem.goal
    if shape.kind == "retrieve":
        if state.held == goal.target:
            return CostBreakdown(0, 0, 0)
        if state.held is not None:
            raise UnsupportedGoalShape("closed-form costs assume an empty hand")
        return CostBreakdown(2 * depth(state, goal.target), 1, 2 * depth(state, goal.target) + 1)
    if shape.kind == "chain":
        clearing = sum(2 * depth(state, b) for b in goal.targets)
        return CostBreakdown(clearing, 2 * (len(goal.targets) - 1), clearing + 2 * (len(goal.targets) - 1))
    if satisfies(state, goal):
        return CostBreakdown(0, 0, 0)
    clearing = sum(2 * depth(state, b) for b in shape.deep)
    return CostBreakdown(clearing, 2 * len(shape.deep), clearing + 2 * len(shape.deep))


class _Builder:
    """Accumulates actions while keeping the simulated state current."""

    def __init__(self, state: WorldState):
        self.state = state
        self.steps: list[Action] = []

    def do(self, action: Action) -> None:
        self.state = apply(self.state, action)
        self.steps.append(action)

    def grasp(self, b: BlockId) -> None:
        under = self.state.below(b)
        self.do(PickUp(b) if under is None else Unstack(b, under))

    def clear(self, t: BlockId) -> Optional[BlockId]:
        """Park every block above ``t`` on the table; return the block under ``t``."""
        tower = self.state.tower_of(t)
        h = tower.index(t)
        for k in range(len(tower) - 1, h, -1):
            self.do(Unstack(tower[k], tower[k - 1]))
            self.do(PutDown(tower[k]))
        return tower[h - 1] if h else None

    def plan(self) -> PlanDoc:
        return PlanDoc(tuple(self.steps))


def synthesize_optimal_plan(problem: ProblemDoc) -> PlanDoc:
    """Clear each target bottom-up, parking obstacles on the table, then stack it.

    For interleaved goals this defers to :func:`synthesize_interleaved_plan`.
    """
    state = problem.initial_state()
    shape = classify(problem, state)
    if satisfies(state, problem.goal):
        return PlanDoc(())
    if shape.kind == "interleaved":
        return synthesize_interleaved_plan(problem)

    b = _Builder(state)
    goal = problem.goal
    if shape.kind == "retrieve":
        t = goal.target
        if state.held is not None:
            raise UnsupportedGoalShape("closed-form costs assume an empty hand")
        under = b.clear(t)
        b.do(PickUp(t) if under is None else Unstack(t, under))
        return b.plan()

    previous = None
    for t in goal.targets:
        under = b.clear(t)
        if previous is not None:
            b.do(PickUp(t) if under is None else Unstack(t, under))
            b.do(Stack(t, previous))
        previous = t
    return b.plan()


def synthesize_interleaved_plan(problem: ProblemDoc) -> PlanDoc:
    """Valid plan for the two-targets-per-tower pattern.

    Towers are cleared in goal order down to their deeper target.  An
    uncovered target that is next in the goal tower goes straight onto it;
    any other target is parked on the table and stacked once its turn comes.
    """
    state = problem.initial_state()
    shape = classify(problem, state)
    if shape.kind != "interleaved":
        raise UnsupportedGoalShape("goal does not follow the interleaved pattern")
    if satisfies(state, problem.goal):
        return PlanDoc(())

    chain = problem.goal.targets
    b = _Builder(state)
    built = 1  # chain[:built] already stands in place; chain[0] never moves
    parked: set[BlockId] = set()

    def settle_parked() -> None:
        nonlocal built
        while built < len(chain) and chain[built] in parked and b.state.is_clear(chain[built]):
            parked.discard(chain[built])
            b.grasp(chain[built])
            b.do(Stack(chain[built], chain[built - 1]))
            built += 1

    for i, deep in enumerate(shape.deep):
        while depth(b.state, deep):
            top = b.state.tower_of(deep)[-1]
            under = b.state.below(top)
            b.do(Unstack(top, under))
            wanted = chain[built] if built < len(chain) else None
            if top == wanted and under != chain[built - 1] and b.state.is_clear(chain[built - 1]):
                b.do(Stack(top, chain[built - 1]))
                built += 1
            else:
                b.do(PutDown(top))
                if top in chain:
                    parked.add(top)
        if i > 0:
            b.grasp(deep)
            b.do(Stack(deep, chain[built - 1]))
            built += 1
        settle_parked()
    settle_parked()
    if built != len(chain):
        raise UnsupportedGoalShape("interleaved construction did not complete")
    return b.plan()


def interleaved_bounds(problem: ProblemDoc) -> tuple[int, int]:
    """(published closed form, table-detour upper bound) for an interleaved goal."""
    state = problem.initial_state()
    shape = classify(problem, state)
    if shape.kind != "interleaved":
        raise UnsupportedGoalShape("goal does not follow the interleaved pattern")
    n = len(shape.deep)
    clearing = sum(2 * depth(state, d) for d in shape.deep)
    return clearing + 2 * n, clearing + 4 * n - 2


# -- brute-force oracle -------------------------------------------------------

def _successors(towers: tuple, held):
    """Successors in canonical action order; towers are kept sorted."""
    out = []
    if held is None:
        for i, t in enumerate(towers):
            top = t[-1]
            rest = towers[:i] + towers[i + 1:]
            if len(t) == 1:
                out.append(((0, (top,)), rest, top))
            else:
                out.append(((3, (top, t[-2])), tuple(sorted(rest + (t[:-1],))), top))
    else:
        out.append(((1, (held,)), tuple(sorted(towers + ((held,),))), None))
        for i, t in enumerate(towers):
            grown = tuple(sorted(towers[:i] + (t + (held,),) + towers[i + 1:]))
            out.append(((2, (held, t[-1])), grown, None))
    out.sort(key=lambda s: s[0])
    return out


_MAKE = {0: PickUp, 1: PutDown, 2: Stack, 3: Unstack}


def _goal_test(goal):
    if isinstance(goal, Retrieve):
        target = goal.target
        return lambda towers, held: held == target
    pairs = [(p.above, p.below) for p in goal.predicates()]

    def test(towers, held):
        below = {}
        for t in towers:
            for h in range(1, len(t)):
                below[t[h]] = t[h - 1]
        return all(below.get(a) == b for a, b in pairs)

    return test


def uniform_cost_oracle(problem: ProblemDoc, limits: SearchLimits = SearchLimits()) -> PlanDoc:
    """Breadth-first search over states (unit costs); returns a shortest plan.

    States are deduplicated on sorted tower tuples plus the held block.
    """
    state = problem.initial_state()
    is_goal = _goal_test(problem.goal)
    start = (tuple(sorted(state.towers)), state.held)
    if is_goal(*start):
        return PlanDoc(())
    parents: dict = {start: None}
    frontier = deque([start])
    deadline = time.monotonic() + limits.max_seconds
    expanded = 0
    while frontier:
        node = frontier.popleft()
        expanded += 1
        if expanded % 1024 == 0 and time.monotonic() > deadline:
            raise LimitExceeded(f"time budget of {limits.max_seconds}s exhausted")
        for move, towers, held in _successors(*node):
            child = (towers, held)
            if child in parents:
                continue
            parents[child] = (node, move)
            if len(parents) > limits.max_states:
                raise LimitExceeded(f"more than {limits.max_states} states generated")
            if is_goal(towers, held):
                steps = []
                while parents[child] is not None:
                    child, (kind, args) = parents[child]
                    steps.append(_MAKE[kind](*args))
                return PlanDoc(tuple(reversed(steps)))
            frontier.append(child)
    raise Unsolvable("state space exhausted without reaching the goal")
