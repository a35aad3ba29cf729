"""Executable semantics of the four-operator blocksworld.

Blocks are plain positive integers (``3`` is rendered ``b3`` in PDDL and
``n3`` in graph form).  A :class:`WorldState` stores towers bottom to top
plus an optional held block; predicates and actions are small frozen
dataclasses so they hash, compare and sort cheaply.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Optional, Sequence, Union

BlockId = int


class BlocksError(Exception):
    """Base class for every error raised by this package's domain code."""


class InconsistentState(BlocksError):
    pass


class MissingPredicate(InconsistentState):
    pass


class CycleError(InconsistentState):
    pass


class ConflictError(InconsistentState):
    pass


class BadHand(InconsistentState):
    pass


class UnknownBlock(BlocksError):
    def __init__(self, block: BlockId):
        super().__init__(f"unknown block b{block}")
        self.block = block


class BlockHeld(BlocksError):
    def __init__(self, block: BlockId):
        super().__init__(f"block b{block} is held")
        self.block = block


class PreconditionFailed(BlocksError):
    """Raised by :func:`apply`; ``missing`` is the first unmet precondition."""

    def __init__(self, action: "Action", missing: "Predicate"):
        super().__init__(f"{action}: precondition {missing} does not hold")
        self.action = action
        self.missing = missing


# -- predicates ---------------------------------------------------------------


@dataclass(frozen=True, order=True)
class On:
    above: BlockId
    below: BlockId

    def __post_init__(self):
        if self.above == self.below:
            raise ValueError("on requires two distinct blocks")

    def __str__(self) -> str:
        return f"(on b{self.above} b{self.below})"


@dataclass(frozen=True, order=True)
class OnTable:
    block: BlockId

    def __str__(self) -> str:
        return f"(ontable b{self.block})"


@dataclass(frozen=True, order=True)
class Clear:
    block: BlockId

    def __str__(self) -> str:
        return f"(clear b{self.block})"


@dataclass(frozen=True, order=True)
class HandEmpty:
    def __str__(self) -> str:
        return "(handempty)"


@dataclass(frozen=True, order=True)
class Holding:
    block: BlockId

    def __str__(self) -> str:
        return f"(holding b{self.block})"


Predicate = Union[On, OnTable, Clear, HandEmpty, Holding]


# -- actions ------------------------------------------------------------------


@dataclass(frozen=True)
class PickUp:
    block: BlockId

    name = "pick-up"

    @property
    def args(self) -> tuple[BlockId, ...]:
        return (self.block,)

    def __str__(self) -> str:
        return f"(pick-up b{self.block})"


@dataclass(frozen=True)
class PutDown:
    block: BlockId

    name = "put-down"

    @property
    def args(self) -> tuple[BlockId, ...]:
        return (self.block,)

    def __str__(self) -> str:
        return f"(put-down b{self.block})"


@dataclass(frozen=True)
class Stack:
    block: BlockId
    under: BlockId

    name = "stack"

    def __post_init__(self):
        if self.block == self.under:
            raise ValueError("stack requires two distinct blocks")

    @property
    def args(self) -> tuple[BlockId, ...]:
        return (self.block, self.under)

    def __str__(self) -> str:
        return f"(stack b{self.block} b{self.under})"


@dataclass(frozen=True)
class Unstack:
    block: BlockId
    under: BlockId

    name = "unstack"

    def __post_init__(self):
        if self.block == self.under:
            raise ValueError("unstack requires two distinct blocks")

    @property
    def args(self) -> tuple[BlockId, ...]:
        return (self.block, self.under)

    def __str__(self) -> str:
        return f"(unstack b{self.block} b{self.under})"


Action = Union[PickUp, PutDown, Stack, Unstack]

ACTION_TYPES = {cls.name: cls for cls in (PickUp, PutDown, Stack, Unstack)}
_ACTION_RANK = {PickUp: 0, PutDown: 1, Stack: 2, Unstack: 3}


def action_sort_key(action: Action) -> tuple:
    """Canonical action order: pick-up < put-down < stack < unstack, then block indices."""
    return (_ACTION_RANK[type(action)], action.args)


# -- goals --------------------------------------------------------------------


@dataclass(frozen=True)
class Chain:
    """A goal tower listed bottom to top; denotes On(targets[i+1], targets[i])."""

    targets: tuple[BlockId, ...]

    def __post_init__(self):
        object.__setattr__(self, "targets", tuple(self.targets))
        if not self.targets:
            raise ValueError("chain goal needs at least one target")
        if len(set(self.targets)) != len(self.targets):
            raise ValueError("chain goal targets must be distinct")

    def predicates(self) -> list[Predicate]:
        t = self.targets
        return [On(t[i + 1], t[i]) for i in range(len(t) - 1)]

    @property
    def blocks(self) -> tuple[BlockId, ...]:
        return self.targets


@dataclass(frozen=True)
class Retrieve:
    """Goal of holding a single target block."""

    target: BlockId

    def predicates(self) -> list[Predicate]:
        return [Holding(self.target)]

    @property
    def blocks(self) -> tuple[BlockId, ...]:
        return (self.target,)


@dataclass(frozen=True)
class OnGoals:
    """An arbitrary conjunction of on-facts, kept in the order written."""

    pairs: tuple[tuple[BlockId, BlockId], ...]  # (above, below)

    def __post_init__(self):
        pairs = tuple((int(a), int(b)) for a, b in self.pairs)
        object.__setattr__(self, "pairs", pairs)
        if any(a == b for a, b in pairs):
            raise ValueError("on goal requires two distinct blocks")

    def predicates(self) -> list[Predicate]:
        return [On(a, b) for a, b in self.pairs]

    @property
    def blocks(self) -> tuple[BlockId, ...]:
        seen: dict[BlockId, None] = {}
        for a, b in self.pairs:
            seen.setdefault(b)
            seen.setdefault(a)
        return tuple(seen)


GoalSpec = Union[Chain, Retrieve, OnGoals]


# -- world state --------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class WorldState:
    """Towers listed bottom to top plus the held block, if any.

    Tower order is insertion order and carries no meaning: two states are
    equal when their tower multisets and held blocks agree.
    """

    towers: tuple[tuple[BlockId, ...], ...]
    held: Optional[BlockId] = None

    def __post_init__(self):
        towers = tuple(tuple(t) for t in self.towers)
        if any(not t for t in towers):
            raise ValueError("empty towers are not stored")
        object.__setattr__(self, "towers", towers)

    @classmethod
    def _trusted(cls, towers: tuple, held: Optional[BlockId] = None) -> "WorldState":
        """Construct without re-validating; for successors built from valid tuples."""
        obj = object.__new__(cls)
        object.__setattr__(obj, "towers", towers)
        object.__setattr__(obj, "held", held)
        return obj

    @classmethod
    def from_lists(cls, towers: Iterable[Sequence[BlockId]], held: Optional[BlockId] = None) -> "WorldState":
        return cls(tuple(tuple(t) for t in towers), held)

    @cached_property
    def key(self) -> tuple:
        return (tuple(sorted(self.towers)), self.held)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, WorldState):
            return NotImplemented
        return self.key == other.key

    def __hash__(self) -> int:
        return hash(self.key)

    def __repr__(self) -> str:
        towers = ", ".join("[" + ",".join(f"b{b}" for b in t) + "]" for t in self.towers)
        held = f"b{self.held}" if self.held is not None else "-"
        return f"WorldState([{towers}], held={held})"

    @cached_property
    def positions(self) -> dict[BlockId, tuple[int, int]]:
        """Map block -> (tower index, height from the table)."""
        return {b: (i, h) for i, t in enumerate(self.towers) for h, b in enumerate(t)}

    @property
    def n_blocks(self) -> int:
        return sum(len(t) for t in self.towers) + (self.held is not None)

    def blocks(self) -> list[BlockId]:
        out = [b for t in self.towers for b in t]
        if self.held is not None:
            out.append(self.held)
        return sorted(out)

    def tower_of(self, b: BlockId) -> tuple[BlockId, ...]:
        if b == self.held:
            raise BlockHeld(b)
        try:
            i, _ = self.positions[b]
        except KeyError:
            raise UnknownBlock(b) from None
        return self.towers[i]

    def below(self, b: BlockId) -> Optional[BlockId]:
        """Block directly under ``b``; ``None`` when ``b`` sits on the table."""
        i, h = self.positions[b]
        return self.towers[i][h - 1] if h else None

    def is_clear(self, b: BlockId) -> bool:
        if b == self.held:
            return False
        i, h = self.positions[b]
        return h == len(self.towers[i]) - 1

    def holds(self, pred: Predicate) -> bool:
        if isinstance(pred, HandEmpty):
            return self.held is None
        if isinstance(pred, Holding):
            return self.held == pred.block
        b = pred.above if isinstance(pred, On) else pred.block
        if b == self.held or b not in self.positions:
            return False
        if isinstance(pred, On):
            return pred.below in self.positions and self.below(b) == pred.below
        if isinstance(pred, OnTable):
            return self.positions[b][1] == 0
        return self.is_clear(b)


def state_from_predicates(preds: Iterable[Predicate], n_blocks: int) -> WorldState:
    """Rebuild the unique state whose relational rendering equals ``preds`` (as a set)."""
    preds = set(preds)
    universe = range(1, n_blocks + 1)
    below: dict[BlockId, BlockId] = {}
    above: dict[BlockId, BlockId] = {}
    on_table: set[BlockId] = set()
    clear: set[BlockId] = set()
    holding: set[BlockId] = set()
    hand_empty = False

    def check(b: BlockId) -> None:
        if not 1 <= b <= n_blocks:
            raise UnknownBlock(b)

    for p in preds:
        if isinstance(p, On):
            check(p.above)
            check(p.below)
            if p.above in below:
                raise ConflictError(f"b{p.above} is on two supports")
            if p.below in above:
                raise ConflictError(f"two blocks on b{p.below}")
            below[p.above] = p.below
            above[p.below] = p.above
        elif isinstance(p, OnTable):
            check(p.block)
            on_table.add(p.block)
        elif isinstance(p, Clear):
            check(p.block)
            clear.add(p.block)
        elif isinstance(p, Holding):
            check(p.block)
            holding.add(p.block)
        elif isinstance(p, HandEmpty):
            hand_empty = True
        else:
            raise TypeError(f"not a predicate: {p!r}")

    if hand_empty == bool(holding) or len(holding) > 1:
        raise BadHand("exactly one of handempty or a single holding fact is required")
    held = next(iter(holding), None)

    for b in universe:
        supports = (b in below) + (b in on_table) + (b == held)
        if supports == 0:
            raise MissingPredicate(f"b{b} has no support fact")
        if supports > 1:
            raise ConflictError(f"b{b} has more than one support fact")
    if held is not None and (held in above or held in clear):
        raise ConflictError(f"b{held} is held but also covered or clear")

    towers = []
    placed = 0
    for base in sorted(on_table):
        tower = [base]
        while tower[-1] in above:
            tower.append(above[tower[-1]])
        towers.append(tuple(tower))
        placed += len(tower)
    if placed + (held is not None) != n_blocks:
        # blocks left over sit on supports that never reach the table
        raise CycleError("on-chain loop detected")

    for t in towers:
        for b in t[:-1]:
            if b in clear:
                raise ConflictError(f"b{b} is covered but marked clear")
        if t[-1] not in clear:
            raise MissingPredicate(f"b{t[-1]} is a tower top without a clear fact")
    return WorldState(tuple(towers), held)


def predicates_from_state(state: WorldState) -> list[Predicate]:
    """Complete relational rendering in canonical order."""
    # sort plain ints and tuples; dataclass ordering is far slower on large states
    ons = [On(a, b) for a, b in sorted((t[h], t[h - 1]) for t in state.towers for h in range(1, len(t)))]
    tables = [OnTable(b) for b in sorted(t[0] for t in state.towers)]
    clears = [Clear(b) for b in sorted(t[-1] for t in state.towers)]
    hand: list[Predicate] = [HandEmpty()] if state.held is None else [Holding(state.held)]
    return [*ons, *tables, *clears, *hand]


def _top_index(towers: tuple[tuple[BlockId, ...], ...], b: BlockId) -> Optional[int]:
    for i, t in enumerate(towers):
        if t[-1] == b:
            return i
    return None


def _known(state: WorldState, *blocks: BlockId) -> None:
    for b in blocks:
        if b != state.held and b not in state.positions:
            raise UnknownBlock(b)


def _fast_successor(state: WorldState, action: Action) -> Optional[WorldState]:
    """Successor when every precondition visibly holds at a tower top, else ``None``."""
    towers, held = state.towers, state.held
    if isinstance(action, PickUp):
        if held is None:
            i = _top_index(towers, action.block)
            if i is not None and len(towers[i]) == 1:
                return WorldState._trusted(towers[:i] + towers[i + 1:], action.block)
    elif isinstance(action, PutDown):
        if held is not None and held == action.block:
            return WorldState._trusted(towers + ((held,),), None)
    elif isinstance(action, Stack):
        if held is not None and held == action.block:
            i = _top_index(towers, action.under)
            if i is not None:
                return WorldState._trusted(towers[:i] + (towers[i] + (held,),) + towers[i + 1:], None)
    elif isinstance(action, Unstack):
        if held is None:
            i = _top_index(towers, action.block)
            if i is not None and len(towers[i]) > 1 and towers[i][-2] == action.under:
                return WorldState._trusted(towers[:i] + (towers[i][:-1],) + towers[i + 1:], action.block)
    return None


def apply(state: WorldState, action: Action) -> WorldState:
    """Successor state of ``action``; preconditions are checked in schema order."""
    fast = _fast_successor(state, action)
    if fast is not None:
        return fast
    # slow path: find the first failing precondition for the error
    towers = state.towers
    if isinstance(action, PickUp):
        b = action.block
        _known(state, b)
        i = _top_index(towers, b)
        if i is None:
            raise PreconditionFailed(action, Clear(b))
        if len(towers[i]) != 1:
            raise PreconditionFailed(action, OnTable(b))
        if state.held is not None:
            raise PreconditionFailed(action, HandEmpty())
        return WorldState(towers[:i] + towers[i + 1:], b)

    if isinstance(action, PutDown):
        b = action.block
        _known(state, b)
        if state.held != b:
            raise PreconditionFailed(action, Holding(b))
        return WorldState(towers + ((b,),), None)

    if isinstance(action, Stack):
        b, u = action.block, action.under
        _known(state, b, u)
        i = _top_index(towers, u)
        if i is None:
            raise PreconditionFailed(action, Clear(u))
        if state.held != b:
            raise PreconditionFailed(action, Holding(b))
        return WorldState(towers[:i] + (towers[i] + (b,),) + towers[i + 1:], None)

    if isinstance(action, Unstack):
        b, u = action.block, action.under
        _known(state, b, u)
        if b == state.held or u == state.held or state.below(b) != u:
            raise PreconditionFailed(action, On(b, u))
        i = _top_index(towers, b)
        if i is None:
            raise PreconditionFailed(action, Clear(b))
        if state.held is not None:
            raise PreconditionFailed(action, HandEmpty())
        return WorldState(towers[:i] + (towers[i][:-1],) + towers[i + 1:], b)

    raise TypeError(f"not an action: {action!r}")


def satisfies(state: WorldState, goal: GoalSpec) -> bool:
    for b in goal.blocks:
        if b != state.held and b not in state.positions:
            raise UnknownBlock(b)
    if isinstance(goal, Retrieve):
        return state.held == goal.target
    return all(state.holds(p) for p in goal.predicates())


def depth(state: WorldState, b: BlockId) -> int:
    """Number of blocks strictly above ``b`` in its tower."""
    if b == state.held:
        raise BlockHeld(b)
    if b not in state.positions:
        raise UnknownBlock(b)
    i, h = state.positions[b]
    return len(state.towers[i]) - 1 - h


@dataclass(frozen=True)
class ValidationResult:
    valid: bool
    length: int
    failed_step: Optional[int] = None  # 1-based; len(plan) + 1 when only the goal is unmet
    reason: Optional[str] = None
    final_state: Optional[WorldState] = None


def validate(state: WorldState, goal: GoalSpec, plan: Sequence[Action]) -> ValidationResult:
    """Execute ``plan`` from ``state`` and check the goal, VAL style."""
    for k, action in enumerate(plan, start=1):
        try:
            state = apply(state, action)
        except BlocksError as exc:
            return ValidationResult(False, len(plan), k, str(exc), state)
    try:
        ok = satisfies(state, goal)
    except UnknownBlock as exc:
        return ValidationResult(False, len(plan), len(plan) + 1, str(exc), state)
    if not ok:
        return ValidationResult(False, len(plan), len(plan) + 1, "goal not satisfied", state)
    return ValidationResult(True, len(plan), final_state=state)
