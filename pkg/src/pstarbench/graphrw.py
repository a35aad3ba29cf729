"""Graph-rewrite form of the blocksworld.

The table becomes a root node ``R``, the gripper a transfer node ``T`` that
holds at most one child, and each block a node ``n<k>``.  An edge
``u -> v`` means ``u`` is directly under (or holds) ``v``.  The four rewrite
operations correspond one-to-one with the four blocksworld actions.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Literal, Optional, Sequence, Union

from .core import (
    Action,
    BlockId,
    BlocksError,
    Chain,
    Clear,
    GoalSpec,
    HandEmpty,
    Holding,
    On,
    OnGoals,
    OnTable,
    PickUp,
    PutDown,
    Retrieve,
    Stack,
    Unstack,
    WorldState,
)
from .pddl import PddlSyntaxError, ProblemDoc, lenient_lines

ROOT = "R"
TRANSFER = "T"
NodeRef = Union[str, int]

RULES_PREAMBLE = """\
SYSTEM PROMPT: GRAPH REWRITE SOLVER

I. THE DOMAIN
You are a Graph Rewriting Engine. You operate on a directed graph
representing a hierarchical data structure.

Definitions:
Nodes ($V$):
R: The Root Node (Fixed anchor, infinite outgoing capacity).
T: The Transfer Node (Temporary buffer, capacity = 1 outgoing edge).

Edges ($E$):
Directed edge u -> v represents a parent-child link.
Leaf Node: A node x is a leaf if it has out-degree 0 (it has no children).

II. THE RULES (OPERATIONS)
You can only perform the following four atomic operations to modify the graph topology.

1. DETACH_NODE(child, parent)
Semantics: Detaches a leaf node from its current parent.
(Constraint: Do NOT use this to detach from the Root R).
Preconditions:
- Edge parent -> child exists.
- child is a Leaf (Out-degree = 0).
- T (Transfer Node) is empty (Out-degree = 0).
- parent is not R.
Effect: Delete edge parent -> child. Add edge T -> child.

2. ATTACH_NODE(child, target)
Semantics: Attaches the node currently in the Transfer Node to a new target leaf.
(Constraint: Do NOT use this to attach to the Root R).
Preconditions:
- Edge T -> child exists.
- target is a Leaf node (Out-degree = 0).
- child != target.
- target is not R.
Effect: Delete edge T -> child. Add edge target -> child.

3. ATTACH_TO_ROOT(child)
Semantics: Attaches the node currently in the Transfer Node to the Root R.
Preconditions:
- Edge T -> child exists.
Effect: Delete edge T -> child. Add edge R -> child.

4. DETACH_FROM_ROOT(child)
Semantics: Detaches a leaf node that is currently connected directly to the Root R.
Preconditions:
- Edge R -> child exists.
- child is a Leaf (Out-degree = 0).
- T (Transfer Node) is empty (Out-degree = 0).
Effect: Delete edge R -> child. Add edge T -> child.
"""

INITIAL_HEADER = "### INITIAL GRAPH STATE ###"
GOAL_HEADER = "### GOAL GRAPH PATTERN ###"


class GraphError(BlocksError):
    pass


class GraphPreconditionFailed(GraphError):
    def __init__(self, op: "GraphOp", reason: str):
        super().__init__(f"{op}: {reason}")
        self.op = op
        self.reason = reason


class UnknownOp(PddlSyntaxError):
    pass


class GraphArityMismatch(PddlSyntaxError):
    pass


def node_name(ref: NodeRef) -> str:
    return ref if isinstance(ref, str) else f"n{ref}"


# -- operations ---------------------------------------------------------------


@dataclass(frozen=True)
class DetachNode:
    child: int
    parent: int
    opname = "DETACH_NODE"

    def __str__(self) -> str:
        return f"DETACH_NODE(n{self.child}, n{self.parent})"


@dataclass(frozen=True)
class AttachNode:
    child: int
    target: int
    opname = "ATTACH_NODE"

    def __str__(self) -> str:
        return f"ATTACH_NODE(n{self.child}, n{self.target})"


@dataclass(frozen=True)
class AttachToRoot:
    child: int
    opname = "ATTACH_TO_ROOT"

    def __str__(self) -> str:
        return f"ATTACH_TO_ROOT(n{self.child})"


@dataclass(frozen=True)
class DetachFromRoot:
    child: int
    opname = "DETACH_FROM_ROOT"

    def __str__(self) -> str:
        return f"DETACH_FROM_ROOT(n{self.child})"


GraphOp = Union[DetachNode, AttachNode, AttachToRoot, DetachFromRoot]
OP_TYPES = {cls.opname: cls for cls in (DetachNode, AttachNode, AttachToRoot, DetachFromRoot)}
_OP_ARITY = {"DETACH_NODE": 2, "ATTACH_NODE": 2, "ATTACH_TO_ROOT": 1, "DETACH_FROM_ROOT": 1}


# -- graph state --------------------------------------------------------------


@dataclass(frozen=True)
class GraphState:
    """Edge set over R, T and block nodes; every block node has one parent."""

    edges: frozenset

    def __post_init__(self):
        object.__setattr__(self, "edges", frozenset(self.edges))
        parents: dict[int, NodeRef] = {}
        for parent, child in self.edges:
            if child in parents:
                raise GraphError(f"{node_name(child)} has two parents")
            parents[child] = parent
        object.__setattr__(self, "_parent", parents)
        counts: dict[NodeRef, int] = {}
        for parent, _ in self.edges:
            counts[parent] = counts.get(parent, 0) + 1
        object.__setattr__(self, "_out", counts)
        if counts.get(TRANSFER, 0) > 1:
            raise GraphError("T holds more than one node")

    def parent(self, node: int) -> Optional[NodeRef]:
        return self._parent.get(node)

    def has_edge(self, parent: NodeRef, child: int) -> bool:
        return self._parent.get(child) == parent

    def is_leaf(self, node: NodeRef) -> bool:
        return self._out.get(node, 0) == 0

    @property
    def transfer(self) -> Optional[int]:
        for parent, child in self.edges:
            if parent == TRANSFER:
                return child
        return None

    @property
    def nodes(self) -> list[int]:
        return sorted(self._parent)


def to_graph(state: WorldState) -> GraphState:
    edges = set()
    for tower in state.towers:
        edges.add((ROOT, tower[0]))
        edges.update(zip(tower, tower[1:]))
    if state.held is not None:
        edges.add((TRANSFER, state.held))
    return GraphState(frozenset(edges))


def from_graph(g: GraphState) -> WorldState:
    children: dict[NodeRef, int] = {}
    roots = []
    for parent, child in g.edges:
        if parent == ROOT:
            roots.append(child)
        elif parent in children:
            raise GraphError(f"{node_name(parent)} has more than one child")
        else:
            children[parent] = child
    held = children.pop(TRANSFER, None)
    towers = []
    seen = 0
    for base in sorted(roots):
        tower = [base]
        while tower[-1] in children:
            tower.append(children[tower[-1]])
        towers.append(tuple(tower))
        seen += len(tower)
    if held is not None:
        if held in children:
            raise GraphError("the node in T still has children")
        seen += 1
    if seen != len(g.nodes):
        raise GraphError("graph has nodes unreachable from R or T")
    return WorldState(tuple(towers), held)


def apply_graph_op(g: GraphState, op: GraphOp) -> GraphState:
    """Apply one rewrite rule, checking its preconditions in the listed order."""
    edges = set(g.edges)
    if isinstance(op, DetachNode):
        if not g.has_edge(op.parent, op.child):
            raise GraphPreconditionFailed(op, f"edge n{op.parent} -> n{op.child} does not exist")
        if not g.is_leaf(op.child):
            raise GraphPreconditionFailed(op, f"n{op.child} is not a leaf")
        if not g.is_leaf(TRANSFER):
            raise GraphPreconditionFailed(op, "T is not empty")
        edges.remove((op.parent, op.child))
        edges.add((TRANSFER, op.child))
    elif isinstance(op, AttachNode):
        if not g.has_edge(TRANSFER, op.child):
            raise GraphPreconditionFailed(op, f"edge T -> n{op.child} does not exist")
        if op.target not in g._parent or not g.is_leaf(op.target) or g.parent(op.target) == TRANSFER:
            raise GraphPreconditionFailed(op, f"n{op.target} is not a leaf")
        if op.child == op.target:
            raise GraphPreconditionFailed(op, "child equals target")
        edges.remove((TRANSFER, op.child))
        edges.add((op.target, op.child))
    elif isinstance(op, AttachToRoot):
        if not g.has_edge(TRANSFER, op.child):
            raise GraphPreconditionFailed(op, f"edge T -> n{op.child} does not exist")
        edges.remove((TRANSFER, op.child))
        edges.add((ROOT, op.child))
    elif isinstance(op, DetachFromRoot):
        if not g.has_edge(ROOT, op.child):
            raise GraphPreconditionFailed(op, f"edge R -> n{op.child} does not exist")
        if not g.is_leaf(op.child):
            raise GraphPreconditionFailed(op, f"n{op.child} is not a leaf")
        if not g.is_leaf(TRANSFER):
            raise GraphPreconditionFailed(op, "T is not empty")
        edges.remove((ROOT, op.child))
        edges.add((TRANSFER, op.child))
    else:
        raise TypeError(f"not a graph op: {op!r}")
    return GraphState(frozenset(edges))


def goal_edges(goal: GoalSpec) -> list[tuple[NodeRef, int]]:
    if isinstance(goal, Retrieve):
        return [(TRANSFER, goal.target)]
    return [(p.below, p.above) for p in goal.predicates()]


def graph_satisfies(g: GraphState, goal: GoalSpec) -> bool:
    return all(g.has_edge(parent, child) for parent, child in goal_edges(goal))


# -- plan translation ---------------------------------------------------------


def translate_action(action: Action) -> GraphOp:
    if isinstance(action, Unstack):
        return DetachNode(action.block, action.under)
    if isinstance(action, PutDown):
        return AttachToRoot(action.block)
    if isinstance(action, PickUp):
        return DetachFromRoot(action.block)
    if isinstance(action, Stack):
        return AttachNode(action.block, action.under)
    raise TypeError(f"not an action: {action!r}")


def translate_op(op: GraphOp) -> Action:
    if isinstance(op, DetachNode):
        return Unstack(op.child, op.parent)
    if isinstance(op, AttachToRoot):
        return PutDown(op.child)
    if isinstance(op, DetachFromRoot):
        return PickUp(op.child)
    if isinstance(op, AttachNode):
        return Stack(op.child, op.target)
    raise TypeError(f"not a graph op: {op!r}")


def translate_plan(plan: Iterable[Action]) -> list[GraphOp]:
    return [translate_action(a) for a in plan]


def translate_graph_plan(ops: Iterable[GraphOp]) -> list[Action]:
    return [translate_op(op) for op in ops]


# -- text formats -------------------------------------------------------------


def _init_line(pred) -> Optional[str]:
    if isinstance(pred, On):
        return f"n{pred.below} -> n{pred.above}"
    if isinstance(pred, OnTable):
        return f"R -> n{pred.block}"
    if isinstance(pred, Clear):
        return f"Leaf: n{pred.block}"
    if isinstance(pred, Holding):
        return f"T -> n{pred.block}"
    return None  # handempty is implied by the absence of a T edge


def _edge_line(parent: NodeRef, child: int) -> str:
    return f"{node_name(parent)} -> n{child}"


def emit_graph_problem(problem: ProblemDoc, rules: bool = False) -> str:
    """Task section: the init list in stored order, then the goal edges."""
    lines = [INITIAL_HEADER]
    lines += [line for line in map(_init_line, problem.init) if line is not None]
    lines += ["", GOAL_HEADER]
    lines += [_edge_line(p, c) for p, c in goal_edges(problem.goal)]
    text = "\n".join(lines) + "\n"
    return RULES_PREAMBLE + "\n\n" + text if rules else text


def render_edges(state: WorldState) -> list[str]:
    """Edges level by level from R, children of R ascending; the exemplar layout."""
    g = to_graph(state)
    child_of = {p: c for p, c in g.edges if p not in (ROOT, TRANSFER)}
    level = sorted(c for p, c in g.edges if p == ROOT)
    lines = [f"R -> n{c}" for c in level]
    while level:
        nxt = [child_of[b] for b in level if b in child_of]
        lines += [f"n{b} -> n{child_of[b]}" for b in level if b in child_of]
        level = nxt
    if state.held is not None:
        lines.append(f"T -> n{state.held}")
    return lines


_EDGE = re.compile(r"(R|T|n[1-9][0-9]*)\s*->\s*n([1-9][0-9]*)")
_LEAF = re.compile(r"Leaf:\s*n([1-9][0-9]*)")


def _node(token: str) -> NodeRef:
    return token if token in (ROOT, TRANSFER) else int(token[1:])


def parse_graph_problem(text: str, name: str = "graph-problem") -> ProblemDoc:
    """Read the task section back into a problem (handempty is appended when no T edge)."""
    lines = [line.strip() for line in text.splitlines()]
    try:
        start = lines.index(INITIAL_HEADER)
        split = lines.index(GOAL_HEADER)
    except ValueError:
        raise PddlSyntaxError("missing graph state or goal header") from None
    init: list = []
    nodes: set[int] = set()
    for lineno, line in enumerate(lines[start + 1:split], start=start + 2):
        if not line:
            continue
        if m := _EDGE.fullmatch(line):
            parent, child = _node(m.group(1)), int(m.group(2))
            nodes.add(child)
            if parent == ROOT:
                init.append(OnTable(child))
            elif parent == TRANSFER:
                init.append(Holding(child))
            else:
                nodes.add(parent)
                init.append(On(child, parent))
        elif m := _LEAF.fullmatch(line):
            nodes.add(int(m.group(1)))
            init.append(Clear(int(m.group(1))))
        else:
            raise PddlSyntaxError(f"bad graph line {line!r}", line=lineno)
    if not any(isinstance(p, Holding) for p in init):
        init.append(HandEmpty())

    goal_pairs = []
    for lineno, line in enumerate(lines[split + 1:], start=split + 2):
        if not line:
            continue
        m = _EDGE.fullmatch(line)
        if not m:
            raise PddlSyntaxError(f"bad goal line {line!r}", line=lineno)
        goal_pairs.append((_node(m.group(1)), int(m.group(2))))
    goal = _goal_from_edges(goal_pairs)
    doc = ProblemDoc(name, tuple(range(1, len(nodes) + 1)), tuple(init), goal)
    if nodes != set(range(1, len(nodes) + 1)):
        raise PddlSyntaxError("graph nodes must be n1..nN without gaps")
    doc.initial_state()
    return doc


def _goal_from_edges(pairs: Sequence[tuple[NodeRef, int]]) -> GoalSpec:
    if len(pairs) == 1 and pairs[0][0] == TRANSFER:
        return Retrieve(pairs[0][1])
    if not pairs or any(p in (ROOT, TRANSFER) for p, _ in pairs):
        raise PddlSyntaxError("goal edges must link block nodes")
    chain = [pairs[0][0], pairs[0][1]]
    for parent, child in pairs[1:]:
        if parent != chain[-1]:
            break
        chain.append(child)
    else:
        if len(set(chain)) == len(chain):
            return Chain(tuple(chain))
    return OnGoals(tuple((c, p) for p, c in pairs))


_OP_LINE = re.compile(r"\s*([A-Z_]+)\(\s*([^,()\s]+)\s*(?:,\s*([^,()\s]+)\s*)?\)\s*")
_OP_ANYWHERE = re.compile(r"\b(?:DETACH_NODE|ATTACH_NODE|ATTACH_TO_ROOT|DETACH_FROM_ROOT)\s*\([^()]*\)")


def _op_arg(token: str, lenient: bool, lineno: int) -> int:
    m = re.fullmatch(r"([nb])([1-9][0-9]*)" if lenient else r"(n)([1-9][0-9]*)", token)
    if not m:
        raise PddlSyntaxError(f"bad node name {token!r}", line=lineno)
    return int(m.group(2))


def parse_graph_plan(text: str, mode: Literal["strict", "lenient"] = "strict") -> list[GraphOp]:
    if mode == "strict":
        lines = list(enumerate(text.splitlines(), start=1))
    elif mode == "lenient":
        lines = [(n, op) for n, line in lenient_lines(text, _OP_ANYWHERE.search) for op in _OP_ANYWHERE.findall(line)]
    else:
        raise ValueError(f"unknown mode {mode!r}")
    ops: list[GraphOp] = []
    for lineno, line in lines:
        if not line.strip():
            continue
        m = _OP_LINE.fullmatch(line)
        if not m:
            raise PddlSyntaxError(f"not a graph operation: {line.strip()!r}", line=lineno)
        name = m.group(1)
        if name not in OP_TYPES:
            raise UnknownOp(f"unknown operation {name!r}", line=lineno)
        args = [a for a in m.group(2, 3) if a is not None]
        if len(args) != _OP_ARITY[name]:
            raise GraphArityMismatch(f"{name} takes {_OP_ARITY[name]} arguments, got {len(args)}", line=lineno)
        nodes = [_op_arg(a, mode == "lenient", lineno) for a in args]
        if len(nodes) == 2 and nodes[0] == nodes[1]:
            raise PddlSyntaxError(f"{name} relates a node to itself", line=lineno)
        ops.append(OP_TYPES[name](*nodes))
    return ops


def emit_graph_plan(ops: Iterable[GraphOp]) -> str:
    return "\n".join(str(op) for op in ops)
