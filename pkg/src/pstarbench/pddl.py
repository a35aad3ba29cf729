"""Reading and writing blocksworld-4ops problem files and plans.

Only the one domain is supported, so its definition is a constant rather
than something parsed.  Problems keep their init list in the order written:
the scrambled order is part of what a benchmark instance is.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Literal, Optional

from .core import (
    ACTION_TYPES,
    Action,
    BlockId,
    BlocksError,
    Chain,
    Clear,
    GoalSpec,
    HandEmpty,
    Holding,
    InconsistentState,
    On,
    OnGoals,
    OnTable,
    Predicate,
    Retrieve,
    WorldState,
    state_from_predicates,
)

DOMAIN_NAME = "blocksworld-4ops"

DOMAIN_PDDL = """\
(define (domain blocksworld-4ops)
  (:requirements :strips)
(:predicates (clear ?x)
             (ontable ?x)
             (handempty)
             (holding ?x)
             (on ?x ?y))

(:action pick-up
  :parameters (?ob)
  :precondition (and (clear ?ob) (ontable ?ob) (handempty))
  :effect (and (holding ?ob) (not (clear ?ob)) (not (ontable ?ob))
               (not (handempty))))

(:action put-down
  :parameters  (?ob)
  :precondition (holding ?ob)
  :effect (and (clear ?ob) (handempty) (ontable ?ob)
               (not (holding ?ob))))

(:action stack
  :parameters  (?ob ?underob)
  :precondition (and (clear ?underob) (holding ?ob))
  :effect (and (handempty) (clear ?ob) (on ?ob ?underob)
               (not (clear ?underob)) (not (holding ?ob))))

(:action unstack
  :parameters  (?ob ?underob)
  :precondition (and (on ?ob ?underob) (clear ?ob) (handempty))
  :effect (and (holding ?ob) (clear ?underob)
               (not (on ?ob ?underob)) (not (clear ?ob)) (not (handempty)))))
"""


class PddlError(BlocksError):
    pass


class PddlSyntaxError(PddlError):
    def __init__(self, message: str, position: Optional[int] = None, line: Optional[int] = None):
        where = f" at offset {position}" if position is not None else ""
        where += f" (line {line})" if line is not None else ""
        super().__init__(message + where)
        self.position = position
        self.line = line


class UnknownPredicate(PddlError):
    pass


class UndeclaredObject(PddlError):
    pass


class InconsistentInit(PddlError):
    pass


class ArityMismatch(PddlSyntaxError):
    pass


class DegenerateGoal(PddlError):
    pass


@dataclass(frozen=True)
class ProblemDoc:
    name: str
    objects: tuple[BlockId, ...]
    init: tuple[Predicate, ...]
    goal: GoalSpec

    def __post_init__(self):
        object.__setattr__(self, "objects", tuple(self.objects))
        object.__setattr__(self, "init", tuple(self.init))

    @property
    def n_blocks(self) -> int:
        return len(self.objects)

    def initial_state(self) -> WorldState:
        try:
            return state_from_predicates(self.init, self.n_blocks)
        except InconsistentState as exc:
            raise InconsistentInit(str(exc)) from exc


@dataclass(frozen=True)
class PlanDoc:
    steps: tuple[Action, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "steps", tuple(self.steps))

    def __len__(self) -> int:
        return len(self.steps)

    def __iter__(self):
        return iter(self.steps)


# -- problem emission ---------------------------------------------------------


def _goal_lines(goal: GoalSpec) -> list[str]:
    preds = goal.predicates()
    if not preds:
        raise DegenerateGoal("a chain goal with a single target has no conjuncts to emit")
    return [str(p) for p in preds]


def emit_problem(doc: ProblemDoc, style: Literal["generated", "compact"] = "generated") -> str:
    """Render a problem file.

    ``generated`` is the indented layout used for benchmark instances;
    ``compact`` is the flat layout of the hand-written one-shot exemplar.
    """
    goal = _goal_lines(doc.goal)
    objects = " ".join(f"b{b}" for b in doc.objects)
    init = [str(p) for p in doc.init]
    if style == "compact":
        lines = [
            f"(define (problem {doc.name})",
            f"(:domain {DOMAIN_NAME})",
            f"(:objects {objects})",
            "(:init",
            *init,
            ")",
            "(:goal (and",
            *goal,
            "))",
            ")",
        ]
    elif style == "generated":
        lines = [
            f"(define (problem {doc.name})",
            f"(:domain {DOMAIN_NAME})",
            "  (:objects",
            f"    {objects}",
            "  )",
            "  (:init",
            *init,
            "  )",
            "  (:goal",
            "    (and",
            *(f"      {g}" for g in goal),
            "    )",
            "  )",
            ")",
        ]
    else:
        raise ValueError(f"unknown style {style!r}")
    return "\n".join(lines) + "\n"


# -- problem parsing ----------------------------------------------------------

_TOKEN = re.compile(r"\s*(?:(\()|(\))|([^\s()]+))")
_BLOCK = re.compile(r"b([1-9][0-9]*)")


def _tokenize(text: str) -> list[tuple[str, int]]:
    tokens = []
    pos = 0
    text = re.sub(r";[^\n]*", "", text)
    while True:
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            if text[pos:].strip():
                raise PddlSyntaxError("unexpected character", pos)
            return tokens
        tokens.append((m.group(1) or m.group(2) or m.group(3), m.start(m.lastindex)))
        pos = m.end()


def _read_sexpr(text: str):
    tokens = _tokenize(text)
    if not tokens:
        raise PddlSyntaxError("empty problem text", 0)
    stack: list[list] = [[]]
    for tok, pos in tokens:
        if tok == "(":
            stack.append([])
        elif tok == ")":
            if len(stack) == 1:
                raise PddlSyntaxError("unbalanced ')'", pos)
            done = stack.pop()
            stack[-1].append(done)
        else:
            stack[-1].append(tok)
    if len(stack) != 1:
        raise PddlSyntaxError("unbalanced '('", len(text))
    if len(stack[0]) != 1 or not isinstance(stack[0][0], list):
        raise PddlSyntaxError("expected a single (define ...) form", 0)
    return stack[0][0]


def _block(name, declared: Optional[set] = None) -> BlockId:
    if not isinstance(name, str):
        raise PddlSyntaxError(f"expected an object name, got {name!r}")
    m = _BLOCK.fullmatch(name)
    if not m:
        raise PddlSyntaxError(f"bad object name {name!r}")
    b = int(m.group(1))
    if declared is not None and b not in declared:
        raise UndeclaredObject(f"{name} is not declared in :objects")
    return b


_ARITY = {"on": 2, "ontable": 1, "clear": 1, "handempty": 0, "holding": 1}


def _predicate(form, declared: set) -> Predicate:
    if not isinstance(form, list) or not form or not isinstance(form[0], str):
        raise PddlSyntaxError(f"malformed predicate {form!r}")
    head, args = form[0], form[1:]
    if head not in _ARITY:
        raise UnknownPredicate(f"unknown predicate {head!r}")
    if len(args) != _ARITY[head]:
        raise ArityMismatch(f"{head} takes {_ARITY[head]} arguments, got {len(args)}")
    blocks = [_block(a, declared) for a in args]
    if head == "on":
        if blocks[0] == blocks[1]:
            raise PddlSyntaxError(f"(on b{blocks[0]} b{blocks[0]}) relates a block to itself")
        return On(*blocks)
    if head == "ontable":
        return OnTable(*blocks)
    if head == "clear":
        return Clear(*blocks)
    if head == "holding":
        return Holding(*blocks)
    return HandEmpty()


def _goal_from(preds: list[Predicate]) -> GoalSpec:
    if len(preds) == 1 and isinstance(preds[0], Holding):
        return Retrieve(preds[0].block)
    if not preds or not all(isinstance(p, On) for p in preds):
        raise PddlError("goals must be on-facts or a single holding fact")
    chain = [preds[0].below, preds[0].above]
    for p in preds[1:]:
        if p.below != chain[-1]:
            break
        chain.append(p.above)
    else:
        if len(set(chain)) == len(chain):
            return Chain(tuple(chain))
    return OnGoals(tuple((p.above, p.below) for p in preds))


def _section(body: list, key: str):
    hits = [f for f in body if isinstance(f, list) and f and f[0] == key]
    if len(hits) != 1:
        raise PddlSyntaxError(f"expected exactly one {key} section")
    return hits[0]


def parse_problem(text: str) -> ProblemDoc:
    form = _read_sexpr(text)
    if len(form) < 2 or form[0] != "define":
        raise PddlSyntaxError("problem must start with (define", 0)
    head = form[1]
    if not (isinstance(head, list) and len(head) == 2 and head[0] == "problem" and isinstance(head[1], str)):
        raise PddlSyntaxError("expected (problem <name>)")
    body = form[2:]
    domain = _section(body, ":domain")
    if domain[1:] != [DOMAIN_NAME]:
        raise PddlError(f"unsupported domain {domain[1:]!r}")

    objects = tuple(_block(o) for o in _section(body, ":objects")[1:])
    declared = set(objects)
    if len(declared) != len(objects):
        raise PddlError("duplicate object declaration")
    if declared != set(range(1, len(objects) + 1)):
        raise UndeclaredObject("objects must be b1..bN without gaps")

    init = tuple(_predicate(p, declared) for p in _section(body, ":init")[1:])

    goal_form = _section(body, ":goal")[1:]
    if len(goal_form) != 1:
        raise PddlSyntaxError("goal must be a single formula")
    g = goal_form[0]
    conjuncts = g[1:] if isinstance(g, list) and g and g[0] == "and" else [g]
    goal = _goal_from([_predicate(p, declared) for p in conjuncts])

    doc = ProblemDoc(head[1], objects, init, goal)
    doc.initial_state()
    return doc


# -- plans --------------------------------------------------------------------

_PLAN_LINE = re.compile(r"\s*\(([a-z-]+)((?:\s+[^\s()]+)*)\s*\)\s*")
_ACTION_ANYWHERE = re.compile(r"\((?:pick-up|put-down|stack|unstack)\b[^()]*\)")
_FENCE = re.compile(r"^\s*```")
_NUMBERING = re.compile(r"^\s*(?:\d+\s*[.):]|[-*•])\s*")


def _action(name: str, args: list[str], line: int) -> Action:
    cls = ACTION_TYPES.get(name)
    if cls is None:
        raise PddlSyntaxError(f"unknown action {name!r}", line=line)
    arity = 1 if name in ("pick-up", "put-down") else 2
    if len(args) != arity:
        raise ArityMismatch(f"{name} takes {arity} arguments, got {len(args)}", line=line)
    try:
        blocks = [_block(a) for a in args]
        return cls(*blocks)
    except (PddlSyntaxError, ValueError) as exc:
        raise PddlSyntaxError(str(exc), line=line) from None


def _strict(lines: list[tuple[int, str]]) -> PlanDoc:
    steps = []
    for lineno, line in lines:
        if not line.strip():
            continue
        m = _PLAN_LINE.fullmatch(line)
        if not m:
            raise PddlSyntaxError(f"not a plan step: {line.strip()!r}", line=lineno)
        steps.append(_action(m.group(1), m.group(2).split(), lineno))
    return PlanDoc(tuple(steps))


def lenient_lines(text: str, is_step) -> list[tuple[int, str]]:
    """Drop code fences, list numbering and lines that carry no step.

    ``is_step`` decides whether a cleaned line still contains an action.
    Shared with the graph-plan parser.
    """
    out = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if _FENCE.match(line):
            continue
        line = _NUMBERING.sub("", line, count=1).strip().strip("`").strip()
        if line and is_step(line):
            out.append((lineno, line))
    return out


def parse_plan(text: str, mode: Literal["strict", "lenient"] = "strict") -> PlanDoc:
    if mode == "strict":
        return _strict(list(enumerate(text.splitlines(), start=1)))
    if mode == "lenient":
        lines = lenient_lines(text, _ACTION_ANYWHERE.search)
        return _strict([(n, step) for n, line in lines for step in _ACTION_ANYWHERE.findall(line)])
    raise ValueError(f"unknown mode {mode!r}")


def emit_plan(plan: PlanDoc | list) -> str:
    return "\n".join(str(a) for a in plan)
