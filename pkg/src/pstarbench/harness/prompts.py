"""One-shot prompt assembly for both problem representations."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, Optional

from ..core import BlocksError, validate
from ..graphrw import emit_graph_plan, emit_graph_problem, goal_edges, node_name, render_edges, RULES_PREAMBLE, translate_plan
from ..pddl import DOMAIN_PDDL, PlanDoc, ProblemDoc, emit_plan, emit_problem, parse_plan, parse_problem

Representation = Literal["blocksworld", "graph"]

PLAN_INSTRUCTION = (
    "Provide only the correct pddl plan. Do not add numbers, items or any additional text. "
    "Follow the syntax of the above examplars for the plan if provided. Your plan as plain text:"
)
# the two closing instructions differ in spelling; both are reproduced as used
EXEMPLAR_INSTRUCTION = (
    "Provide only the result. Do not add numbers, items or any additional text. "
    "Follow the format of the above examplars without additional formatting:"
)
TASK_INSTRUCTION = (
    "Provide only the result. Do not add numbers, items or any additional text. "
    "Follow the format of the above exemplars without additional formatting:"
)

BW_RAND_4_PROBLEM = """\
(define (problem BW-rand-4)
(:domain blocksworld-4ops)
(:objects b2 b4 b1 b3)
(:init
(clear b1)
(ontable b2)
(ontable b3)
(clear b3)
(on b1 b4)
(on b4 b2)
(handempty)
)
(:goal (and
(on b2 b1)
(on b4 b3)
))
)
"""

BW_RAND_4_PLAN = """\
(unstack b1 b4)
(put-down b1)
(unstack b4 b2)
(stack b4 b3)
(pick-up b2)
(stack b2 b1)"""


class InvalidExemplar(BlocksError):
    pass


def default_exemplar() -> tuple[ProblemDoc, PlanDoc]:
    return parse_problem(BW_RAND_4_PROBLEM), parse_plan(BW_RAND_4_PLAN)


@dataclass(frozen=True)
class PromptBundle:
    domain_text: str
    exemplar_problem_text: str
    exemplar_plan_text: str
    target_problem_text: str
    representation: Representation

    @property
    def text(self) -> str:
        if self.representation == "graph":
            return (
                self.domain_text
                + "\n\nExample Input\n\n"
                + self.exemplar_problem_text
                + "\nSolution:\n"
                + self.exemplar_plan_text
                + "\n\nYour task:\n"
                + self.target_problem_text
            )
        return (
            self.domain_text
            + "\n"
            + PLAN_INSTRUCTION
            + "\n\n\n**Example**\n\n"
            + self.exemplar_problem_text
            + "\n"
            + EXEMPLAR_INSTRUCTION
            + "\n"
            + self.exemplar_plan_text
            + "\n\n**TASK**\n\n"
            + self.target_problem_text
            + TASK_INSTRUCTION
            + "\n\n\n"
        )


def _graph_exemplar_text(problem: ProblemDoc) -> str:
    lines = ["INITIAL GRAPH STATE (Edges)", *render_edges(problem.initial_state()), ""]
    lines += ["GOAL GRAPH PATTERN (Edges)"]
    lines += [f"{node_name(p)} -> n{c}" for p, c in goal_edges(problem.goal)]
    return "\n".join(lines) + "\n"


def build_prompt(
    problem: ProblemDoc,
    exemplar: Optional[tuple[ProblemDoc, PlanDoc]] = None,
    representation: Representation = "blocksworld",
) -> PromptBundle:
    ex_problem, ex_plan = exemplar or default_exemplar()
    result = validate(ex_problem.initial_state(), ex_problem.goal, ex_plan.steps)
    if not result.valid:
        raise InvalidExemplar(f"exemplar plan fails at step {result.failed_step}: {result.reason}")
    if representation == "graph":
        return PromptBundle(
            RULES_PREAMBLE,
            _graph_exemplar_text(ex_problem),
            emit_graph_plan(translate_plan(ex_plan)),
            emit_graph_problem(problem),
            "graph",
        )
    if representation != "blocksworld":
        raise ValueError(f"unknown representation {representation!r}")
    return PromptBundle(
        DOMAIN_PDDL,
        emit_problem(ex_problem, "compact"),
        emit_plan(ex_plan),
        emit_problem(problem),
        "blocksworld",
    )
