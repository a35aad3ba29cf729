"""Batch evaluation of a producer over generated instances."""

from __future__ import annotations

import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Optional, Sequence

import httpx

from ..core import BlocksError, validate
from ..graphrw import RULES_PREAMBLE, emit_graph_plan, emit_graph_problem, parse_graph_plan, translate_graph_plan, translate_plan
from ..pddl import DOMAIN_PDDL, PlanDoc, ProblemDoc, emit_plan, emit_problem, parse_plan, parse_problem
from ..planner import synthesize_optimal_plan
from .metrics import ZeroOptimal, optimality_gap
from .producers import ConfigError, ProducerConfig, ProducerFailure, call_endpoint, run_command
from .prompts import Representation, build_prompt
from .records import EvalRecord


@dataclass(frozen=True)
class EvalInstance:
    instance_id: str
    doc: ProblemDoc
    c_opt: Optional[int]
    curriculum: Optional[str] = None
    goal_mode: Optional[str] = None
    complexity: Optional[int] = None


def load_manifest(path: Path) -> list[EvalInstance]:
    """Instances listed in a generator manifest; problem files resolve next to it."""
    path = Path(path)
    out = []
    for line in path.read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        row = json.loads(line)
        doc = parse_problem((path.parent / row["file"]).read_text(encoding="utf-8"))
        curriculum = row.get("curriculum")
        out.append(EvalInstance(
            instance_id=f"{curriculum}/{row['index']:03d}" if curriculum else Path(row["file"]).stem,
            doc=doc,
            c_opt=row.get("c_opt"),
            curriculum=curriculum,
            goal_mode=row.get("goal_mode"),
            complexity=row.get("complexity"),
        ))
    return out


def _builtin_text(inst: EvalInstance, representation: Representation) -> str:
    plan = synthesize_optimal_plan(inst.doc)
    if representation == "graph":
        return emit_graph_plan(translate_plan(plan))
    return emit_plan(plan)


def _parse(text: str, representation: Representation, modes: Sequence[str]) -> tuple[PlanDoc, str]:
    error: Optional[Exception] = None
    for mode in modes:
        try:
            if representation == "graph":
                return PlanDoc(tuple(translate_graph_plan(parse_graph_plan(text, mode)))), mode
            return parse_plan(text, mode), mode
        except BlocksError as exc:
            error = exc
    raise error


def evaluate_one(
    inst: EvalInstance,
    config: ProducerConfig,
    representation: Representation,
    exemplar=None,
    client: Optional[httpx.Client] = None,
) -> EvalRecord:
    base = dict(
        instance_id=inst.instance_id,
        producer_id=config.id,
        representation=representation,
        c_opt=inst.c_opt,
        curriculum=inst.curriculum,
        goal_mode=inst.goal_mode,
        complexity=inst.complexity,
    )
    start = time.perf_counter()
    tokens = None
    try:
        if config.kind == "builtin_optimal":
            text, modes = _builtin_text(inst, representation), ("strict",)
        elif config.kind == "external_command":
            if representation == "graph":
                out = run_command(config, RULES_PREAMBLE, emit_graph_problem(inst.doc))
            else:
                out = run_command(config, DOMAIN_PDDL, emit_problem(inst.doc))
            text, modes = out.text, ("strict", "lenient")
        else:
            prompt = build_prompt(inst.doc, exemplar, representation).text
            out = call_endpoint(config, prompt, client)
            text, tokens, modes = out.text, out.thinking_tokens, ("strict", "lenient")
    except (ProducerFailure, BlocksError) as exc:
        return EvalRecord(valid=False, wall_time=time.perf_counter() - start,
                          failure_reason=f"producer: {exc}", **base)
    elapsed = time.perf_counter() - start

    try:
        plan, mode = _parse(text, representation, modes)
    except BlocksError as exc:
        return EvalRecord(valid=False, raw_output=text, thinking_tokens=tokens, wall_time=elapsed,
                          failure_reason=f"parse: {exc}", **base)

    result = validate(inst.doc.initial_state(), inst.doc.goal, plan.steps)
    if not result.valid:
        return EvalRecord(valid=False, plan_length=len(plan), raw_output=text, parse_mode=mode,
                          thinking_tokens=tokens, wall_time=elapsed,
                          failure_reason=f"invalid at step {result.failed_step}: {result.reason}", **base)
    gap = None
    if inst.c_opt is not None:
        try:
            gap = optimality_gap(len(plan), inst.c_opt)
        except ZeroOptimal:
            gap = math.inf
    return EvalRecord(valid=True, plan_length=len(plan), gap=gap, raw_output=text, parse_mode=mode,
                      thinking_tokens=tokens, wall_time=elapsed, **base)


def evaluate(
    instances: Iterable[EvalInstance],
    config: ProducerConfig,
    representation: Representation = "blocksworld",
    *,
    exemplar=None,
    skip: Iterable[tuple[str, str, str]] = (),
    sink: Optional[Callable[[EvalRecord], None]] = None,
    client: Optional[httpx.Client] = None,
) -> list[EvalRecord]:
    """Evaluate every instance whose record key is not in ``skip``.

    Producer calls run ``config.parallelism`` at a time; ``sink`` receives
    records one by one in instance order.
    """
    if representation not in ("blocksworld", "graph"):
        raise ConfigError(f"unknown representation {representation!r}")
    if config.kind == "http_endpoint":
        config.credential()  # fail fast on a missing secret
    skip = set(skip)
    todo = [i for i in instances if (i.instance_id, config.id, representation) not in skip]
    records = []
    with ThreadPoolExecutor(max_workers=config.parallelism) as pool:
        results = pool.map(lambda i: evaluate_one(i, config, representation, exemplar, client), todo)
        for record in results:
            if sink is not None:
                sink(record)
            records.append(record)
    return records
