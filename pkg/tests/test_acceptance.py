"""Acceptance criteria 1-10.

Each ``test_criterion_<n>_*`` maps to one criterion; the conftest prints a
PASS/FAIL line per criterion at the end of the run.  Run directly with
``python3 tests/test_acceptance.py`` to execute only this file.
"""

from __future__ import annotations

import random
import time
from fractions import Fraction

import pytest

from helpers import (
    applicable_actions,
    fixture_text,
    random_instances,
    random_state,
    small_chain_problem,
    small_retrieve_problem,
)
from pstarbench.core import HandEmpty, Retrieve, apply, depth, satisfies, validate
from pstarbench.generator import PRESETS, CurriculumParams, generate_curriculum, generate_instance, preset
from pstarbench.graphrw import (
    apply_graph_op,
    emit_graph_plan,
    emit_graph_problem,
    graph_satisfies,
    parse_graph_plan,
    parse_graph_problem,
    to_graph,
    translate_action,
    translate_graph_plan,
    translate_plan,
)
from pstarbench.harness.evaluate import EvalInstance, evaluate
from pstarbench.harness.metrics import fit_tokens_per_step, optimality_gap
from pstarbench.harness.producers import ProducerConfig
from pstarbench.harness.prompts import build_prompt
from pstarbench.harness.records import EvalRecord
from pstarbench.pddl import emit_plan, emit_problem, parse_plan, parse_problem
from pstarbench.planner import (
    interleaved_bounds,
    optimal_cost,
    synthesize_interleaved_plan,
    synthesize_optimal_plan,
    uniform_cost_oracle,
)

GC_PROBLEM = "grand_challenge_h05-10_w006_s02.pddl"


class Timer:
    def __init__(self, budget: float):
        self.budget = budget

    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start
        if exc[0] is None:
            assert self.elapsed < self.budget, f"took {self.elapsed:.1f}s, budget {self.budget}s"


def test_criterion_1_formula_matches_oracle():
    rng = random.Random(1)
    with Timer(60):
        mismatches = []
        for _ in range(600):
            doc = small_chain_problem(rng, max_blocks=6, max_towers=3)
            oracle = len(uniform_cost_oracle(doc))
            if optimal_cost(doc).total != oracle:
                mismatches.append((doc, oracle))
    assert mismatches == []


def test_criterion_2_retrieve_parity():
    rng = random.Random(2)
    with Timer(60):
        bad = []
        for _ in range(250):
            doc = small_retrieve_problem(rng)
            s = doc.initial_state()
            if len(uniform_cost_oracle(doc)) != 2 * depth(s, doc.goal.target) + 1:
                bad.append(doc)
    assert bad == []


def test_criterion_3_grand_challenge_fixture():
    with Timer(5):
        doc = parse_problem(fixture_text(GC_PROBLEM))
        assert optimal_cost(doc).total == 22

        plan = synthesize_optimal_plan(doc)
        assert len(plan) == 22
        assert validate(doc.initial_state(), doc.goal, plan.steps).valid

        expected_ops = parse_graph_plan(fixture_text("grand_challenge_expected_ops.txt"))
        expected_answer = parse_plan(emit_plan(translate_graph_plan(expected_ops)))
        assert validate(doc.initial_state(), doc.goal, expected_answer.steps).valid
        assert translate_plan(expected_answer.steps) == expected_ops
        assert emit_graph_plan(translate_plan(plan.steps)) + "\n" == fixture_text("grand_challenge_expected_ops.txt")

        g = to_graph(doc.initial_state())
        for op in expected_ops:
            g = apply_graph_op(g, op)
        assert graph_satisfies(g, doc.goal)

        assert build_prompt(doc).text == fixture_text("grand_challenge_bw_prompt.txt")
        assert build_prompt(doc, representation="graph").text == fixture_text("grand_challenge_graph_prompt.txt")


def test_criterion_4_bw_rand_4():
    with Timer(5):
        doc = parse_problem(fixture_text("bw_rand_4.pddl"))
        plan = parse_plan(fixture_text("bw_rand_4.plan"))
        assert len(plan) == 6
        assert validate(doc.initial_state(), doc.goal, plan.steps).valid
        assert len(uniform_cost_oracle(doc)) == 6
        prompt = fixture_text("grand_challenge_graph_prompt.txt")
        solution = prompt.split("Solution:\n", 1)[1].split("\n\nYour task", 1)[0]
        assert emit_graph_plan(translate_plan(plan.steps)) == solution


def test_criterion_5_commutation():
    rng = random.Random(5)
    with Timer(30):
        failures = 0
        for _ in range(1500):
            s = random_state(rng, rng.randint(1, 9))
            a = rng.choice(applicable_actions(s))
            if to_graph(apply(s, a)) != apply_graph_op(to_graph(s), translate_action(a)):
                failures += 1
    assert failures == 0


def _check_structure(inst) -> list[str]:
    p, s, goal = inst.params, inst.state, inst.doc.goal
    problems = []
    if len(s.towers) != p.width:
        problems.append("tower count")
    if not all(p.h_min <= len(t) <= p.h_max for t in s.towers):
        problems.append("tower heights")
    towers_of = [s.positions[b][0] for b in goal.blocks]
    if p.goal_mode == "chain":
        if len(goal.targets) != p.targets or len(set(towers_of)) != len(towers_of):
            problems.append("one target per tower")
        if s.below(goal.targets[0]) is not None:
            problems.append("base on table")
    elif p.goal_mode == "retrieve":
        if not isinstance(goal, Retrieve):
            problems.append("retrieve goal")
    else:
        if sorted(towers_of) != sorted(list(range(p.width)) * 2):
            problems.append("two targets per tower")
    return problems


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_criterion_6_curriculum_integrity(name):
    with Timer(600):
        schedule = preset(name, max_h_min=200 if name == "high_towers" else None)
        instances = generate_curriculum(schedule, master_seed=7)
        costs = [i.c_opt for i in instances]
        assert costs == sorted(costs)
        assert {i.index: _check_structure(i) for i in instances if _check_structure(i)} == {}

        evals = [EvalInstance(f"{name}/{i.index:03d}", i.doc, i.c_opt, name, i.params.goal_mode) for i in instances]
        records = evaluate(evals, ProducerConfig("builtin_optimal"), "blocksworld")
        assert all(r.valid for r in records)
        standard = [r for r in records if r.goal_mode in ("chain", "retrieve")]
        assert all(r.gap == 0 for r in standard)


def test_criterion_7_interleaved_soundness(acceptance_report):
    rng = random.Random(7)
    with Timer(300):
        for _ in range(100):
            w = rng.randint(1, 12)
            h_min = rng.randint(3, 8)
            inst = generate_instance(CurriculumParams(w, h_min, rng.randint(h_min, 10), 2 * w, "interleaved"), rng.getrandbits(64))
            plan = synthesize_interleaved_plan(inst.doc)
            assert validate(inst.state, inst.doc.goal, plan.steps).valid

        rows = []
        for w in (1, 2):
            for h_max in (3, 4):
                for _ in range(15):
                    inst = generate_instance(CurriculumParams(w, 3, h_max, 2 * w, "interleaved"), rng.getrandbits(64))
                    oracle = len(uniform_cost_oracle(inst.doc))
                    plan = synthesize_interleaved_plan(inst.doc)
                    published, upper = interleaved_bounds(inst.doc)
                    assert oracle <= len(plan) <= upper, (inst.doc.name, oracle, len(plan), upper)
                    rows.append((w, oracle, len(plan), published, upper, satisfies(inst.state, inst.doc.goal)))

    # documented comparison only; equality with the closed form is not asserted
    agree = sum(r[1] == r[3] for r in rows)
    above = sum(r[1] > r[3] for r in rows)
    below = [r for r in rows if r[1] < r[3]]
    acceptance_report(
        f"interleaved oracle vs closed form sum(2*d_deep)+2N over {len(rows)} small instances: "
        f"equal={agree} oracle_above={above} oracle_below={len(below)} "
        f"(of which goal already satisfied: {sum(r[5] for r in below)})"
    )
    acceptance_report(f"synthesizer matched the oracle on {sum(r[1] == r[2] for r in rows)}/{len(rows)}")
    acceptance_report(f"oracle equals sum(2*d_deep)+4N-2 on {sum(r[1] == r[4] for r in rows if not r[5])}"
                      f"/{sum(not r[5] for r in rows)} unsatisfied instances")
    for n in (1, 2):
        diffs = sorted({r[1] - r[3] for r in rows if r[0] == n and not r[5]})
        acceptance_report(f"  N={n}, goal unsatisfied initially: oracle minus closed form takes values {diffs}")


def test_criterion_8_metric_fidelity():
    assert optimality_gap(116, 108) == Fraction(8, 108)
    assert optimality_gap(260, 152) == Fraction(108, 152)
    records = [
        EvalRecord(f"i{c}", "p", "blocksworld", True, c, c, Fraction(0), thinking_tokens=47 * c + 300)
        for c in range(10, 200, 13)
    ]
    fit = fit_tokens_per_step(records)
    assert abs(fit.slope - 47) < 1e-9
    assert fit.r2 == pytest.approx(1.0, abs=1e-12)


def test_criterion_9_mutation_invalidates():
    with Timer(60):
        docs = [i.doc for i in random_instances(9, 100, max_width=8, max_h=8)]
        survivors = []
        for doc in docs:
            plan = synthesize_optimal_plan(doc).steps
            s = doc.initial_state()
            for k in range(len(plan)):
                mutated = plan[:k] + plan[k + 1:]
                if validate(s, doc.goal, mutated).valid:
                    survivors.append((doc.name, k))
        assert sum(bool(synthesize_optimal_plan(d).steps) for d in docs) >= 90
    assert survivors == []


def test_criterion_10_round_trips():
    with Timer(60):
        for inst in random_instances(10, 1000):
            doc = inst.doc
            assert parse_problem(emit_problem(doc)) == doc

            plan = synthesize_optimal_plan(doc)
            assert parse_plan(emit_plan(plan)) == plan

            back = parse_graph_problem(emit_graph_problem(doc), doc.name)
            assert back.objects == doc.objects and back.goal == doc.goal
            assert [p for p in back.init if p != HandEmpty()] == [p for p in doc.init if p != HandEmpty()]
            assert back.initial_state() == doc.initial_state()

            ops = translate_plan(plan.steps)
            assert parse_graph_plan(emit_graph_plan(ops)) == ops
            assert translate_graph_plan(ops) == list(plan.steps)


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
