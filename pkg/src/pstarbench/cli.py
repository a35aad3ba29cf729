"""Command-line entry points: generate, solve, validate, translate, evaluate, report."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from .core import BlocksError, validate
from .generator import (
    DEFAULT_MAX_ATTEMPTS,
    PRESETS,
    CurriculumSchedule,
    InfeasibleParams,
    RejectionExhausted,
    generate_curriculum,
    load_schedule,
    preset,
    write_curriculum,
)
from .graphrw import (
    emit_graph_plan,
    emit_graph_problem,
    parse_graph_plan,
    parse_graph_problem,
    translate_graph_plan,
    translate_plan,
)
from .pddl import PddlError, PlanDoc, emit_plan, emit_problem, parse_plan, parse_problem
from .planner import LimitExceeded, SearchLimits, UnsupportedGoalShape, optimal_cost, synthesize_optimal_plan, uniform_cost_oracle
from .harness.evaluate import evaluate, load_manifest
from .harness.metrics import render_summary, summarize, write_plot_data
from .harness.producers import ConfigError, load_producer_config
from .harness.records import RecordWriter, existing_keys, ingest_table, load_records

log = logging.getLogger("pstarbench")


class UsageError(Exception):
    """Bad input the user should fix; maps to exit code 2."""


class OperationalError(Exception):
    """The command ran but could not complete; maps to exit code 1."""


def _emit(args, human: str, data: dict) -> None:
    if args.format == "json":
        print(json.dumps(data, sort_keys=True))
    elif human:
        print(human)


def _read(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from exc


def _write(path: str, text: str) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(text, encoding="utf-8", newline="\n")


def _load_problem(path: str, graph: bool = False):
    text = _read(path)
    try:
        return parse_graph_problem(text, Path(path).stem) if graph else parse_problem(text)
    except BlocksError as exc:
        raise UsageError(f"{path}: {exc}") from exc


# -- generate -----------------------------------------------------------------


def cmd_generate(args) -> int:
    if bool(args.curriculum) == bool(args.params):
        raise UsageError("give exactly one of --curriculum or --params")
    if args.curriculum:
        if args.curriculum not in PRESETS:
            raise UsageError(f"unknown curriculum {args.curriculum!r}; choose from {', '.join(sorted(PRESETS))}")
        schedule = preset(args.curriculum, args.max_h_min)
    else:
        try:
            schedule = load_schedule(Path(args.params))
        except (OSError, json.JSONDecodeError, InfeasibleParams) as exc:
            raise UsageError(str(exc)) from exc
        if args.max_h_min is not None:
            schedule = CurriculumSchedule(schedule.name, tuple(p for p in schedule.steps if p.h_min <= args.max_h_min))
    try:
        instances = generate_curriculum(schedule, args.seed, args.max_attempts)
    except RejectionExhausted as exc:
        raise OperationalError(str(exc)) from exc
    out = Path(args.out) / schedule.name
    manifest = write_curriculum(instances, schedule.name, out)
    costs = [i.c_opt for i in instances]
    _emit(
        args,
        f"accepted={len(instances)} c_opt_min={min(costs)} c_opt_max={max(costs)} manifest={manifest}",
        {"accepted": len(instances), "c_opt_min": min(costs), "c_opt_max": max(costs), "manifest": str(manifest)},
    )
    return 0


# -- solve --------------------------------------------------------------------


def cmd_solve(args) -> int:
    doc = _load_problem(args.problem)
    try:
        if args.oracle:
            plan = uniform_cost_oracle(doc, SearchLimits(args.max_states, args.max_seconds))
            try:
                c_opt = optimal_cost(doc).total
            except UnsupportedGoalShape:
                c_opt = len(plan)  # the search is exact, so its length is the optimum
        else:
            c_opt = optimal_cost(doc).total
            plan = synthesize_optimal_plan(doc)
    except (UnsupportedGoalShape, LimitExceeded) as exc:
        raise OperationalError(str(exc)) from exc
    text = emit_plan(plan)
    if args.out:
        _write(args.out, text + ("\n" if text else ""))
    elif args.format != "json" and text:
        print(text)
    data = {"c_opt": c_opt, "plan_len": len(plan)}
    if args.format == "json" and not args.out:
        data["plan"] = [str(a) for a in plan.steps]
    _emit(args, f"c_opt={c_opt} plan_len={len(plan)}", data)
    return 0


# -- validate -----------------------------------------------------------------


def cmd_validate(args) -> int:
    doc = _load_problem(args.problem, args.graph)
    mode = "lenient" if args.lenient else "strict"
    text = _read(args.plan)
    try:
        if args.graph:
            plan = PlanDoc(tuple(translate_graph_plan(parse_graph_plan(text, mode))))
        else:
            plan = parse_plan(text, mode)
    except BlocksError as exc:
        if not args.lenient:
            raise UsageError(f"{args.plan}: {exc}") from exc
        _emit(args, f"INVALID step=0 reason=unparseable plan: {exc}",
              {"valid": False, "step": 0, "reason": f"unparseable plan: {exc}"})
        return 1
    try:
        result = validate(doc.initial_state(), doc.goal, plan.steps)
    except BlocksError as exc:
        raise UsageError(str(exc)) from exc
    if result.valid:
        _emit(args, f"VALID len={result.length}", {"valid": True, "len": result.length})
        return 0
    _emit(args, f"INVALID step={result.failed_step} reason={result.reason}",
          {"valid": False, "step": result.failed_step, "reason": result.reason})
    return 1


# -- translate ----------------------------------------------------------------


def _translate_problem(text: str, to: str, with_rules: bool, name: str) -> str:
    if to == "graph":
        return emit_graph_problem(parse_problem(text), rules=with_rules)
    return emit_problem(parse_graph_problem(text, name))


def _translate_plan(text: str, to: str) -> str:
    if to == "graph":
        return emit_graph_plan(translate_plan(parse_plan(text).steps))
    return emit_plan(translate_graph_plan(parse_graph_plan(text)))


def cmd_translate(args) -> int:
    if bool(args.problem) == bool(args.plan):
        raise UsageError("give exactly one of --problem or --plan")
    source = args.problem or args.plan
    text = _read(source)
    try:
        if args.problem:
            out = _translate_problem(text, args.to, args.with_rules, Path(source).stem)
        else:
            out = _translate_plan(text, args.to)
    except BlocksError as exc:
        raise UsageError(f"{source} is not a valid {'blocksworld' if args.to == 'graph' else 'graph'} input: {exc}") from exc
    if out and not out.endswith("\n"):
        out += "\n"
    if args.out:
        _write(args.out, out)
        _emit(args, "", {"out": args.out, "lines": out.count("\n")})
    elif args.format == "json":
        _emit(args, "", {"text": out})
    else:
        sys.stdout.write(out)
    return 0


# -- evaluate / report --------------------------------------------------------


def cmd_evaluate(args) -> int:
    try:
        config = load_producer_config(Path(args.producer_config))
        instances = load_manifest(Path(args.manifest))
    except (OSError, json.JSONDecodeError, BlocksError) as exc:
        raise OperationalError(f"cannot load inputs: {exc}") from exc
    out = Path(args.out)
    done = existing_keys(load_records(out))
    with RecordWriter(out) as writer:
        try:
            records = evaluate(instances, config, args.representation, skip=done, sink=writer.write)
        except ConfigError as exc:
            raise OperationalError(str(exc)) from exc
    valid = sum(r.valid for r in records)
    _emit(
        args,
        f"evaluated={len(records)} skipped={len(instances) - len(records)} valid={valid} out={out}",
        {"evaluated": len(records), "skipped": len(instances) - len(records), "valid": valid, "out": str(out)},
    )
    return 0


def cmd_report(args) -> int:
    records = []
    for path in args.records:
        try:
            if path.endswith(".csv"):
                records.extend(ingest_table(Path(path)))
            else:
                records.extend(load_records(Path(path)))
        except (OSError, KeyError, ValueError) as exc:
            raise OperationalError(f"cannot read records from {path}: {exc}") from exc
    if not records:
        raise OperationalError("no records to report on")
    summary = summarize(records)
    text = render_summary(summary)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "summary.txt").write_text(text, encoding="utf-8")
        (out / "summary.json").write_text(json.dumps(summary.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
        write_plot_data(summary, out)
    if args.format == "json":
        print(json.dumps(summary.to_dict(), sort_keys=True))
    else:
        sys.stdout.write(text)
    return 0


# -- parser -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="master seed (only generation draws randomness)")
    common.add_argument("--format", choices=("text", "json"), default="text")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="pstarbench", description="P* blocksworld benchmark tools")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", parents=[common], help="generate a curriculum")
    p.add_argument("--curriculum", help=f"preset name: {', '.join(sorted(PRESETS))}")
    p.add_argument("--params", help="JSON schedule file instead of a preset")
    p.add_argument("--out", default="out", help="output root; files go to <out>/<curriculum>/")
    p.add_argument("--max-attempts", type=int, default=DEFAULT_MAX_ATTEMPTS)
    p.add_argument("--max-h-min", type=int, help="drop steps whose h_min exceeds this")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("solve", parents=[common], help="synthesize an optimal plan")
    p.add_argument("--problem", required=True)
    p.add_argument("--out", help="write the plan here instead of stdout")
    p.add_argument("--oracle", action="store_true", help="use exhaustive uniform-cost search")
    p.add_argument("--max-states", type=int, default=SearchLimits.max_states)
    p.add_argument("--max-seconds", type=float, default=SearchLimits.max_seconds)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("validate", parents=[common], help="check a plan against a problem")
    p.add_argument("--problem", required=True)
    p.add_argument("--plan", required=True)
    p.add_argument("--lenient", action="store_true", help="tolerate fences, numbering and chatter")
    p.add_argument("--graph", action="store_true", help="problem and plan use the graph-rewrite form")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("translate", parents=[common], help="convert between blocksworld and graph forms")
    p.add_argument("--problem")
    p.add_argument("--plan")
    p.add_argument("--to", choices=("graph", "blocks"), required=True)
    p.add_argument("--with-rules", action="store_true", help="prefix the graph problem with the rule preamble")
    p.add_argument("--out")
    p.set_defaults(func=cmd_translate)

    p = sub.add_parser("evaluate", parents=[common], help="run a producer over a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--producer-config", required=True)
    p.add_argument("--representation", choices=("blocksworld", "graph"), default="blocksworld")
    p.add_argument("--out", required=True, help="results file (JSONL, appended)")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("report", parents=[common], help="summarize evaluation records")
    p.add_argument("--records", nargs="+", required=True, help="JSONL results or CSV tables")
    p.add_argument("--out", help="directory for summary.txt, summary.json and plot CSVs")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)  # exits with 2 on bad flags
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OperationalError, BlocksError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
