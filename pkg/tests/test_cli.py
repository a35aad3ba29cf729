import json
import subprocess
import sys

import pytest

from helpers import FIXTURES, fixture_text
from pstarbench.cli import main

GC = str(FIXTURES / "grand_challenge_h05-10_w006_s02.pddl")
BW4 = str(FIXTURES / "bw_rand_4.pddl")
BW4_PLAN = str(FIXTURES / "bw_rand_4.plan")


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_generate(tmp_path, capsys):
    code, out, _ = run(capsys, "generate", "--curriculum", "grand_challenge", "--seed", 7, "--out", tmp_path)
    assert code == 0
    assert out.startswith("accepted=33 c_opt_min=22 ")
    rows = [json.loads(l) for l in (tmp_path / "grand_challenge" / "manifest.jsonl").read_text().splitlines()]
    assert len(rows) == 33
    costs = [r["c_opt"] for r in rows]
    assert costs == sorted(costs)
    assert len(list((tmp_path / "grand_challenge").glob("*.pddl"))) == 33


def test_generate_is_deterministic(tmp_path, capsys):
    for d in ("a", "b"):
        assert run(capsys, "generate", "--curriculum", "harvest", "--seed", 7, "--out", tmp_path / d)[0] == 0
    a, b = tmp_path / "a" / "harvest", tmp_path / "b" / "harvest"
    names = sorted(p.name for p in a.iterdir())
    assert names == sorted(p.name for p in b.iterdir())
    assert all((a / n).read_bytes() == (b / n).read_bytes() for n in names)


def test_generate_errors(tmp_path, capsys):
    assert run(capsys, "generate", "--curriculum", "bogus", "--out", tmp_path)[0] == 2
    assert run(capsys, "generate", "--out", tmp_path)[0] == 2
    params = tmp_path / "p.json"
    params.write_text(json.dumps({"name": "drop", "steps": [
        {"width": 3, "h_min": 6, "h_max": 8, "targets": 3}, {"width": 3, "h_min": 1, "h_max": 1, "targets": 2}]}))
    code, _, err = run(capsys, "generate", "--params", params, "--max-attempts", 3, "--out", tmp_path)
    assert code == 1 and "no instance" in err


def test_generate_json(tmp_path, capsys):
    code, out, _ = run(capsys, "generate", "--curriculum", "high_towers", "--max-h-min", 50, "--out", tmp_path, "--format", "json")
    data = json.loads(out)
    assert code == 0 and data["accepted"] == 3 and data["c_opt_min"] % 2 == 1


def test_solve(tmp_path, capsys):
    plan = tmp_path / "gc.plan"
    code, out, _ = run(capsys, "solve", "--problem", GC, "--out", plan)
    assert code == 0 and out.strip() == "c_opt=22 plan_len=22"
    assert len(plan.read_text().splitlines()) == 22
    code, out, _ = run(capsys, "solve", "--problem", BW4, "--oracle", "--format", "json")
    assert code == 0 and json.loads(out)["plan_len"] == 6


def test_solve_satisfied_and_unsupported(tmp_path, capsys):
    done = tmp_path / "done.pddl"
    done.write_text("(define (problem d) (:domain blocksworld-4ops) (:objects b1 b2)"
                    " (:init (ontable b1) (on b2 b1) (clear b2) (handempty)) (:goal (and (on b2 b1))))")
    code, out, _ = run(capsys, "solve", "--problem", done)
    assert code == 0 and out.strip() == "c_opt=0 plan_len=0"
    assert run(capsys, "solve", "--problem", BW4)[0] == 1
    assert run(capsys, "solve", "--problem", GC, "--oracle", "--max-states", 10)[0] == 1
    assert run(capsys, "solve", "--problem", tmp_path / "missing.pddl")[0] == 2


def test_validate(tmp_path, capsys):
    plan = tmp_path / "gc.plan"
    run(capsys, "solve", "--problem", GC, "--out", plan)
    code, out, _ = run(capsys, "validate", "--problem", GC, "--plan", plan)
    assert (code, out.strip()) == (0, "VALID len=22")

    short = tmp_path / "short.plan"
    short.write_text("\n".join(plan.read_text().splitlines()[:-1]))
    code, out, _ = run(capsys, "validate", "--problem", GC, "--plan", short)
    assert code == 1 and out.strip() == "INVALID step=22 reason=goal not satisfied"

    chatty = tmp_path / "chatty.plan"
    chatty.write_text("```\n" + "\n".join(f"{i}. {l}" for i, l in enumerate(plan.read_text().splitlines(), 1)) + "\n```\n")
    assert run(capsys, "validate", "--problem", GC, "--plan", chatty)[0] == 2
    code, out, _ = run(capsys, "validate", "--problem", GC, "--plan", chatty, "--lenient", "--format", "json")
    assert code == 0 and json.loads(out) == {"valid": True, "len": 22}


def test_validate_empty_plan_on_satisfied_goal(tmp_path, capsys):
    done = tmp_path / "done.pddl"
    done.write_text("(define (problem d) (:domain blocksworld-4ops) (:objects b1 b2)"
                    " (:init (ontable b1) (on b2 b1) (clear b2) (handempty)) (:goal (and (on b2 b1))))")
    empty = tmp_path / "empty.plan"
    empty.write_text("")
    assert run(capsys, "validate", "--problem", done, "--plan", empty)[1].strip() == "VALID len=0"


def test_validate_graph(tmp_path, capsys):
    problem = tmp_path / "gc.graph"
    run(capsys, "translate", "--problem", GC, "--to", "graph", "--out", problem)
    ops = FIXTURES / "grand_challenge_graph_model_output.txt"
    assert run(capsys, "validate", "--graph", "--problem", problem, "--plan", ops)[0] == 2
    code, out, _ = run(capsys, "validate", "--graph", "--lenient", "--problem", problem, "--plan", ops)
    assert (code, out.strip()) == (0, "VALID len=22")


def test_translate(tmp_path, capsys):
    code, out, _ = run(capsys, "translate", "--plan", BW4_PLAN, "--to", "graph")
    prompt = fixture_text("grand_challenge_graph_prompt.txt")
    assert code == 0 and out == prompt.split("Solution:\n", 1)[1].split("\n\nYour task", 1)[0] + "\n"

    graph = tmp_path / "p.graph"
    graph.write_text(out)
    code, back, _ = run(capsys, "translate", "--plan", graph, "--to", "blocks")
    assert back == fixture_text("bw_rand_4.plan")

    code, out, _ = run(capsys, "translate", "--problem", GC, "--to", "graph", "--with-rules")
    assert out.startswith("SYSTEM PROMPT: GRAPH REWRITE SOLVER")
    code, out, _ = run(capsys, "translate", "--problem", GC, "--to", "graph")
    assert out == prompt.split("Your task:\n", 1)[1]


def test_translate_empty_and_mismatch(tmp_path, capsys):
    empty = tmp_path / "empty.plan"
    empty.write_text("")
    out_file = tmp_path / "out.txt"
    assert run(capsys, "translate", "--plan", empty, "--to", "graph", "--out", out_file)[0] == 0
    assert out_file.read_text() == ""
    assert run(capsys, "translate", "--plan", BW4_PLAN, "--to", "blocks")[0] == 2
    assert run(capsys, "translate", "--problem", GC, "--to", "blocks")[0] == 2
    assert run(capsys, "translate", "--to", "graph")[0] == 2


def test_evaluate_and_report(tmp_path, capsys):
    run(capsys, "generate", "--curriculum", "grand_challenge", "--seed", 3, "--out", tmp_path)
    cfg = tmp_path / "builtin.json"
    cfg.write_text(json.dumps({"kind": "builtin_optimal", "parallelism": 4}))
    manifest = tmp_path / "grand_challenge" / "manifest.jsonl"
    results = tmp_path / "results.jsonl"
    code, out, _ = run(capsys, "evaluate", "--manifest", manifest, "--producer-config", cfg, "--out", results)
    assert code == 0 and out.startswith("evaluated=33 skipped=0 valid=33")
    code, out, _ = run(capsys, "evaluate", "--manifest", manifest, "--producer-config", cfg, "--out", results)
    assert out.startswith("evaluated=0 skipped=33")

    report = tmp_path / "report"
    code, out, _ = run(capsys, "report", "--records", results, "--out", report)
    assert code == 0 and "success_rate=100.0%" in out and "gap min=0.0000 median=0.0000 max=0.0000" in out
    assert "insufficient data" in out
    assert {p.name for p in report.iterdir()} >= {"summary.txt", "summary.json"}
    assert len(list(report.glob("plot_*.csv"))) == 1


def test_evaluate_config_error(tmp_path, capsys, monkeypatch):
    monkeypatch.delenv("PSTAR_NOPE", raising=False)
    run(capsys, "generate", "--curriculum", "grand_challenge", "--max-h-min", 5, "--out", tmp_path)
    cfg = tmp_path / "http.json"
    cfg.write_text(json.dumps({"kind": "http_endpoint", "url": "http://127.0.0.1:9", "credential_env": "PSTAR_NOPE"}))
    args = ["evaluate", "--manifest", tmp_path / "grand_challenge" / "manifest.jsonl", "--producer-config", cfg,
            "--out", tmp_path / "r.jsonl"]
    assert run(capsys, *args)[0] == 1
    cfg.write_text("{not json")
    assert run(capsys, *args)[0] == 1


def test_report_from_table_and_gaps(tmp_path, capsys):
    code, out, _ = run(capsys, "report", "--records", FIXTURES / "grand_challenge_results.csv", "--format", "json")
    data = json.loads(out)
    groups = {(g["producer"], g["representation"]): g for g in data["groups"]}
    assert groups[("gemini-3-pro", "blocksworld")]["valid"] == 16
    assert groups[("lama", "blocksworld")]["gap_max"] == pytest.approx(8 / 108)
    assert all(f["fit"] == "insufficient data" for f in data["token_fits"])

    table = tmp_path / "t.csv"
    table.write_text("instance_id,producer,representation,c_opt,plan_length,valid\n"
                     "x,p,blocksworld,108,108,1\ny,p,blocksworld,108,116,1\n")
    code, out, _ = run(capsys, "report", "--records", table)
    assert "optimal_rate=50.0%" in out and "max=0.0741" in out
    assert run(capsys, "report", "--records", tmp_path / "nothing.jsonl")[0] == 1


def test_usage_errors_exit_2(capsys):
    with pytest.raises(SystemExit) as err:
        main(["solve"])
    assert err.value.code == 2
    with pytest.raises(SystemExit) as err:
        main(["frobnicate"])
    assert err.value.code == 2


def test_console_script_entry_point():
    done = subprocess.run([sys.executable, "-m", "pstarbench.cli", "solve", "--problem", GC],
                          capture_output=True, text=True, check=False)
    assert done.returncode == 0 and done.stdout.strip().endswith("c_opt=22 plan_len=22")
