import json
import subprocess
import sys

import pytest
from click.testing import CliRunner

from pushpull.cli import main

E1_DOC = {
    "schema_version": 1,
    "catalog": ["o0", "o1", "o2"],
    "partition": [["o0"], ["o1"], ["o2"]],
    "types": ["t0"],
    "prior": [1.0],
    "agent_u": {"t0": [3, 1, 2]},
    "advocate_v": {"t0": [0, 4, 0]},
    "discount": {"kind": "custom", "params": {"weights": [1, 0.5, 0]}},
    "signal_model": None,
}

E1_LOG = (
    "user_id,group_label,object_id,block_id,agent_score,advocate_score\n"
    "u1,A,o0,b0,3,0\n"
    "u1,A,o1,b1,1,4\n"
    "u1,A,o2,b2,2,0\n"
)


@pytest.fixture()
def runner():
    return CliRunner()


@pytest.fixture()
def e1_path(tmp_path):
    path = tmp_path / "e1.json"
    path.write_text(json.dumps(E1_DOC))
    return str(path)


def test_gen_writes_deterministic_document(runner, tmp_path):
    args = ["gen", "--kind", "random", "--seed", "5", "-M", "8", "-K", "3", "-T", "2", "-S", "2"]
    a = runner.invoke(main, args)
    b = runner.invoke(main, args)
    assert a.exit_code == 0, a.output
    assert a.output == b.output
    doc = json.loads(a.output)
    assert doc["schema_version"] == 1
    assert len(doc["catalog"]) == 8


def test_gen_kind_flag_accepts_hyphenated_name(runner):
    out = runner.invoke(main, ["gen", "--kind", "anti-aligned", "--seed", "1", "-M", "6", "-K", "2"])
    assert out.exit_code == 0, out.output
    doc = json.loads(out.stdout)
    agent = doc["agent_u"]
    advocate = doc["advocate_v"]
    for t, row in agent.items():
        paired = [a + b for a, b in zip(row, advocate[t])]
        assert all(abs(x - paired[0]) < 1e-12 for x in paired)


def test_gen_preset(runner):
    out = runner.invoke(main, ["gen", "--kind", "preset", "--preset", "matching", "--seed", "3"])
    assert out.exit_code == 0, out.output
    doc = json.loads(out.stdout)
    assert len(doc["catalog"]) == 30
    assert doc["discount"]["kind"] == "cutoff"


def test_validate_accepts_good_file(runner, e1_path):
    out = runner.invoke(main, ["validate", e1_path])
    assert out.exit_code == 0, out.output
    doc = json.loads(out.stdout)
    assert doc["report"]["invalid"] == 0
    assert doc["report"]["files"][0]["oracle_checked"] is True


def test_validate_lists_all_violations_and_exits_2(runner, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"schema_version": 1, "catalog": ["a", "a"], "types": ["t"], "prior": [2.0]}))
    out = runner.invoke(main, ["validate", str(bad)])
    assert out.exit_code == 2
    doc = json.loads(out.stdout)
    violations = doc["report"]["files"][0]["violations"]
    assert len(violations) >= 3
    assert str(bad) in out.stderr


def test_solve_json_matches_hand_solution(runner, e1_path):
    out = runner.invoke(main, ["solve", e1_path, "--lambda", "0.5"])
    assert out.exit_code == 0, out.output
    doc = json.loads(out.stdout)
    assert doc["kind"] == "solve"
    assert doc["report"]["objective"] == 3.25
    assert doc["report"]["ranking"] == ["o1", "o0", "o2"]


def test_solve_csv_ranking(runner, e1_path):
    out = runner.invoke(main, ["solve", e1_path, "--lambda", "1", "--format", "csv"])
    assert out.exit_code == 0, out.output
    lines = out.stdout.strip().split("\n")
    assert lines[0] == "position,object_id,block_index"
    assert lines[1] == "0,o0,0"
    assert lines[2] == "1,o2,2"


def test_solve_rejects_lambda_out_of_range(runner, e1_path):
    out = runner.invoke(main, ["solve", e1_path, "--lambda", "1.5"])
    assert out.exit_code == 2


def test_solve_strategy_contract_violation_exits_3(runner, e1_path):
    out = runner.invoke(main, ["solve", e1_path, "--lambda", "0.5", "--strategy", "geometric_index"])
    assert out.exit_code == 3


def test_unknown_subcommand_exits_2_with_usage(runner):
    out = runner.invoke(main, ["transmogrify"])
    assert out.exit_code == 2
    assert "Usage" in out.output or "No such command" in out.output


def test_metrics_csv_single_row(runner, e1_path):
    out = runner.invoke(main, ["metrics", e1_path, "--lambda", "0.5", "--format", "csv"])
    assert out.exit_code == 0, out.output
    lines = out.stdout.strip().split("\n")
    assert lines[0].startswith("lambda,U_lambda")
    assert lines[1] == "0.5,2.5,4,6.5,0.625,1,false,false"


def test_frontier_csv_default_format(runner, e1_path):
    out = runner.invoke(main, ["frontier", e1_path, "--grid", "0:1:3"])
    assert out.exit_code == 0, out.output
    lines = out.stdout.strip().split("\n")
    assert len(lines) == 4
    assert lines[2].split(",")[4] == "0.625"


def test_frontier_json_includes_critical_lambda(runner, e1_path):
    out = runner.invoke(main, ["frontier", e1_path, "--grid", "0:1:5", "--format", "json"])
    assert out.exit_code == 0, out.output
    doc = json.loads(out.stdout)
    assert "critical_lambda" in doc["report"]
    assert len(doc["report"]["points"]) == 5


def test_frontier_bad_grid_exits_2(runner, e1_path):
    out = runner.invoke(main, ["frontier", e1_path, "--grid", "0-1-5"])
    assert out.exit_code == 2


def test_refine_compare_singletonize_default(runner, tmp_path):
    doc = dict(E1_DOC)
    doc["partition"] = [["o0", "o1", "o2"]]
    path = tmp_path / "coarse.json"
    path.write_text(json.dumps(doc))
    out = runner.invoke(main, ["refine-compare", str(path), "--grid", "0:1:5", "--format", "csv"])
    assert out.exit_code == 0, out.output
    lines = out.stdout.strip().split("\n")
    assert lines[0] == "lambda,base_objective,refined_objective,delta"
    deltas = [float(line.split(",")[3]) for line in lines[1:]]
    assert all(d >= 0 for d in deltas)
    assert deltas[-1] > 0  # order (o0,o1,o2) is forced, sort finds (o0,o2,o1)


def test_refine_compare_split_spec(runner, tmp_path):
    doc = dict(E1_DOC)
    doc["partition"] = [["o0", "o1", "o2"]]
    path = tmp_path / "coarse.json"
    path.write_text(json.dumps(doc))
    out = runner.invoke(main, ["refine-compare", str(path), "--split", "0:1", "--grid", "0:1:3", "--format", "json"])
    assert out.exit_code == 0, out.output
    doc = json.loads(out.stdout)
    assert all(p["delta"] >= 0 for p in doc["report"]["points"])


def test_noise_sweep_requires_signal_model(runner, e1_path):
    out = runner.invoke(main, ["noise-sweep", e1_path])
    assert out.exit_code == 2


def test_noise_sweep_csv(runner, tmp_path):
    gen = runner.invoke(main, ["gen", "--kind", "random", "--seed", "8", "-M", "6", "-K", "2", "-T", "3", "-S", "3", "--out", str(tmp_path / "i.json")])
    assert gen.exit_code == 0, gen.output
    out = runner.invoke(main, ["noise-sweep", str(tmp_path / "i.json"), "--epsilons", "0,0.5,1", "--format", "csv"])
    assert out.exit_code == 0, out.output
    lines = out.stdout.strip().split("\n")
    assert lines[0] == "epsilon,avg_U1,avg_V0"
    assert len(lines) == 4
    u1s = [float(line.split(",")[1]) for line in lines[1:]]
    assert u1s == sorted(u1s, reverse=True)


def test_ingest_then_aggregate_pipeline(runner, tmp_path):
    log = tmp_path / "log.csv"
    log.write_text(E1_LOG + "u2,B,o0,b0,3,0\nu2,B,o1,b1,1,4\nu2,B,o2,b2,2,0\n")
    users_csv = tmp_path / "users.csv"
    out = runner.invoke(
        main,
        ["ingest", str(log), "--discount", "custom", "--weights", "1,0.5,0", "--lambda", "0.5", "--out", str(users_csv)],
    )
    assert out.exit_code == 0, out.output
    lines = users_csv.read_text().strip().split("\n")
    assert lines[0].startswith("user_id,group_label,lambda")
    assert lines[1] == "u1,A,0.5,2.5,4,6.5,0.625,1,false,false"
    agg = runner.invoke(main, ["aggregate", str(users_csv)])
    assert agg.exit_code == 0, agg.output
    doc = json.loads(agg.output)
    assert doc["report"]["count"] == 2
    assert doc["report"]["pull"]["mean"] == 0.625
    assert doc["report"]["pull"]["variance"] == 0


def test_ingest_duplicate_rows_exit_2(runner, tmp_path):
    log = tmp_path / "log.csv"
    log.write_text(E1_LOG + "u1,A,o0,b0,3,0\n")
    out = runner.invoke(main, ["ingest", str(log)])
    assert out.exit_code == 2


def test_summary_goes_to_stderr_not_stdout(runner, e1_path):
    out = runner.invoke(main, ["metrics", e1_path, "--lambda", "0.5", "--format", "csv", "--summary"])
    assert out.exit_code == 0
    assert "pull=" not in out.stdout
    assert "pull=" in out.stderr


def test_module_entry_point_runs():
    proc = subprocess.run(
        [sys.executable, "-m", "pushpull", "--help"],
        capture_output=True,
        text=True,
        timeout=60,
    )
    assert proc.returncode == 0
    for name in ("gen", "validate", "solve", "frontier", "metrics", "refine-compare", "noise-sweep", "ingest", "aggregate"):
        assert name in proc.stdout
