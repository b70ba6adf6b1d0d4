import csv
import io
import json
import subprocess
import sys

import pytest

from mechlab.cli import main
from mechlab.mechanism import BUILTIN_NAMES, builtin
from mechlab.schema import dump_mechanism


def run(*argv):
    out = io.StringIO()
    code = main(list(argv), out)
    return code, out.getvalue()


@pytest.mark.parametrize("name", BUILTIN_NAMES)
def test_show_mechanism_builtin(name, golden):
    assert run("show-mechanism", "--name", name) == (0, golden(f"render_{name}.txt"))


def test_show_mechanism_from_file(tmp_path, golden):
    path = tmp_path / "m.json"
    path.write_text(dump_mechanism(builtin("3x3-E")))
    assert run("show-mechanism", "--file", str(path)) == (0, golden("render_3x3-E.txt"))


def test_show_mechanism_malformed_file(tmp_path, capsys):
    path = tmp_path / "malformed.txt"
    path.write_text("{\n  not json\n")
    code, _ = run("show-mechanism", "--file", str(path))
    assert code == 1
    assert "line 2, column 3" in capsys.readouterr().err


def test_missing_file_is_a_domain_failure(capsys):
    assert run("show-mechanism", "--file", "/nonexistent/m.json")[0] == 1


def test_usage_errors_exit_2():
    for argv in (["show-mechanism"], ["show-mechanism", "--name", "9x9"], ["verify-prop1", "--trials", "0"],
                 ["equilibria", "--name", "2x2-I", "--bogus"], ["nonsense"]):
        with pytest.raises(SystemExit) as exc:
            main(argv, io.StringIO())
        assert exc.value.code == 2


def test_help_lists_flags(capsys):
    with pytest.raises(SystemExit):
        main(["simulate", "--help"])
    text = capsys.readouterr().out
    for flag in ("--config", "--seed", "--out", "--workers"):
        assert flag in text


def test_equilibria_text_2x2_i():
    code, text = run("equilibria", "--name", "2x2-I")
    assert code == 0
    assert "w1[B->A E->B] w2[B->A E->B]\n    flags: ex-post, dominant-strategy" in text
    assert "w1[B->B E->B] w2[B->B E->B]\n    flags: ex-post, dominant-strategy" in text


def test_equilibria_csv_3x3_e(golden):
    code, text = run("equilibria", "--name", "3x3-E", "--format", "csv")
    rows = list(csv.DictReader(io.StringIO(text)))
    assert code == 0 and len(rows) == 6
    all_e = next(r for r in rows if r["profile"] == "w1[B->E E->E] w2[B->E E->E]")
    assert all_e["ex_post"] == "1" and all_e["dominant_strategy"] == "0"
    assert all_e["induced_scf"].count("(H,M),(H,M)") == 4


def test_equilibria_counts_match_golden(golden):
    for line in golden("equilibrium_counts.txt").splitlines():
        if line and not line.startswith("#"):
            name, n, dom = line.split()
            rows = list(csv.DictReader(io.StringIO(run("equilibria", "--name", name, "--format", "csv")[1])))
            assert len(rows) == int(n)
            assert sum(r["dominant_strategy"] == "1" for r in rows) == int(dom)


def test_verify_composition_command():
    code, text = run("verify-prop1", "--trials", "200", "--seed", "7")
    assert code == 0
    assert text.startswith("trial 0 (laboratory instance")
    assert "seed 7: PASS, 200/200" in text


def test_simulate_lab_preset(tmp_path):
    out = tmp_path / "data.csv"
    code, text = run("simulate", "--out", str(out), "--seed", "3")
    assert code == 0
    assert "seed: 3" in text and "sessions: 14" in text and "subjects: 159" in text
    meta = json.loads((tmp_path / "data.csv.meta.json").read_text())
    assert meta["seed"] == 3 and len(meta["sessions"]) == 14


def test_simulate_rejects_bad_config(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"grid": [{"mechanism": "2x2-I", "sizes": [10]}]}))
    code, _ = run("simulate", "--config", str(cfg), "--out", str(tmp_path / "x.csv"))
    assert code == 1
    assert "multiple of 3" in capsys.readouterr().err
    assert not (tmp_path / "x.csv").exists()


def test_simulate_is_byte_identical(tmp_path):
    paths = [tmp_path / f"{k}.csv" for k in range(3)]
    run("simulate", "--out", str(paths[0]), "--seed", "9")
    run("simulate", "--out", str(paths[1]), "--seed", "9")
    run("simulate", "--out", str(paths[2]), "--seed", "9", "--workers", "3")
    assert paths[0].read_bytes() == paths[1].read_bytes() == paths[2].read_bytes()


def test_analyze_writes_tables(tmp_path):
    data = tmp_path / "d.csv"
    run("simulate", "--out", str(data))
    code, text = run("analyze", "--data", str(data), "--out", str(tmp_path / "out"))
    assert code == 0 and "VARIABLES" in text
    for name in ("regressions.txt", "coefficients.csv", "summary_rates.csv", "expert_claims_histogram.csv",
                 "expert_claims_by_subject.csv", "rank_tests.csv"):
        assert (tmp_path / "out" / name).exists()


def test_analyze_truthful_model_on_truthteller_data(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"population": {"truthteller": 1.0, "coordinator": 0.0, "lie_averse": 0.0,
                                              "epsilon": 0.0}}))
    data = tmp_path / "d.csv"
    assert run("simulate", "--config", str(cfg), "--out", str(data))[0] == 0
    code, _ = run("analyze", "--data", str(data), "--model", "eq-truth", "--out", str(tmp_path / "o"))
    assert code == 0
    rows = list(csv.DictReader(open(tmp_path / "o" / "coefficients.csv")))
    mech = [r for r in rows if r["term"].endswith("mechanism")]
    assert len(mech) == 3 and all(float(r["coef"]) == 0.0 for r in mech)


def test_analyze_reports_schema_column(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("session,period,group,mechanism,subject,role,true_type,message,lie_flag,payoff,practice,paid\n"
                   "1,1,1,2x2-I,1,worker,B,A,0,2,maybe,0\n1,1,1,2x2-I,2,worker,B,A,0,2,1,0\n"
                   "1,1,1,2x2-I,3,staffer,,,,5,1,0\n")
    code, _ = run("analyze", "--data", str(bad), "--out", str(tmp_path / "o"))
    assert code == 1
    assert "column practice" in capsys.readouterr().err


def test_report():
    code, text = run("report")
    assert code == 0
    assert "strategy-proof: True" in text and "expected total under a uniform prior: 11" in text


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "mechlab.cli", "show-mechanism", "--name", "2x2-E"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.startswith("mechanism: 2x2-E")
