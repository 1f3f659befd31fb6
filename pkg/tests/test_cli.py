import csv
import hashlib
import json
import math
from pathlib import Path

import numpy as np
import pytest

from bellsim.cli import main

ANGLES = {"x": 0.0, "xp": math.pi / 4, "y": math.pi / 8, "yp": 3 * math.pi / 8}

# Ten hand-written windows across the four grid pairs.  By hand:
#   (x,y):   outcomes (1,1), (1,-1), (-1,-1), (0,0)  -> E = 1/3 over n=3
#   (x,yp):  (1,1), (0,-1)                           -> E = 1   over n=1
#   (xp,y):  (-1,1)                                  -> E = -1  over n=1
#   (xp,yp): (1,1), (1,1), (-1,1)                    -> E = 1/3 over n=3
# CHSH: total = 2/3; max over minus placements = |2/3 + 2| = 8/3.
GOLDEN_ROWS = [
    (0, "x", "y", 1, 1),
    (1, "x", "y", 1, -1),
    (2, "x", "y", -1, -1),
    (3, "x", "yp", 1, 1),
    (4, "x", "yp", 0, -1),
    (5, "xp", "y", -1, 1),
    (6, "xp", "yp", 1, 1),
    (7, "xp", "yp", 1, 1),
    (8, "x", "y", 0, 0),
    (9, "xp", "yp", -1, 1),
]


def write_golden_log(path: Path) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["window", "setting_a", "setting_b", "a", "b", "delay_a", "delay_b"])
        for w, sa, sb, a, b in GOLDEN_ROWS:
            writer.writerow([w, sa, sb, a, b, "0.0", "0.0"])
    meta = {
        "seed": 0,
        "n": len(GOLDEN_ROWS),
        "window": 1.0,
        "schedule": {
            "mode": "fast",
            "pairs": [
                {"setting_a": a, "angle_a": ANGLES[a],
                 "setting_b": b, "angle_b": ANGLES[b], "weight": 0.25}
                for a in ("x", "xp") for b in ("y", "yp")
            ],
        },
        "model": {"family": "fixture"},
        "backend": "fixture",
    }
    path.with_name(path.stem + ".meta.json").write_text(json.dumps(meta))


def test_simulate_row_count_and_determinism(tmp_path):
    out1 = tmp_path / "a.csv"
    out2 = tmp_path / "b.csv"
    base = ["simulate", "coincidence", "--d", "4", "--t0", "1",
            "--w", "0.5", "--n", "5000", "--seed", "42"]
    assert main(base + ["--out", str(out1)]) == 0
    assert main(base + ["--out", str(out2)]) == 0
    assert sum(1 for _ in out1.open()) == 5001  # header + one row per window
    h1 = hashlib.sha256(out1.read_bytes()).hexdigest()
    h2 = hashlib.sha256(out2.read_bytes()).hexdigest()
    assert h1 == h2


def test_simulate_worker_invariance(tmp_path):
    digests = set()
    for workers in (1, 4, 8):
        out = tmp_path / f"w{workers}.csv"
        rc = main([
            "simulate", "coincidence", "--w", "0.01", "--n", "20000",
            "--seed", "7", "--workers", str(workers), "--out", str(out),
        ])
        assert rc == 0
        digests.add(hashlib.sha256(out.read_bytes()).hexdigest())
    assert len(digests) == 1


def test_simulate_missing_model_file(tmp_path, capsys):
    rc = main(["simulate", "missing.json", "--w", "1", "--n", "10",
               "--seed", "1", "--out", str(tmp_path / "x.csv")])
    assert rc == 2
    assert "not found" in capsys.readouterr().err


def test_simulate_io_failure_exit_code(tmp_path):
    target = tmp_path / "adir"
    target.mkdir()
    rc = main(["simulate", "coincidence", "--w", "1", "--n", "10",
               "--seed", "1", "--out", str(target)])
    assert rc == 3


def test_analyze_golden_fixture(tmp_path):
    log = tmp_path / "golden.csv"
    write_golden_log(log)
    report_path = tmp_path / "report.json"
    assert main(["analyze", str(log), "--out", str(report_path)]) == 0
    report = json.loads(report_path.read_text())

    by_pair = {(e["setting_a"], e["setting_b"]): e for e in report["pairs"]}
    assert by_pair[("x", "y")]["n_windows"] == 4
    assert by_pair[("x", "y")]["n_coincidences"] == 3
    assert by_pair[("x", "y")]["correlation"]["e"] == pytest.approx(1 / 3, abs=1e-12)
    assert by_pair[("x", "yp")]["correlation"]["e"] == pytest.approx(1.0, abs=1e-12)
    assert by_pair[("xp", "y")]["correlation"]["e"] == pytest.approx(-1.0, abs=1e-12)
    assert by_pair[("xp", "yp")]["correlation"]["e"] == pytest.approx(1 / 3, abs=1e-12)
    # Singles for wing A at x over windows 0,1,2,3,4,8: values 1,1,-1,1,0,0.
    singles = by_pair[("x", "y")]["singles_a"]
    assert singles["-1"]["freq"] == pytest.approx(1 / 6, abs=1e-12)
    assert singles["0"]["freq"] == pytest.approx(2 / 6, abs=1e-12)
    assert singles["1"]["freq"] == pytest.approx(3 / 6, abs=1e-12)
    assert report["chsh"]["value"] == pytest.approx(8 / 3, abs=1e-12)


def test_analyze_single_pair_warns_and_omits_chsh(tmp_path):
    out = tmp_path / "one.csv"
    rc = main(["simulate", "singlet", "--angles", "0,0.785398,0.392699,1.178097",
               "--w", "1", "--n", "400", "--seed", "3", "--out", str(out)])
    assert rc == 0
    # Rewrite the log keeping only one pair's windows.
    lines = out.read_text().splitlines()
    kept = [lines[0]] + [ln for ln in lines[1:] if ",x,y," in ln]
    single = tmp_path / "single.csv"
    single.write_text("\n".join(kept) + "\n")
    meta = json.loads((tmp_path / "one.meta.json").read_text())
    meta["schedule"]["pairs"] = [p for p in meta["schedule"]["pairs"]
                                 if (p["setting_a"], p["setting_b"]) == ("x", "y")]
    (tmp_path / "single.meta.json").write_text(json.dumps(meta))
    report_path = tmp_path / "single.json"
    assert main(["analyze", str(single), "--out", str(report_path)]) == 0
    report = json.loads(report_path.read_text())
    assert report["chsh"] is None
    assert any("grid" in w for w in report["warnings"])


def test_analyze_empty_log_exits_2(tmp_path, capsys):
    log = tmp_path / "empty.csv"
    write_golden_log(log)
    log.write_text("window,setting_a,setting_b,a,b,delay_a,delay_b\n")
    rc = main(["analyze", str(log), "--out", str(tmp_path / "r.json")])
    assert rc == 2


def test_analyze_malformed_row_exits_2_with_line(tmp_path, capsys):
    log = tmp_path / "bad.csv"
    write_golden_log(log)
    lines = log.read_text().splitlines()
    lines[2] = "1,x,y,maybe,1,0.0,0.0"
    log.write_text("\n".join(lines) + "\n")
    rc = main(["analyze", str(log), "--out", str(tmp_path / "r.json")])
    assert rc == 2
    assert ":3:" in capsys.readouterr().err


def test_sweep_monotone_and_flags(tmp_path):
    out = tmp_path / "sweep.csv"
    rc = main(["sweep", "coincidence", "--d", "4", "--t0", "1", "--n", "200000",
               "--seed", "11", "--windows", "1.0,0.1,0.01,0.001", "--out", str(out)])
    assert rc == 0
    rows = list(csv.DictReader(out.open()))
    fracs = [float(r["coincidence_fraction"]) for r in rows]
    assert fracs == sorted(fracs, reverse=True)
    assert fracs[0] > fracs[-1]
    first = rows[0]
    assert float(first["s"]) <= 2.0 + 4 * float(first["se_s"])
    last = rows[-1]
    assert float(last["s"]) > 2.0


def test_inequality_from_moments_json(tmp_path):
    moments = tmp_path / "m.json"
    moments.write_text(json.dumps({"es": [0.7, -0.7, 0.7, 0.7], "ses": [0.01] * 4}))
    out = tmp_path / "res.json"
    assert main(["inequality", str(moments), "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["name"] == "CHSH"
    assert doc["value"] == pytest.approx(2.8, abs=1e-12)
    assert doc["bound"] == 2
    assert doc["violates"] is True


def test_inequality_from_counts_csv(tmp_path):
    log = tmp_path / "run.csv"
    counts = tmp_path / "counts.csv"
    assert main(["simulate", "coincidence", "--w", "0.01", "--n", "100000",
                 "--seed", "2", "--out", str(log), "--counts", str(counts)]) == 0
    out = tmp_path / "chsh.json"
    assert main(["inequality", str(counts), "--out", str(out)]) == 0
    assert json.loads(out.read_text())["value"] > 2.0
    out_j = tmp_path / "eberhard.json"
    assert main(["inequality", str(counts), "--form", "eberhard", "--out", str(out_j)]) == 0
    assert json.loads(out_j.read_text())["value"] <= 0.0


def test_feasibility_triple_infeasible(tmp_path, capsys):
    moments = tmp_path / "tri.json"
    moments.write_text(json.dumps({"triple": [-1, -1, -1]}))
    out = tmp_path / "verdict.json"
    assert main(["feasibility", str(moments), "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["verdict"] == "infeasible"
    assert doc["conditions_satisfiable"] is False


def test_bayes_demo_prints_exact_values(capsys):
    assert main(["bayes-demo"]) == 0
    out = capsys.readouterr().out
    assert "1/3" in out
    assert "1/2" in out


def test_bayes_demo_json_document(tmp_path):
    out = tmp_path / "bayes.json"
    assert main(["bayes-demo", "--json", "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["balls"]["p_big_given_red"] == "1/3"
    assert doc["balls"]["p_red_given_big"] == "1/2"
    assert doc["freedom"]["all_posteriors_one"] is True
    assert doc["measurement_independence"]["independent"] is False


def test_compare_schedules_cli(tmp_path):
    out = tmp_path / "cmp.json"
    rc = main(["compare-schedules", "singlet", "--n", "40000", "--w", "1.0",
               "--seed", "9", "--out", str(out)])
    assert rc == 0
    doc = json.loads(out.read_text())
    assert doc["p_value"] > 0.001
    assert all(abs(r["z"]) < 4 for r in doc["pairs"])


def test_config_file_supplies_defaults_and_flags_override(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"n": 300, "seed": 5, "w": 1.0}))
    out = tmp_path / "cfg_run.csv"
    rc = main(["--config", str(cfg), "simulate", "coincidence",
               "--n", "120", "--out", str(out)])
    assert rc == 0
    assert sum(1 for _ in out.open()) == 121  # flag --n overrides config n
    meta = json.loads((tmp_path / "cfg_run.meta.json").read_text())
    assert meta["seed"] == 5  # seed came from the config file
