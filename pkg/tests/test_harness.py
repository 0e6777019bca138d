import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from isac_ot import cli, io
from isac_ot.scenario import desk_config

ROOT = Path(__file__).resolve().parents[1]
CONFIG = str(ROOT / "configs" / "default.json")
GOLDEN = Path(__file__).parent / "golden"


def run(args, capsys=None):
    code = cli.main(args)
    err = capsys.readouterr().err if capsys else ""
    return code, err


@pytest.fixture(scope="module")
def both(tmp_path_factory):
    out = tmp_path_factory.mktemp("both")
    assert cli.main(["run", "--config", CONFIG, "--algo", "both", "--seed", "7", "--out", str(out)]) == 0
    return out


def test_run_both_writes_expected_files(both):
    names = {p.name for p in both.iterdir()}
    assert {"trace_aibot.csv", "trace_baseline.csv", "comparison.json", "summary_aibot.json",
            "summary_baseline.json", "config_resolved.json"} <= names


def test_summary_keys(both):
    s = json.loads((both / "summary_aibot.json").read_text())
    assert set(io.SUMMARY_KEYS) <= set(s)
    assert s["seed"] == 7 and s["algo"] == "aibot"
    assert s["config_hash"] == desk_config().config_hash()


def test_trace_header_golden(both):
    header = (GOLDEN / "trace_header.csv").read_text().strip()
    assert (both / "trace_aibot.csv").read_text().splitlines()[0] == header
    assert (both / "trace_baseline.csv").read_text().splitlines()[0] == header


def test_partition_header_golden(both):
    golden = dict(line.split(": ") for line in (GOLDEN / "other_headers.txt").read_text().splitlines())
    assert (both / "partition_aibot.csv").read_text().splitlines()[0] == golden["partition_aibot.csv"]
    header, rows = io.read_csv(both / "partition_aibot.csv")
    assert len(rows) == desk_config().sample_count
    assert {r["cell"] for r in rows} <= {"1", "2", "3"}


def test_trace_round_trip(both):
    header, rows = io.read_csv(both / "trace_aibot.csv")
    s = json.loads((both / "summary_aibot.json").read_text())
    assert len(rows) == s["iterations"]
    assert max(float(r["best_G_TOL"]) for r in rows) == s["G_TOL"]
    assert sum(float(r[f"U_{m}"]) for m in (1, 2, 3) for r in rows[-1:]) == pytest.approx(6.0)


def test_rerun_from_summary_reproduces(both, tmp_path):
    s = json.loads((both / "summary_aibot.json").read_text())
    cfg_path = tmp_path / "again.json"
    cfg_path.write_text(json.dumps(s["config"]))
    out = tmp_path / "o"
    assert cli.main(["run", "--config", str(cfg_path), "--algo", "aibot", "--out", str(out)]) == 0
    assert (out / "trace_aibot.csv").read_bytes() == (both / "trace_aibot.csv").read_bytes()


def test_repeat_is_byte_identical(both, tmp_path):
    assert cli.main(["run", "--config", CONFIG, "--algo", "both", "--seed", "7", "--out",
                     str(tmp_path)]) == 0
    for name in ("trace_aibot.csv", "trace_baseline.csv", "partition_aibot.csv"):
        assert (tmp_path / name).read_bytes() == (both / name).read_bytes()


def test_missing_config_exit_code(tmp_path, capsys):
    missing = str(tmp_path / "absent.json")
    code, err = run(["run", "--config", missing, "--out", str(tmp_path)], capsys)
    assert code == cli.EXIT_CONFIG
    payload = json.loads(err.strip().splitlines()[-1])
    assert payload["error"] == "ConfigError" and missing in payload["message"]


def test_bad_config_value_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"p_min": 2.0, "p_max": 1.0}))
    code, _ = run(["run", "--config", str(bad), "--out", str(tmp_path)], capsys)
    assert code == cli.EXIT_CONFIG


def test_infeasible_budget_exit_code(tmp_path, capsys):
    cfg = desk_config(total_power=0.002).to_dict()
    path = tmp_path / "tight.json"
    path.write_text(json.dumps(cfg))
    code, err = run(["run", "--config", str(path), "--algo", "aibot", "--out", str(tmp_path)], capsys)
    assert code == cli.EXIT_INFEASIBLE
    assert json.loads(err.strip().splitlines()[-1])["error"] == "InfeasibleBudget"


def test_literal_flags_change_config():
    cfg = cli.resolve_config(None, 3, literal_eq6=True, literal_c5=True)
    assert cfg.distance_exponent == 1 and cfg.literal_c5 and cfg.rng_seed == 3


def test_single_point_sweep_matches_run(both, tmp_path):
    assert cli.main(["sweep-rmin", "--config", CONFIG, "--seed", "7", "--rmin", "0",
                     "--out", str(tmp_path)]) == 0
    _, rows = io.read_csv(tmp_path / "sweep_rmin.csv")
    s = json.loads((both / "summary_aibot.json").read_text())
    assert float(rows[0]["G_TOL"]) == s["G_TOL"]
    assert float(rows[0]["crb_noncoop"]) == s["crb_noncoop"]
    assert float(rows[0]["R_sum_avg"]) == s["R_sum"]


def test_sweep_header_and_trend(tmp_path):
    assert cli.main(["sweep-rmin", "--config", CONFIG, "--rmin", "0,2.9e8",
                     "--out", str(tmp_path)]) == 0
    golden = dict(line.split(": ") for line in (GOLDEN / "other_headers.txt").read_text().splitlines())
    assert (tmp_path / "sweep_rmin.csv").read_text().splitlines()[0] == golden["sweep_rmin.csv"]
    _, rows = io.read_csv(tmp_path / "sweep_rmin.csv")
    crb = [float(r["crb_noncoop"]) for r in rows]
    assert crb[1] >= crb[0]


def test_all_infeasible_sweep(tmp_path, capsys):
    code, err = run(["sweep-rmin", "--config", CONFIG, "--rmin", "1e12 2e12",
                     "--out", str(tmp_path)], capsys)
    assert code == 0
    _, rows = io.read_csv(tmp_path / "sweep_rmin.csv")
    assert [r["feasible"] for r in rows] == ["0", "0"]
    assert json.loads(err.strip().splitlines()[-1])["count"] == 2


def test_sweep_rejects_decreasing(tmp_path, capsys):
    code, _ = run(["sweep-rmin", "--rmin", "2,1", "--out", str(tmp_path)], capsys)
    assert code == cli.EXIT_CONFIG


def test_parallel_sweep_matches_serial():
    cfg = desk_config(sample_count=2000)
    assert cli.sweep_rmin(cfg, [0.0, 2.9e8], jobs=2) == cli.sweep_rmin(cfg, [0.0, 2.9e8])


def test_convergence_output(tmp_path):
    assert cli.main(["convergence", "--config", CONFIG, "--out", str(tmp_path)]) == 0
    golden = dict(line.split(": ") for line in (GOLDEN / "other_headers.txt").read_text().splitlines())
    assert (tmp_path / "convergence.csv").read_text().splitlines()[0] == golden["convergence.csv"]
    _, rows = io.read_csv(tmp_path / "convergence.csv")
    s = {a: json.loads((tmp_path / f"summary_{a}.json").read_text()) for a in ("aibot", "baseline")}
    assert sum(r["algo"] == "aibot" for r in rows) == s["aibot"]["iterations"]
    assert sum(r["algo"] == "baseline" for r in rows) == 1
    aibot_g = [float(r["G_TOL"]) for r in rows if r["algo"] == "aibot"]
    assert max(aibot_g) > s["baseline"]["G_TOL"]


def test_multi_slot_trace(tmp_path):
    cfg = desk_config(N=2, sample_count=2000).to_dict()
    path = tmp_path / "two.json"
    path.write_text(json.dumps(cfg))
    assert cli.main(["run", "--config", str(path), "--algo", "baseline", "--out", str(tmp_path)]) == 0
    _, rows = io.read_csv(tmp_path / "trace_baseline.csv")
    assert [r["slot"] for r in rows] == ["0", "1"]


def test_float_formatting_round_trips():
    x = 0.1 + 0.2
    assert float(io.fmt(x)) == x
    assert io.fmt(True) == "1" and io.fmt(np.int64(4)) == "4"


def test_console_script_entry(tmp_path):
    res = subprocess.run([sys.executable, "-m", "isac_ot.cli", "run", "--config",
                          str(tmp_path / "none.json"), "--out", str(tmp_path)],
                         capture_output=True, text=True)
    assert res.returncode == 2
    assert "none.json" in res.stderr
