import json
import subprocess
import sys

import pytest

from polarcm.cli import main
from polarcm.harness import read_csv

CFG = {
    "version": "v1",
    "scheme": {"kind": "bicm", "n_sym": 16, "constellation": {"type": "ask", "m": 1}},
    "construction": {"estimator": "bec", "design_snr_db": 2.0, "k": 8},
    "snr": {"points": [1.0, 3.0]},
    "stopping": {"min_frame_errors": 10, "max_frames": 500},
}


@pytest.fixture
def cfg_file(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps(CFG))
    return path


def test_simulate_writes_csv(cfg_file, tmp_path, capsys):
    out = tmp_path / "r.csv"
    assert main(["simulate", "--config", str(cfg_file), "--output", str(out)]) == 0
    res = read_csv(out)
    assert [p.snr_db for p in res.points] == [1.0, 3.0]
    assert "FER=" in capsys.readouterr().out


def test_simulate_flags_override(cfg_file, tmp_path):
    out = tmp_path / "r.csv"
    argv = ["simulate", "--config", str(cfg_file), "--output", str(out), "--snr", "50",
            "--max-frames", "40", "--seed", "3", "--k", "4"]
    assert main(argv) == 0
    (p,) = read_csv(out).points
    assert (p.snr_db, p.frames, p.info_bits, p.frame_errors) == (50.0, 40, 160, 0)
    assert read_csv(out).config["master_seed"] == 3


def test_simulate_workers_flag_keeps_counters(cfg_file, tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["simulate", "--config", str(cfg_file), "--output", str(a)]) == 0
    assert main(["simulate", "--config", str(cfg_file), "--output", str(b), "--workers", "2"]) == 0
    assert read_csv(a).counters() == read_csv(b).counters()
    assert read_csv(a).config_digest == read_csv(b).config_digest


def test_missing_config_exits_2(tmp_path, capsys):
    missing = tmp_path / "absent.json"
    assert main(["simulate", "--config", str(missing)]) == 2
    assert str(missing) in capsys.readouterr().err


def test_invalid_config_exits_2(tmp_path, capsys):
    path = tmp_path / "c.json"
    bad = dict(CFG, stopping={"min_frame_errors": 0})
    path.write_text(json.dumps(bad))
    assert main(["simulate", "--config", str(path)]) == 2
    assert "stopping.min_frame_errors" in capsys.readouterr().err


def test_unwritable_output_exits_1(cfg_file, tmp_path, capsys):
    out = tmp_path / "no" / "such" / "r.csv"
    assert main(["simulate", "--config", str(cfg_file), "--output", str(out)]) == 1
    assert "error" in capsys.readouterr().err


@pytest.mark.parametrize("argv", [["frobnicate"], [], ["simulate", "--bogus"], ["construct", "--m", "x"]])
def test_usage_errors_exit_2(argv):
    with pytest.raises(SystemExit) as info:
        main(argv)
    assert info.value.code == 2


def test_equivalence_subcommand(capsys):
    assert main(["equivalence", "--n-sym", "64", "--k", "64", "--trials", "1000", "--seed", "7"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["decisions_equal"] == 1000
    assert report["trials_run"] == 1000
    assert report["max_llr_gap"] <= 1e-6
    assert report["label_identity_ok"] is True


def test_construct_json(capsys):
    argv = ["construct", "--scheme", "mlc", "--constellation", "qam", "--m", "2", "--n-sym", "8",
            "--k", "6", "--estimator", "ga", "--design-snr", "4"]
    assert main(argv) == 0
    doc = json.loads(capsys.readouterr().out)
    assert sum(doc["k_per_level"]) == 6
    masks = doc["frozen_masks"]
    assert len(masks) == 2 and all(len(m) == 8 for m in masks)
    assert sum(m.count(False) for m in masks) == 6


def test_construct_to_file(cfg_file, tmp_path):
    out = tmp_path / "c.json.out"
    assert main(["construct", "--config", str(cfg_file), "--output", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["k_per_level"] == [8]


def test_construct_needs_size():
    assert main(["construct", "--k", "4"]) == 2


def test_info(capsys):
    argv = ["info", "--scheme", "bicm", "--constellation", "qam", "--m", "4", "--n-sym", "64", "--k", "128"]
    assert main(argv) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["kind"] == "bicm" and doc["k_per_level"] == [128]
    assert doc["bits_per_symbol"] == pytest.approx(2.0)
    assert doc["backend"] in ("cython", "python")


def test_info_rejects_k_above_length():
    assert main(["info", "--n-sym", "4", "--k", "99"]) == 2


def test_module_entry_point(cfg_file):
    proc = subprocess.run([sys.executable, "-m", "polarcm", "info", "--config", str(cfg_file)],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0, proc.stderr
    assert json.loads(proc.stdout)["k_per_level"] == [8]
    proc = subprocess.run([sys.executable, "-m", "polarcm", "nope"], capture_output=True, text=True)
    assert proc.returncode == 2 and "usage" in proc.stderr
