import csv
import json

import pytest

from tapalab.cli import DecayConfig, GradConfig, HistConfig, build_config, main
from tapalab.exceptions import ConfigurationError

SMALL_HIST = ["--set", "D=16", "--set", "n_pairs=2000", "--set", "bins=20"]
SMALL_DECAY = ["--set", "n_samples=5000", "--set", "distances=0,1,8,64,512"]


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_config_file_and_overrides(tmp_path):
    cfg_path = tmp_path / "run.cfg"
    cfg_path.write_text("# comment\nn_pairs = 3000\nshort_range = 0, 50\nencodings = rope\n")
    cfg = build_config(HistConfig, cfg_path, ["bins=12"], seed=5, workers=2)
    assert (cfg.n_pairs, cfg.short_range, cfg.encodings, cfg.bins, cfg.seed, cfg.workers) == (
        3000, (0, 50), ("rope",), 12, 5, 2)
    with pytest.raises(ConfigurationError, match="unknown config key"):
        build_config(GradConfig, None, ["nonsense=1"])
    with pytest.raises(ConfigurationError):
        build_config(GradConfig, None, ["trials=abc"])
    with pytest.raises(ConfigurationError):
        build_config(DecayConfig, None, ["encodings=rope,alibi"])
    with pytest.raises(ConfigurationError):
        build_config(GradConfig, tmp_path / "missing.cfg")


def test_verify_only_lemma1(tmp_path):
    assert main(["verify", "--only", "lemma1", "--out", str(tmp_path)]) == 0
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["pass"] is True
    assert {c["name"] for c in report["checks"]} == {"lemma1_C", "lemma1_S"}
    for c in report["checks"]:
        assert set(c) == {"name", "params", "lhs", "rhs", "margin", "pass"}
    assert _rows(tmp_path / "checks.csv")[0] == ["name", "lhs", "rhs", "margin", "pass"]


def test_verify_bad_theta0_is_usage_error(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("lemma_theta0s = 0.2, 1e-4\n")
    assert main(["verify", "--config", str(cfg), "--out", str(tmp_path)]) == 2
    assert "θ0 < 1/10" in capsys.readouterr().err


@pytest.mark.parametrize("argv", [
    ["verify", "--only", "nothing"],
    ["verify", "--seed", "-1"],
    ["verify", "--seed", str(2**64)],
    ["verify", "--format", "pdf"],
    ["verify", "--set", "workers=0"],
    ["frobnicate"],
    [],
])
def test_usage_errors_exit_2(tmp_path, argv):
    assert main(argv + ["--out", str(tmp_path)] if argv else argv) == 2


def test_bias_hist_files_and_determinism(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["bias-hist", "--out", str(a), "--seed", "3"] + SMALL_HIST) == 0
    assert main(["bias-hist", "--out", str(b), "--seed", "3", "--workers", "4"] + SMALL_HIST) == 0
    csvs = sorted(p.name for p in a.glob("*.csv"))
    assert csvs == ["hist_rope.csv", "hist_summary.csv", "hist_tapa.csv"]
    assert [p.name for p in a.glob("*.svg")] == ["hist.svg"]
    for p in a.iterdir():
        assert p.read_bytes() == (b / p.name).read_bytes()
    assert _rows(a / "hist_rope.csv")[0] == ["bin_left", "bin_right", "count"]
    assert _rows(a / "hist_summary.csv")[0] == ["encoding", "mean", "std", "n"]
    assert sum(int(r[2]) for r in _rows(a / "hist_tapa.csv")[1:]) == 2000


def test_bias_hist_only_and_formats(tmp_path):
    assert main(["bias-hist", "--out", str(tmp_path), "--only", "rope", "--format", "csv"] + SMALL_HIST) == 0
    assert sorted(p.name for p in tmp_path.iterdir()) == ["hist_rope.csv", "hist_summary.csv"]


def test_decay_outputs(tmp_path):
    assert main(["decay", "--out", str(tmp_path)] + SMALL_DECAY) == 0
    rows = _rows(tmp_path / "decay.csv")
    assert rows[0] == ["encoding", "distance", "estimate", "ci95", "oracle"]
    assert len(rows) == 1 + 2 * 5
    report = json.loads((tmp_path / "report.json").read_text())
    assert set(report["slopes"]) == {"rope", "tapa"}
    assert (tmp_path / "decay.svg").read_text().startswith("<svg")


def test_decay_empty_distances_exit_2(tmp_path):
    assert main(["decay", "--out", str(tmp_path), "--set", "distances="]) == 2


def test_grad_check_exit_codes(tmp_path, capsys):
    assert main(["grad-check", "--out", str(tmp_path), "--set", "trials=25"]) == 0
    rows = _rows(tmp_path / "gradcheck.csv")
    assert rows[0] == ["trial", "max_rel_err"] and len(rows) == 26
    capsys.readouterr()
    assert main(["grad-check", "--out", str(tmp_path), "--set", "trials=5", "--set", "tol=0"]) == 1
    assert "failed gradcheck" in capsys.readouterr().out
    assert main(["grad-check", "--out", str(tmp_path), "--set", "trials=0"]) == 2


def test_sweep(tmp_path):
    assert main(["sweep", "--out", str(tmp_path), "--set", "theta0s=1e-4,0.5", "--set", "dims=64",
                 "--set", "lambdas=2,1000", "--set", "alphas=0.1"]) == 0
    rows = _rows(tmp_path / "sweep.csv")
    assert rows[0][:6] == ["theta0", "D", "lambda", "alpha", "C", "S"]
    assert len(rows) == 1 + 4
    inadmissible = [r for r in rows[1:] if r[0] == "0.5"]
    assert all(r[-1] == "nan" for r in inadmissible)
