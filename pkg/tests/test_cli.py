import csv
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from spectral_panel.cli import main
from spectral_panel.panel import BalancedPanel, GroupAssignment, RngSpec, load_panel_csv, panel_to_csv
from spectral_panel.postspectral import oracle_ols
from spectral_panel.spectral import spectral_estimate

DATA = Path(__file__).resolve().parents[1] / "data"
PANEL = DATA / "example_panel.csv"
GROUPS = DATA / "example_groups.csv"


def _table(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_spectral_smoke(tmp_path, capsys):
    out = tmp_path / "coef.csv"
    assert main(["estimate", str(PANEL), "--G", "2", "--seed", "1", "--output", str(out)]) == 0
    rows = _table(out)
    assert [r["term"] for r in rows] == ["x1", "x2"]
    ref = spectral_estimate(load_panel_csv(PANEL), 2, rng=RngSpec(1)).beta_tilde
    np.testing.assert_array_equal([float(r["estimate"]) for r in rows], ref)
    assert "seconds:" in capsys.readouterr().err


def test_post_spectral_reports_lambda(capsys):
    assert main(["estimate", str(PANEL), "--G", "2", "--seed", "3", "--method", "post-spectral"]) == 0
    cap = capsys.readouterr()
    assert "lambda_hat:" in cap.err and "groups_found: 2" in cap.err
    assert cap.out.startswith("term,estimate,std_error,t_stat")


def test_oracle_matches_library(tmp_path):
    out = tmp_path / "o.csv"
    assert main(["estimate", str(PANEL), "--G", "2", "--method", "oracle", "--groups", str(GROUPS),
                 "--seed", "0", "--output", str(out)]) == 0
    panel = load_panel_csv(PANEL)
    lookup = {r["unit_id"]: int(r["group"]) for r in _table(GROUPS)}
    labels = np.array([lookup[u] for u in panel.unit_ids])
    fit = oracle_ols(panel, GroupAssignment.from_labels(labels))
    rows = _table(out)
    np.testing.assert_array_equal([float(r["estimate"]) for r in rows], fit.beta_hat)
    np.testing.assert_array_equal([float(r["std_error"]) for r in rows], fit.std_errors)


@pytest.mark.parametrize(
    "extra",
    [
        ["--method", "post-spectral", "--G", "0"],
        ["--G", "2", "--method", "oracle"],
        ["--G", "2", "--lambda", "0.1"],
        ["--G", "2", "--ife"],
        ["--G", "2", "--method", "lasso", "--lambda", "-1"],
    ],
)
def test_validation_errors_exit_2(extra, capsys):
    assert main(["estimate", str(PANEL), *extra]) == 2
    err = capsys.readouterr().err.strip()
    assert err.startswith("error:") and "\n" not in err


def test_missing_file_exit_2(tmp_path):
    assert main(["estimate", str(tmp_path / "nope.csv"), "--G", "2"]) == 2


def test_numeric_failure_exit_3(tmp_path, capsys):
    rng = np.random.default_rng(0)
    p = BalancedPanel(rng.standard_normal((20, 5)), np.ones((20, 5, 1)))
    path = tmp_path / "flat.csv"
    path.write_text(panel_to_csv(p))
    assert main(["estimate", str(path), "--G", "2", "--seed", "0"]) == 3
    assert "SingularSigma" in capsys.readouterr().err


# the static example panel is short, so the spectral lag slope is erratic there
@pytest.mark.filterwarnings("ignore:estimated autoregressive coefficient")
def test_other_methods_run(tmp_path):
    for extra in (["--method", "lasso", "--lambda-rule-C", "2"], ["--dynamic"], ["--ife", "--J", "2"],
                  ["--method", "post-spectral", "--dynamic", "--format", "markdown"]):
        assert main(["estimate", str(PANEL), "--G", "2", "--seed", "4", *extra]) == 0


def test_classify_output(tmp_path):
    out = tmp_path / "g.csv"
    assert main(["classify", str(PANEL), "--G", "2", "--seed", "5", "--output", str(out)]) == 0
    rows = _table(out)
    assert len(rows) == 100 and set(rows[0]) == {"unit_id", "h_i", "g_hat"}
    assert {r["h_i"] for r in rows} == {"0", "1"}


def test_missing_seed_is_reported(capsys):
    assert main(["classify", str(PANEL), "--G", "2"]) == 0
    assert "seed:" in capsys.readouterr().err


def test_simulate_deterministic_and_per_rep(tmp_path):
    args = ["simulate", "--N", "60", "--T", "12", "--G", "2", "--reps", "3", "--seed", "9"]
    a, b, c = tmp_path / "a.csv", tmp_path / "b.csv", tmp_path / "c.csv"
    assert main([*args, "--output", str(a), "--per-rep", str(tmp_path / "ra.csv")]) == 0
    assert main([*args, "--output", str(b), "--threads", "3", "--per-rep", str(tmp_path / "rb.csv")]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert (tmp_path / "ra.csv").read_bytes() == (tmp_path / "rb.csv").read_bytes()
    assert main(["simulate", "--N", "60", "--T", "12", "--G", "2", "--reps", "1", "--seed", "9",
                 "--output", str(c), "--per-rep", str(tmp_path / "rc.csv")]) == 0
    assert len(_table(tmp_path / "rc.csv")) == 1


def test_simulate_config_file_and_flags(tmp_path):
    conf = tmp_path / "d.conf"
    conf.write_text("N = 50\nT = 10\nG = 2\nreps = 2\nestimators = Oracle\n")
    out = tmp_path / "t.csv"
    assert main(["simulate", "--config", str(conf), "--N", "70", "--seed", "1", "--output", str(out)]) == 0
    row = _table(out)[0]
    assert row["N"] == "70" and "Oracle" in row and "S" not in row
    assert main(["simulate", "--config", str(conf), "--paper-table", "1", "--seed", "1"]) == 2


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "spectral_panel", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "simulate" in res.stdout
