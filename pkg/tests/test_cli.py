"""End-to-end runs of the command-line front end, in process via run()."""

import json
import math

import numpy as np
import pytest

import supply_eq.cli as cli
from supply_eq.cli import run
from supply_eq.threshold import ConditionProbe, ThresholdReport


@pytest.fixture(autouse=True)
def clean_env(monkeypatch):
    monkeypatch.delenv("SUPPLY_EQ_SEED", raising=False)


def run_json(capsys, argv):
    code = run(argv)
    out = capsys.readouterr().out
    return code, json.loads(out)


def test_threshold_basis2_example(capsys):
    code, rep = run_json(capsys, ["threshold", "--users", "basis2", "--q", "2"])
    assert code == 0
    assert rep["beta_star_closed"] == 2.0
    assert rep["beta_estimate"] == pytest.approx(2.0, abs=0.15)
    assert rep["run_config"]["subcommand"] == "threshold"
    assert rep["run_config"]["seed"] == 0
    for probe in rep["condition_trace"]:
        assert set(probe) == {"beta", "holds", "lhs_log", "rhs_log"}


def test_profit_p2_example(capsys):
    argv = [
        "profit", "--users", "basis2", "--q", "2", "--beta", "4",
        "--producers", "2", "--variant", "p2",
    ]
    code, rep = run_json(capsys, argv)
    assert code == 0
    assert rep["eq_profit"] == 0.5
    assert rep["q_alignment"] == pytest.approx(1 / math.sqrt(2), abs=1e-6)


def test_eq_onepop_cdf_example(capsys):
    argv = [
        "eq", "--variant", "onepop", "--beta", "2", "--producers", "2",
        "--n", "0", "--cdf-grid", "11",
    ]
    assert run(argv) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "quality,cdf"
    assert len(lines) == 12
    assert "0.5,0.25" in lines


def test_output_bytes_deterministic(capsys):
    argv = ["threshold", "--users", "angle:1.2", "--seed", "11"]
    run(argv)
    first = capsys.readouterr().out
    run(argv)
    assert capsys.readouterr().out == first


def test_env_seed_matches_explicit(capsys, monkeypatch):
    run(["threshold", "--users", "basis2", "--seed", "7"])
    explicit = capsys.readouterr().out
    monkeypatch.setenv("SUPPLY_EQ_SEED", "7")
    run(["threshold", "--users", "basis2"])
    assert capsys.readouterr().out == explicit


def test_bad_env_seed_is_usage_error(capsys, monkeypatch):
    monkeypatch.setenv("SUPPLY_EQ_SEED", "many")
    assert run(["threshold", "--users", "basis2"]) == 2


def test_nsw_report(capsys):
    code, rep = run_json(capsys, ["nsw", "--users", "basis2"])
    assert code == 0
    assert rep["converged"] is True
    root_half = 1 / math.sqrt(2)
    assert rep["direction"] == pytest.approx([root_half, root_half], abs=1e-6)
    assert rep["nsw_value"] == pytest.approx(2 * math.log(root_half), abs=1e-6)


def test_nsw_weighted_cost(capsys):
    code, rep = run_json(capsys, ["nsw", "--users", "basis2", "--alpha", "2,1"])
    assert code == 0
    # Stationarity on the ellipse 4p1^2 + p2^2 = 1 forces p2 = 2p1.
    assert rep["direction"] == pytest.approx(
        [1 / (2 * math.sqrt(2)), 1 / math.sqrt(2)], abs=1e-6
    )
    assert rep["run_config"]["alpha"] == [2.0, 1.0]


def test_out_file_instead_of_stdout(capsys, tmp_path):
    dest = tmp_path / "rep.json"
    assert run(["nsw", "--users", "basis2", "--out", str(dest)]) == 0
    assert capsys.readouterr().out == ""
    rep = json.loads(dest.read_text())
    assert rep["run_config"]["out"] == str(dest)


def test_eq_samples_csv(capsys):
    argv = ["eq", "--variant", "p2", "--beta", "4", "--n", "5", "--seed", "1"]
    assert run(argv) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "f0,f1"
    assert len(lines) == 6
    radius = (2 / 4.0) ** (1 / 4.0)
    for line in lines[1:]:
        x, y = map(float, line.split(","))
        assert math.hypot(x, y) == pytest.approx(radius, abs=1e-12)


def test_eq_finitep_cdf(capsys):
    argv = ["eq", "--variant", "finitep", "--producers", "3", "--cdf-grid", "5"]
    assert run(argv) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "x,cdf"
    assert "0.5,0.5" in lines
    assert lines[-1] == "1,1"


def test_eq_infinite_cdf_and_samples(capsys, tmp_path):
    cdf_path = tmp_path / "cdf.csv"
    samp_path = tmp_path / "pts.csv"
    argv = [
        "eq", "--variant", "infinite", "--theta", str(math.pi / 3), "--beta", "7",
        "--cdf-grid", "9", "--n", "20", "--out", str(cdf_path),
        "--samples-out", str(samp_path), "--seed", "2",
    ]
    assert run(argv) == 0
    cdf_lines = cdf_path.read_text().splitlines()
    assert cdf_lines[0] == "quality,cdf"
    assert len(cdf_lines) == 10
    assert float(cdf_lines[-1].split(",")[1]) == 1.0
    pts = samp_path.read_text().splitlines()
    assert pts[0] == "f0,f1"
    assert len(pts) == 21


def test_verify_small_run(capsys):
    argv = [
        "verify", "--users", "basis2", "--variant", "p2", "--beta", "4",
        "--samples", "2000", "--grid", "40x40", "--seed", "0",
    ]
    code, rep = run_json(capsys, argv)
    assert code == 0
    assert rep["eq_profit"] == 0.5
    assert rep["best_response_gap"] <= 0.1
    assert rep["positive_profit"] is True
    assert rep["run_config"]["grid_angles"] == 40


def test_nmf_end_to_end(capsys, tmp_path):
    a, b = [1.0, 2.0, 3.0], [0.5, 1.0, 2.0]
    body = "user_id,item_id,rating\n" + "".join(
        f"u{i},m{j},{a[i] * b[j]!r}\n" for i in range(3) for j in range(3)
    )
    ratings = tmp_path / "ratings.csv"
    ratings.write_text(body)
    emb = tmp_path / "emb.csv"
    argv = [
        "nmf", "--ratings", str(ratings), "--factors", "1",
        "--epochs", "300", "--seed", "0", "--out", str(emb),
    ]
    code, rep = run_json(capsys, argv)
    assert code == 0
    assert rep["n_users"] == 3
    assert rep["n_items"] == 3
    assert rep["final_objective"] < 1e-10
    lines = emb.read_text().splitlines()
    assert lines[0] == "user_id,f0"
    assert len(lines) == 4
    # The embeddings file feeds straight back into the analysis commands.
    assert run(["nsw", "--users", str(emb), "--out", str(tmp_path / "n.json")]) == 0


def test_inf_serialized_as_string(capsys):
    code, rep = run_json(capsys, ["threshold", "--users", "angle:0"])
    assert code == 0
    assert rep["beta_upper"] == "inf"
    assert rep["beta_star_closed"] == "inf"
    assert rep["condition_trace"] == []


def test_exit_usage_on_bogus_subcommand(capsys):
    assert run(["frobnicate"]) == 2


def test_exit_usage_below_threshold_infinite(capsys):
    argv = ["eq", "--variant", "infinite", "--theta", str(math.pi / 3),
            "--beta", "2", "--cdf-grid", "5"]
    assert run(argv) == 2


def test_exit_usage_nothing_to_emit(capsys):
    assert run(["eq", "--variant", "onepop"]) == 2


def test_exit_usage_planar_variant_weighted(capsys):
    argv = ["eq", "--variant", "p2", "--q", "3", "--cdf-grid", "5"]
    assert run(argv) == 2


def test_exit_input_on_negative_rating(capsys, tmp_path):
    ratings = tmp_path / "r.csv"
    ratings.write_text("user_id,item_id,rating\nu,m,-1.0\n")
    argv = ["nmf", "--ratings", str(ratings), "--factors", "1",
            "--out", str(tmp_path / "e.csv")]
    assert run(argv) == 3
    assert "nonnegative" in capsys.readouterr().err


def test_exit_input_on_missing_users_file(capsys, tmp_path):
    assert run(["nsw", "--users", str(tmp_path / "absent.csv")]) == 3


def test_help_exits_zero(capsys):
    assert run(["--help"]) == 0
    assert "subcommand" in capsys.readouterr().out or True


def test_exit_nonconvergence_still_writes_report(capsys, monkeypatch, tmp_path):
    stuck = ThresholdReport(
        beta_star_closed=2.0,
        beta_upper=2.5,
        beta_estimate=None,
        condition_trace=(
            ConditionProbe(beta=2.2, holds=None, lhs_log=-1.0, rhs_log=-1.0),
        ),
    )
    monkeypatch.setattr(cli, "threshold_report", lambda *a, **k: stuck)
    dest = tmp_path / "rep.json"
    assert run(["threshold", "--users", "basis2", "--out", str(dest)]) == 4
    rep = json.loads(dest.read_text())
    assert rep["condition_trace"][0]["holds"] is None
    assert rep["beta_estimate"] is None


def test_render_json_shapes():
    text = cli.render_json(
        {"a": np.array([1.0, math.inf]), "b": None, "c": True, "d": "s", "e": 3}
    )
    rep = json.loads(text)
    assert rep == {"a": [1.0, "inf"], "b": None, "c": True, "d": "s", "e": 3}
