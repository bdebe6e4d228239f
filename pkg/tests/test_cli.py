import json

import numpy as np
import pytest

from shipcoat.cli import main
from shipcoat.inference import PosteriorSamples

SMALL_FLEET = ["--set", "data.synth.n_ships=2", "--set", "data.synth.n_compartments=3"]
TINY_HORIZON = ["--set", "horizon.t_end=24"]
FAST_MCMC = ["--set", 'model.mcmc={"chains": 2, "warmup_draws": 200, "kept_draws": 200}']


def read(path):
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def synth(tmp_path_factory):
    out = tmp_path_factory.mktemp("synth")
    assert run("synth", "--seed", 4, "--out", out, *SMALL_FLEET) == 0
    return out


@pytest.fixture
def params_file(tmp_path):
    p = {"S1/C1": {"a": 0.02, "b": 1.5}, "S1/C2": {"a": 0.3, "b": 1.1}, "S2/C1": {"ln_a": -6.0, "ln_b": 0.6}}
    path = tmp_path / "params.json"
    path.write_text(json.dumps(p))
    return path


def test_synth_outputs_and_audit(synth):
    text = read(synth / "fleet.csv")
    assert text.startswith("# shipcoat")
    assert "ship_id,compartment_id,inspection_time_months,defect_count" in text
    truth = json.loads(read(synth / "truth.json"))
    assert len(truth["params"]) == 6
    assert truth["audit"]["seed"] == 4 and truth["audit"]["command"] == "synth"


def test_synth_is_byte_reproducible(synth, tmp_path):
    assert run("synth", "--seed", 4, "--out", tmp_path, "--threads", 3, *SMALL_FLEET) == 0
    assert read(tmp_path / "fleet.csv") == read(synth / "fleet.csv")
    assert read(tmp_path / "truth.json") == read(synth / "truth.json")


def test_stochastic_commands_need_a_seed(tmp_path, capsys):
    assert run("synth", "--out", tmp_path) == 4
    assert "--seed" in capsys.readouterr().err


def test_usage_and_config_errors_exit_4(tmp_path, params_file):
    assert run("fit", "--seed", 1, "--mode", "nope") == 4
    assert run("synth", "--seed", 1, "--out", tmp_path, "--set", "data.synth.bogus=1") == 4
    assert run("synth", "--seed", 1, "--out", tmp_path, "--set", "nosection.x=1") == 4
    assert run("simulate", "--seed", 1, "--params", params_file, "--paths", 0, *TINY_HORIZON) == 4
    bad = tmp_path / "cfg.json"
    bad.write_text("{not json")
    assert run("synth", "--seed", 1, "--config", bad, "--out", tmp_path) == 4


def test_data_errors_exit_2(tmp_path, params_file):
    assert run("predict", "--seed", 1, "--samples", tmp_path / "missing.csv") == 2
    csv = tmp_path / "bad.csv"
    csv.write_text("ship_id,compartment_id,inspection_time_months,defect_count\nS1,C1,12,-1\n")
    assert run("fit", "--seed", 1, "--mode", "mle", "--data", csv, "--out", tmp_path) == 2


def test_mle_fit_flags_degenerate_compartments(tmp_path):
    csv = tmp_path / "d.csv"
    csv.write_text("ship_id,compartment_id,inspection_time_months,defect_count\n"
                   "S1,C1,12,0\nS1,C1,24,0\nS1,C2,12,2\nS1,C2,24,5\nS1,C2,36,9\n")
    code = run("fit", "--seed", 1, "--mode", "mle", "--data", csv, "--out", tmp_path, "--allow-warnings")
    assert code == 0
    diag = json.loads(read(tmp_path / "diagnostics.json"))
    assert diag["degenerate"] == ["S1/C1"]
    s = PosteriorSamples.from_csv(tmp_path / "samples.csv")
    assert s.draws.shape == (2, 1, 1, 2)


def test_bayes_fit_and_predict(synth, tmp_path):
    fit_out = tmp_path / "fit"
    code = run("fit", "--seed", 2, "--mode", "bayes", "--data", synth / "fleet.csv", "--out", fit_out,
               "--allow-warnings", *FAST_MCMC)
    assert code == 0
    s = PosteriorSamples.from_csv(fit_out / "samples.csv")
    assert s.draws.shape == (6, 2, 200, 2)
    pred = tmp_path / "pred"
    assert run("predict", "--seed", 2, "--samples", fit_out / "samples.csv", "--t-start", 120,
               "--t-end", 180, "--step", 12, "--out", pred) == 0
    rows = [r for r in read(pred / "predict_curves.csv").splitlines() if not r.startswith("#")]
    assert rows[0] == "ship_id,compartment_id,time_months,expected_mean,q0.05,q0.5,q0.95"
    assert len(rows) == 1 + 6 * 5
    doc = json.loads(read(pred / "predict.json"))
    assert set(doc["compartments"]) == {f"S0{s}/C0{c}" for s in (1, 2) for c in (1, 2, 3)}


def test_bayes_on_empty_data_returns_the_prior(tmp_path):
    csv = tmp_path / "empty.csv"
    csv.write_text("ship_id,compartment_id,inspection_time_months,defect_count\n")
    cfg = ["--set", 'model.mcmc={"chains": 4, "warmup_draws": 500, "kept_draws": 1500}']
    assert run("fit", "--seed", 3, "--mode", "bayes", "--data", csv, "--out", tmp_path, *cfg) == 0
    d = PosteriorSamples.from_csv(tmp_path / "samples.csv").draws.reshape(-1, 2)
    assert d[:, 0].mean() == pytest.approx(-7, abs=0.7)
    assert d[:, 1].std() == pytest.approx(3, rel=0.15)


def test_new_ship_prediction_ignores_duplicate_sisters(tmp_path):
    rng = np.random.default_rng(0)
    one = rng.normal([-5, 0.3], [0.3, 0.05], size=(1, 1, 100, 2))
    keys = [("S1", "C1"), ("S2", "C1")]
    PosteriorSamples(keys, np.concatenate([one, one])).to_csv(tmp_path / "two.csv")
    PosteriorSamples(keys[:1], one).to_csv(tmp_path / "one.csv")
    outs = []
    for name in ("one", "two"):
        out = tmp_path / f"o_{name}"
        assert run("predict", "--seed", 1, "--samples", tmp_path / f"{name}.csv", "--new-ship", "NEW",
                   "--t-start", 0, "--t-end", 60, "--step", 12, "--out", out) == 0
        outs.append(json.loads(read(out / "predict.json"))["compartments"])
    assert outs[0] == outs[1]
    assert list(outs[0]) == ["NEW/C1"]


def test_optimize_practice_needs_no_seed(tmp_path, params_file):
    assert run("optimize", "--planner", "practice", "--params", params_file, "--out", tmp_path,
               "--set", "planner.practice=12") == 0
    lines = [r for r in read(tmp_path / "plan.csv").splitlines() if not r.startswith("#")]
    months = {float(r.split(",")[3]) for r in lines[1:]}
    assert all(m % 12 == 0 for m in months)
    assert run("optimize", "--planner", "interval", "--params", params_file, "--out", tmp_path) == 4


def test_optimize_with_oracle_is_exact_and_reproducible(tmp_path, params_file):
    args = ["optimize", "--seed", 5, "--planner", "schedule", "--params", params_file, "--oracle", "--fast",
            *TINY_HORIZON, "--set", "planner.n_groups=3"]
    assert run(*args, "--out", tmp_path / "a", "--threads", 1) == 0
    assert run(*args, "--out", tmp_path / "b", "--threads", 4) == 0
    for f in ("plan.csv", "timeline.csv", "cost.json"):
        assert read(tmp_path / "a" / f) == read(tmp_path / "b" / f)
    doc = json.loads(read(tmp_path / "a" / "cost.json"))
    assert abs(doc["oracle"]["relative_gap"]) < 1e-12
    assert doc["breakdown"]["total"] == pytest.approx(doc["total_cost"])
    assert "threads" not in json.dumps(doc["audit"])


def test_sensitivity_and_simulate(tmp_path, params_file):
    assert run("sensitivity", "--seed", 1, "--params", params_file, "--axis", "ship_setup",
               "--values", "50,5000", "--fast", *TINY_HORIZON, "--out", tmp_path) == 0
    rows = [r.split(",") for r in read(tmp_path / "sensitivity.csv").splitlines() if not r.startswith("#")]
    assert rows[0] == ["axis", "value", "planner", "total_cost", "n_events", "n_inspections", "event_sizes"]
    assert {r[2] for r in rows[1:]} == {"practice", "interval", "schedule"}
    assert run("simulate", "--seed", 1, "--params", params_file, "--paths", 3000, *TINY_HORIZON,
               "--set", "planner.practice=12", "--out", tmp_path) == 0
    doc = json.loads(read(tmp_path / "simulation.json"))
    assert doc["summary"]["n_paths"] == 3000
    assert doc["plan_source"] == "practice"
    assert abs(doc["beta_1"]["gap_in_se"]) < 3


def test_module_entry_point():
    import subprocess
    import sys
    r = subprocess.run([sys.executable, "-m", "shipcoat", "--version"], capture_output=True, text=True)
    assert r.returncode == 0 and "shipcoat" in r.stdout
