import json
import subprocess
import sys

import numpy as np
import pytest

from agess import ConfigurationError, Trace
from agess.harness import (
    PRESETS,
    build_target,
    chain_seed,
    config_from_dict,
    preset,
    read_trace_csv,
    run_experiment,
    splitmix64,
    write_trace_csv,
)
from agess.harness.cli import main
from agess.targets import relu_data

SMOKE = {
    "name": "smoke",
    "chains": 2,
    "base_seed": 3,
    "iterations": 10_000,
    "burn_in": 1000,
    "target": {"name": "gaussian", "dim": 2},
    "sampler": {"kind": "ess"},
}


def write_config(tmp_path, d, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(d))
    return p


# --- seeds --------------------------------------------------------------------------------


def test_splitmix64_reference_values():
    # reference outputs of the standard SplitMix64 generator seeded with 0 (first two draws)
    assert splitmix64(0) == 0xE220A8397B1DCDAF
    assert splitmix64(0x9E3779B97F4A7C15) == 0x6E789E6AA1B965F4
    assert chain_seed(5, 3) == splitmix64(5 ^ 3)
    assert len({chain_seed(1, c) for c in range(100)}) == 100


# --- trace CSV -------------------------------------------------------------------------------


def test_trace_csv_roundtrip_lossless(tmp_path, rng):
    x = rng.standard_normal((50, 3)) * np.logspace(-300, 300, 3)
    tags = np.r_[0, rng.integers(1, 4, 49)].astype(np.int8)
    tr = Trace(x, np.r_[0, rng.integers(1, 9, 49)], tags)
    p = tmp_path / "t.csv"
    write_trace_csv(tr, p)
    back = read_trace_csv(p)
    np.testing.assert_array_equal(back.states, tr.states)
    np.testing.assert_array_equal(back.loop_counts, tr.loop_counts)
    np.testing.assert_array_equal(back.kernel_tags, tr.kernel_tags)
    header = p.read_text().splitlines()[0]
    assert header == "iter,x_1,x_2,x_3,loop_count,kernel_tag"


# --- run_experiment ---------------------------------------------------------------------------


def test_smoke_experiment_and_determinism(tmp_path):
    cfg = config_from_dict({**SMOKE, "out": str(tmp_path / "a")})
    res = run_experiment(cfg)
    assert res.exit_code == 0
    arm = tmp_path / "a" / "smoke"
    assert sorted(p.name for p in arm.glob("*.csv")) == ["chain0.csv", "chain1.csv"]
    s = json.loads((tmp_path / "a" / "summary.json").read_text())
    a = s["arms"]["smoke"]
    assert a["gelman_rubin"] < 1.05
    reports = [json.loads((arm / f"chain{c}.json").read_text()) for c in range(2)]
    assert a["total_iterations"] == sum(r["iterations"] for r in reports) == s["total_iterations"] == 20_000
    assert a["total_evals"] == sum(r["n_evals"] for r in reports)
    assert a["mess_total"] == pytest.approx(sum(r["mess"] for r in reports))
    assert reports[0]["seed"] == chain_seed(3, 0)

    res2 = run_experiment(config_from_dict({**SMOKE, "out": str(tmp_path / "b")}))
    assert res2.exit_code == 0
    for c in range(2):
        a_bytes = (arm / f"chain{c}.csv").read_bytes()
        assert a_bytes == (tmp_path / "b" / "smoke" / f"chain{c}.csv").read_bytes()


def test_multiple_arms_and_workers(tmp_path):
    d = {
        "name": "multi",
        "chains": 2,
        "workers": 2,
        "out": str(tmp_path / "m"),
        "iterations": 2000,
        "arms": [
            {"label": "g-agess", "target": {"name": "gaussian", "dim": 3}, "sampler": {"kind": "agess"}},
            {"label": "v-arw", "target": {"name": "volcano", "dim": 2}, "sampler": {"kind": "arw"},
             "burn_in": 500},
            {"label": "b-scalar", "target": {"name": "banana", "mu1": 1.0}, "sampler": {"kind": "agess-scalar"}},
        ],
    }
    res = run_experiment(config_from_dict(d))
    assert res.exit_code == 0
    assert set(res.summary["arms"]) == {"g-agess", "v-arw", "b-scalar"}
    assert 0 < res.summary["arms"]["v-arw"]["mess_total"]
    rep = json.loads((tmp_path / "m" / "v-arw" / "chain0.json").read_text())
    assert 0 < rep["acceptance_rate"] < 1
    # same bytes as a serial run
    serial = run_experiment(config_from_dict({**d, "workers": 1, "out": str(tmp_path / "s")}))
    assert serial.exit_code == 0
    for lab in ("g-agess", "v-arw", "b-scalar"):
        assert (tmp_path / "m" / lab / "chain1.csv").read_bytes() == (tmp_path / "s" / lab / "chain1.csv").read_bytes()


def test_transformed_target_trace_in_original_space(tmp_path):
    d = {"name": "hs", "out": str(tmp_path / "h"), "iterations": 500,
         "target": {"name": "horseshoe", "d": 2, "n": 10}, "sampler": {"kind": "agess"}}
    run_experiment(config_from_dict(d))
    tr = read_trace_csv(tmp_path / "h" / "hs" / "chain0.csv")
    assert tr.dim == 6
    assert np.all(tr.states[:, 2:] > 0)


def test_relu_records_zero_fraction(tmp_path):
    d = {"name": "r", "out": str(tmp_path / "r"), "iterations": 1000, "chains": 2,
         "target": {"name": "relu", "d": 2, "n": 100, "data_seed": 1}, "sampler": {"kind": "agess"}}
    res = run_experiment(config_from_dict(d))
    assert 0 <= res.summary["arms"]["r"]["zero_fraction"] <= 1


def test_dataset_file_target(tmp_path, rng):
    data = relu_data(60, 2, rng)
    data.save(tmp_path / "data")
    d = {"name": "f", "out": str(tmp_path / "f"), "iterations": 300,
         "target": {"name": "relu", "dataset": str(tmp_path / "data")}, "sampler": {"kind": "ess"}}
    assert run_experiment(config_from_dict(d)).exit_code == 0


def test_config_errors():
    with pytest.raises(ConfigurationError):
        config_from_dict({**SMOKE, "chains": 0})
    with pytest.raises(ConfigurationError):
        config_from_dict({**SMOKE, "burn_in": 10_000})
    with pytest.raises(ConfigurationError):
        config_from_dict({**SMOKE, "sampler": {"kind": "hmc"}})
    with pytest.raises(ConfigurationError):
        config_from_dict({**SMOKE, "target": {"name": "relu", "dataset": "/nonexistent/x"}})
    with pytest.raises(ConfigurationError):
        config_from_dict({**SMOKE, "colour": "red"})
    with pytest.raises(ConfigurationError):
        config_from_dict({"name": "x", "target": {"name": "gaussian", "dim": 2}})


def test_sampling_abort_preserves_partial_artifacts(tmp_path):
    d = {"name": "abort", "out": str(tmp_path / "x"), "iterations": 2000, "chains": 2,
         "target": {"name": "gaussian", "dim": 20, "cov": 1e-8}, "sampler": {"kind": "ess", "sigma0": 100.0,
                                                                             "max_iter": 2}}
    res = run_experiment(config_from_dict(d))
    assert res.exit_code == 3
    assert len(res.errors) == 2
    errs = json.loads((tmp_path / "x" / "errors.json").read_text())["errors"]
    assert errs[0]["error"] == "ShrinkageError"
    err0 = json.loads((tmp_path / "x" / "abort" / "chain0.error.json").read_text())
    tr = read_trace_csv(err0["partial_trace"])
    assert tr.n == err0["partial_states"] >= 1


# --- presets ---------------------------------------------------------------------------------------


def test_preset_contents():
    fig1 = preset("fig1")
    assert any(s.get("alpha") == 9 for s in fig1.samplers)
    assert {a.target["dim"] for a in fig1.arms} == {2, 10, 50, 100, 250, 500}
    assert all(a.window == 0.4 for a in fig1.arms)
    relu = preset("relu")
    (arw10,) = relu.find(kind="arw", d=10)
    assert arw10.iterations == 300_000 and arw10.burn_in == 25_000
    (ag10,) = relu.find(kind="agess", d=10)
    assert ag10.iterations == 100_000
    assert build_target(preset("deepgp").arms[0].target).target.dim == 53
    vol = preset("volcano")
    assert vol.arm("P100-optimal").sampler["sigma0"] == pytest.approx(1.1)
    assert preset("banana").arms[0].iterations == 200_000
    assert preset("twinbanana").arms[0].iterations == 500_000
    assert build_target(preset("horseshoe-desk").arms[0].target).target.dim == 42
    with pytest.raises(ConfigurationError):
        preset("fig2")


@pytest.mark.parametrize("name", PRESETS)
def test_presets_build(name):
    for arm in preset(name).arms:
        build_target(arm.target)


# --- CLI --------------------------------------------------------------------------------------------


def test_cli_run_and_diagnose(tmp_path, capsys):
    cfg = write_config(tmp_path, {**SMOKE, "iterations": 2000, "burn_in": 0})
    out = tmp_path / "cli"
    assert main(["run", "--config", str(cfg), "--out", str(out), "--chains", "3", "--seed", "9"]) == 0
    s = json.loads((out / "summary.json").read_text())
    assert s["base_seed"] == 9 and s["arms"]["smoke"]["chains"] == 3
    capsys.readouterr()
    assert main(["diagnose", "--traces", str(out / "smoke" / "chain*.csv"), "--burn-in", "100"]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert len(rep["traces"]) == 3 and rep["gelman_rubin"] < 1.1
    assert main(["diagnose", "--traces", str(tmp_path / "none*.csv")]) == 4
    bad = tmp_path / "bad.csv"
    bad.write_text("a,b\n1,2\n")
    assert main(["diagnose", "--traces", str(bad)]) == 4


def test_cli_config_errors(tmp_path):
    assert main(["run", "--config", str(tmp_path / "missing.json")]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["run", "--config", str(bad)]) == 2
    ds = write_config(tmp_path, {**SMOKE, "target": {"name": "relu", "dataset": str(tmp_path / "nope")},
                                 "out": str(tmp_path / "never")}, "ds.json")
    assert main(["run", "--config", str(ds)]) == 2
    assert not (tmp_path / "never").exists()


def test_cli_sampling_abort_exit_code(tmp_path):
    cfg = write_config(tmp_path, {"name": "a", "iterations": 500, "out": str(tmp_path / "o"),
                                  "target": {"name": "gaussian", "dim": 20, "cov": 1e-8},
                                  "sampler": {"kind": "ess", "sigma0": 100.0, "max_iter": 2}})
    assert main(["run", "--config", str(cfg)]) == 3


def test_cli_preset_dry_run(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("AGESS_OUTPUT_DIR", str(tmp_path))
    assert main(["preset", "deepgp", "--dry-run", "--chains", "5"]) == 0
    cfg = json.loads(capsys.readouterr().out)
    assert cfg["chains"] == 5 and cfg["out"] == f"{tmp_path}/deepgp"


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "agess", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "diagnose" in r.stdout
