import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from globotoc import kn, presets
from globotoc.cli import EXIT_OK, EXIT_RUNTIME, EXIT_VALIDATION, build_parser, config_from_args, main
from globotoc.errors import ConfigError
from globotoc.spread import TimeSeries


def run_cli(tmp_path, *args):
    out = tmp_path / "out"
    code = main([*args, "--out", str(out)])
    return code, out


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_kn_output_matches_module(tmp_path):
    code, out = run_cli(tmp_path, "kn", "--N", "6", "--steps", "20")
    assert code == EXIT_OK
    rows = read_csv(out / "kn_moments.csv")
    assert len(rows) == 21
    dists = kn.evolve_master(6, 20)
    m2 = [d.second_moment() for d in dists]
    np.testing.assert_allclose([float(r["second_moment"]) for r in rows], m2, rtol=1e-12)
    stat = np.loadtxt(out / "kn_stationary_gn.csv", delimiter=",", skiprows=1)
    np.testing.assert_allclose(stat[:, 2], kn.stationary_kn(6).gn(), atol=1e-15)
    manifest = json.loads((out / "manifest.json").read_text())
    assert set(manifest["outputs"]) == {"kn_moments.csv", "kn_gn.csv", "kn_stationary_gn.csv"}
    assert manifest["config"]["kn"]["N"] == 6


def test_manifest_rerun_is_byte_identical(tmp_path):
    code, out = run_cli(tmp_path, "spread", "--preset", "krb", "--trials", "5", "--size", "8",
                        "--t-max", "2", "--seed", "123")
    assert code == EXIT_OK
    first = json.loads((out / "manifest.json").read_text())
    out2 = tmp_path / "again"
    assert main(["spread", "--config", str(out / "manifest.json"), "--out", str(out2)]) == EXIT_OK
    second = json.loads((out2 / "manifest.json").read_text())
    assert first["outputs"] == second["outputs"]
    for name in first["outputs"]:
        assert (out / name).read_bytes() == (out2 / name).read_bytes()
    assert "timeseries_p0.30.csv" in first["outputs"]


def test_seed_changes_spread_output(tmp_path):
    args = ["spread", "--size", "4", "--trials", "10", "--t-max", "1"]
    assert main([*args, "--seed", "1", "--out", str(tmp_path / "a")]) == EXIT_OK
    assert main([*args, "--seed", "2", "--out", str(tmp_path / "b")]) == EXIT_OK
    a = (tmp_path / "a" / "timeseries.csv").read_bytes()
    b = (tmp_path / "b" / "timeseries.csv").read_bytes()
    assert a != b


def test_spread_outputs_parse_back(tmp_path):
    code, out = run_cli(tmp_path, "spread", "--size", "4", "--trials", "20", "--t-max", "1", "--step", "0.25")
    assert code == EXIT_OK
    ts = TimeSeries.from_csv(out / "timeseries.csv")
    np.testing.assert_allclose(ts.times, [0, 0.25, 0.5, 0.75, 1.0])
    assert ts.n_op_mean[0] == 1.0 and ts.trials == 20
    summary = read_csv(out / "spread_summary.csv")
    assert float(summary[0]["n_op_mean"]) == pytest.approx(ts.n_op_mean[-1])


def test_flags_after_or_before_subcommand(tmp_path):
    p = build_parser()
    a = config_from_args(p.parse_args(["--seed", "7", "kn", "--N", "5"]))
    b = config_from_args(p.parse_args(["kn", "--seed", "7", "--N", "5"]))
    assert a == b and a["seed"] == 7 and a["kn"]["N"] == 5


def test_validation_error_exit_code(tmp_path):
    code, out = run_cli(tmp_path, "analyze")
    assert code == EXIT_VALIDATION
    rec = json.loads((out / "error.json").read_text())
    assert rec["exit_code"] == EXIT_VALIDATION and rec["error"] == "ConfigError"


def test_experiment_format_error_reports_row(tmp_path):
    sim = tmp_path / "sim.csv"
    TimeSeries(np.linspace(0, 3, 31), np.exp(np.linspace(0, 3, 31)), np.zeros(31), 1).to_csv(sim)
    bad = tmp_path / "bad.csv"
    bad.write_text("t_ms,cluster_size\n0.4,10\n0.3,20\n")
    code, out = run_cli(tmp_path, "fit", "--sim", str(sim), "--experiment", str(bad))
    assert code == EXIT_VALIDATION
    rec = json.loads((out / "error.json").read_text())
    assert rec["row"] == 3 and rec["error"] == "NonAscendingTimeError"


def test_runtime_error_exit_code(tmp_path):
    exp = tmp_path / "e.csv"
    exp.write_text("t_ms,cluster_size\n0.4,10\n0.8,20\n1.2,40\n")
    code, out = run_cli(tmp_path, "fit", "--sim", str(tmp_path / "missing.csv"), "--experiment", str(exp))
    assert code == EXIT_RUNTIME
    assert json.loads((out / "error.json").read_text())["exit_code"] == EXIT_RUNTIME


def test_stale_error_record_is_removed(tmp_path):
    run_cli(tmp_path, "analyze")
    code, out = run_cli(tmp_path, "regimes")
    assert code == EXIT_OK and not (out / "error.json").exists()


def test_regimes_subcommand(tmp_path):
    code, out = run_cli(tmp_path, "regimes", "--alpha", "3,3.2,4,5", "--d", "3")
    assert code == EXIT_OK
    rep = json.loads((out / "regimes.json").read_text())
    ids = [r["regime_id"] for r in rep["regimes"]]
    assert ids == ["alpha-equals-d", "power-law", "linear-log-broadening", "linear-diffusive"]


def test_analyze_subcommand(tmp_path):
    n = np.arange(-30, 31, 2)
    g = np.exp(-n.astype(float) ** 2 / 50.0)
    src = tmp_path / "gn.csv"
    src.write_text("n,g_n\n" + "".join(f"{a},{float(b)!r}\n" for a, b in zip(n, g)))
    code, out = run_cli(tmp_path, "analyze", "--input", str(src))
    assert code == EXIT_OK
    rec = json.loads((out / "mqc_record.json").read_text())["records"][0]
    assert rec["K"] == pytest.approx(50.0, rel=1e-6)


def test_fit_subcommand_recovers_synthetic(tmp_path):
    tau = np.linspace(0, 3, 31)
    n_sim = np.exp(3 * tau) + 2 * tau + 1
    sim = tmp_path / "sim.csv"
    TimeSeries(tau, n_sim, np.zeros_like(tau), 100).to_csv(sim)
    J, shift = 1.76, -0.87
    # experiment sampled at sim nodes, reported in ms with 0.4 ms per unit
    t_units = tau[10:29:2] / J + shift
    exp = tmp_path / "exp.csv"
    exp.write_text("t_ms,cluster_size\n" + "".join(f"{float(0.4 * t)!r},{float(s)!r}\n" for t, s in zip(t_units, n_sim[10:29:2])))
    code, out = run_cli(tmp_path, "fit", "--sim", str(sim), "--experiment", str(exp), "--alpha", "3", "--d", "3")
    assert code == EXIT_OK
    rep = json.loads((out / "fit_report.json").read_text())
    assert rep["J"] == pytest.approx(J, rel=0.05)
    assert rep["shift"] == pytest.approx(shift, rel=0.05)
    assert rep["regime"]["regime_id"] == "alpha-equals-d"
    assert rep["hamiltonian"] == "DQ"


def test_oracle_outputs(tmp_path):
    code, out = run_cli(tmp_path, "oracle", "--L", "6", "--times", "0,1,2",
                        "--quantities", "local,global,mqc,offdiag")
    assert code == EXIT_OK
    glob = read_csv(out / "global_otoc.csv")
    assert float(glob[0][list(glob[0])[1]]) == pytest.approx(0.0, abs=1e-12)
    off = read_csv(out / "offdiag.csv")
    for r in off:
        assert float(r["total"]) == pytest.approx(float(r["diagonal_sum"]) + float(r["offdiag_sum"]), abs=1e-9)


def test_schema_rejects_bad_configs():
    good = presets.resolve()
    presets.validate(good)
    for block, key, val in [("kn", "mode", "euler"), ("lattice", "kind", "bcc"), ("spread", "n_trials", -1)]:
        bad = presets.resolve()
        bad[block][key] = val
        with pytest.raises(ConfigError):
            presets.validate(bad)
    bad = presets.resolve()
    bad["unknown"] = 1
    with pytest.raises(ConfigError):
        presets.validate(bad)
    bad = presets.resolve()
    bad["seed"] = 2**64
    with pytest.raises(ConfigError):
        presets.validate(bad)


def test_presets():
    a = presets.preset("adamantane-DQ")
    assert a["lattice"]["kind"] == "fcc" and a["lattice"]["spins_per_site"] == 16
    assert a["spread"]["time_unit_ms"] == 0.4
    assert a["kernel"]["rate_factor"] == pytest.approx(3 / 16)
    assert presets.preset("adamantane-YY")["fit"]["hamiltonian"] == "YY"
    k = presets.preset("krb")
    assert k["spread"]["t_max_units"] == 10.0
    assert k["spread"]["occupancy_grid"] == [0.15, 0.20, 0.25, 0.30]
    assert k["lattice"]["kind"] == "simple-cubic"
    with pytest.raises(ConfigError):
        presets.preset("graphene")


def test_console_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "globotoc.cli", "regimes", "--out", str(tmp_path / "o")],
                         capture_output=True, text=True)
    assert res.returncode == 0
    assert (tmp_path / "o" / "regimes.json").exists()
