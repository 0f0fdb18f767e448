"""Command-line front end.

``globotoc [--config PATH] [--preset NAME] [--seed U64] [--threads N] [--out DIR]
SUBCOMMAND [options]`` resolves a configuration (defaults, then preset, then
config file, then flags), validates it against the published schema, runs one
of ``spread``, ``kn``, ``oracle``, ``analyze``, ``fit`` or ``regimes`` and writes
its CSV/JSON artifacts plus ``manifest.json`` into the output directory.

The manifest holds the fully resolved configuration and the package version;
``globotoc --config out/manifest.json SUBCOMMAND`` reruns it and reproduces
every artifact byte for byte. On failure ``error.json`` records
``{error, module, message, exit_code}``; exit code 2 marks invalid input and
3 a runtime failure.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__, kn, mqc, presets, scaling
from .errors import ConfigError, ExperimentFormatError
from .lattice import build_lattice, dilute_sites
from .oracle import (
    FloquetSpec, HamiltonianSpec, decompose_otoc, global_otoc,
    local_otoc, local_otoc_profile, mqc_exact, write_global_otoc_csv, write_local_otoc_csv,
)
from .oracle.models import chain_distances
from .spread import (
    SpreadParams, TimeSeries, edge_fraction, radial_profile, sample_trials, summarize, write_profile_csv,
)

EXIT_OK, EXIT_VALIDATION, EXIT_RUNTIME = 0, 2, 3


# ---------------------------------------------------------------- subcommands

def _sample_times(t_max, step):
    n = int(math.floor(t_max / step + 1e-9))
    t = np.round(np.arange(n + 1) * step, 12)
    if t[-1] < t_max - 1e-12:
        t = np.append(t, t_max)
    return t


def _run_spread(cfg, out: Path) -> list:
    sp = cfg["spread"]
    lat = build_lattice(presets.lattice_spec(cfg))
    kernel = presets.coupling_kernel(cfg)
    params = SpreadParams(death_ratio=sp["death_ratio"], t_max=sp["t_max_units"], integrator=sp["integrator"])
    times = _sample_times(sp["t_max_units"], sp["sample_step_units"])
    grid = sp["occupancy_grid"] or [cfg["lattice"]["occupancy"]]
    seed = cfg["seed"]
    written = []

    def one(p, suffix):
        sites = lat if p >= 1.0 else dilute_sites(lat, p, cfg["lattice"]["dilution_seed"])
        samples = sample_trials(sites, kernel, params, sp["n_trials"], times, seed,
                                snapshot_times=[times[-1]], n_jobs=cfg["threads"])
        ts = summarize(samples)
        ts.to_csv(out / f"timeseries{suffix}.csv")
        write_profile_csv([radial_profile(samples, times[-1])], out / f"profile{suffix}.csv")
        written.extend([f"timeseries{suffix}.csv", f"profile{suffix}.csv"])
        return ts, edge_fraction(samples, times[-1])

    if len(grid) == 1 and not sp["occupancy_grid"]:
        ts, edge = one(grid[0], "")
        rows = [(grid[0], ts, edge)]
    else:
        rows = [(p, *one(p, f"_p{p:.2f}")) for p in grid]
    with open(out / "spread_summary.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["occupancy", "t", "n_op_mean", "n_op_stderr", "edge_fraction", "t_ms"])
        for p, ts, edge in rows:
            w.writerow([repr(float(p)), repr(float(ts.times[-1])), repr(float(ts.n_op_mean[-1])),
                        repr(float(ts.n_op_stderr[-1])), repr(float(edge)),
                        repr(float(ts.times[-1] * sp["time_unit_ms"]))])
    written.append("spread_summary.csv")
    return written


def _run_kn(cfg, out: Path) -> list:
    k = cfg["kn"]
    steps, km, m2, dists = [], [], [], []
    for s, t, p, chain in kn.iter_master(k["N"], k["n_steps"], k["mode"], k["dt_units"]):
        a, b = chain.moments(p)
        steps.append(s)
        km.append(a)
        m2.append(b)
        if s % k["gn_every"] == 0 or s == k["n_steps"]:
            dists.append(chain.to_distribution(p, s, t))
    kn.write_moments_csv(out / "kn_moments.csv", steps, km, m2)
    kn.write_gn_csv(out / "kn_gn.csv", dists)
    stat = kn.stationary_kn(k["N"], k["mode"])
    kn.write_gn_csv(out / "kn_stationary_gn.csv", [stat])
    return ["kn_moments.csv", "kn_gn.csv", "kn_stationary_gn.csv"]


def _oracle_spec(cfg):
    o = cfg["oracle"]
    alpha = o["alpha"]
    if isinstance(alpha, str):
        if alpha.lower() not in ("inf", "infinity"):
            raise ConfigError(f"oracle.alpha must be a number or 'inf', got {alpha!r}")
        alpha = math.inf
    if o["model"] == "floquet":
        return FloquetSpec(o["L"], alpha=alpha, J=o["J"], b=o["b"], h_std=o["h_std"],
                           disorder_seed=o["disorder_seed"])
    d = chain_distances(o["L"])
    with np.errstate(divide="ignore"):
        D = np.where(d > 0, o["J"] * d ** (-alpha), 0.0) if math.isfinite(alpha) else o["J"] * (d == 1)
    return HamiltonianSpec(o["model"], couplings=D, seed=o["disorder_seed"])


def _run_oracle(cfg, out: Path) -> list:
    o = cfg["oracle"]
    spec = _oracle_spec(cfg)
    L = spec.n_spins
    if o["local_site"] >= L:
        raise ConfigError(f"oracle.local_site {o['local_site']} outside the chain of {L} spins")
    times = [float(t) for t in o["times"]]
    if o["model"] == "floquet" and any(t != int(t) for t in times):
        raise ConfigError("circuit times must be whole periods")
    seed = cfg["seed"]
    q = o["quantities"]
    method = o["method"]
    written = []
    if "local" in q:
        a = o["local_site"]
        rows = []
        if method == "exact":
            prof = local_otoc_profile(a, times, spec)
            rows = [(t, b - a, prof[i, b]) for i, t in enumerate(times) for b in range(L)]
        else:
            for t in times:
                rows += [(t, b - a, local_otoc(a, b, t, spec, "random", o["n_states"], seed).value)
                         for b in range(L)]
        write_local_otoc_csv(out / "local_otoc.csv", rows)
        written.append("local_otoc.csv")
    if "global" in q:
        rows = []
        for t in times:
            est = global_otoc(t, spec, method, o["n_states"], seed)
            rows.append((t, est.value, est.stderr))
        write_global_otoc_csv(out / "global_otoc.csv", rows)
        written.append("global_otoc.csv")
    if "mqc" in q:
        mqc.write_gn_csv(out / "mqc_gn.csv", [(t, mqc_exact(t, spec)) for t in times])
        written.append("mqc_gn.csv")
    if "offdiag" in q:
        with open(out / "offdiag.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "total", "diagonal_sum", "offdiag_sum", "max_offdiag", "relative_offdiag"])
            for t in times:
                dec = decompose_otoc(t, spec, method, n_states=o["n_states"], seed=seed)
                w.writerow([repr(t), repr(dec.total.value), repr(dec.diagonal_sum.value),
                            repr(dec.offdiag_sum.value), repr(dec.max_offdiag), repr(dec.relative_offdiag)])
        written.append("offdiag.csv")
    return written


def read_gn_csv(path) -> list:
    """Spectra from a ``n,g_n`` or ``<key>,n,g_n`` CSV, as ``(key, MQCSpectrum)`` pairs."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if not rows:
        raise ExperimentFormatError(f"{path}: empty file", 1)
    header = [h.strip() for h in rows[0]]
    if header[-2:] != ["n", "g_n"] or len(header) not in (2, 3):
        raise ExperimentFormatError(f"{path}: expected header [key,]n,g_n, got {','.join(header)}", 1)
    groups = {}
    for lineno, r in enumerate(rows[1:], start=2):
        if len(r) != len(header):
            raise ExperimentFormatError(f"{path}: line {lineno} has {len(r)} fields", lineno)
        try:
            key = float(r[0]) if len(header) == 3 else None
            n, g = int(r[-2]), float(r[-1])
        except ValueError:
            raise ExperimentFormatError(f"{path}: line {lineno} is not numeric", lineno) from None
        groups.setdefault(key, ([], []))
        groups[key][0].append(n)
        groups[key][1].append(g)
    if not groups:
        raise ExperimentFormatError(f"{path}: no data rows", 2)
    return [(k, mqc.MQCSpectrum(np.array(n), np.array(g), "raw")) for k, (n, g) in groups.items()]


def _run_analyze(cfg, out: Path) -> list:
    path = cfg["analyze"]["input_csv"]
    if not path:
        raise ConfigError("analyze needs analyze.input_csv")
    records = []
    for key, spec in read_gn_csv(path):
        rec = mqc.spectrum_record(spec.unit_sum())
        rec["key"] = key
        records.append(rec)
    _dump_json({"input": str(path), "records": records}, out / "mqc_record.json")
    return ["mqc_record.json"]


def _run_fit(cfg, out: Path) -> list:
    f = cfg["fit"]
    if not f["sim_csv"] or not f["experiment_csv"]:
        raise ConfigError("fit needs fit.sim_csv and fit.experiment_csv")
    sim = TimeSeries.from_csv(f["sim_csv"])
    exp = mqc.load_experiment(f["experiment_csv"], f["time_unit_ms"], hamiltonian=f["hamiltonian"],
                              size_scale=f["size_scale"])
    regime = scaling.classify_regime(f["alpha"], f["d"])
    res = scaling.fit_experiment(sim, exp, tuple(f["J_range"]), tuple(f["shift_range"]), regime=regime)
    rep = res.report()
    rep["caveats"] = rep["caveats"] + exp.flags
    rep["hamiltonian"] = f["hamiltonian"]
    _dump_json(rep, out / "fit_report.json")
    return ["fit_report.json"]


def _run_regimes(cfg, out: Path) -> list:
    r = cfg["regimes"]
    rows = [scaling.classify_regime(a, r["d"]).to_dict() for a in r["alpha_values"]]
    _dump_json({"d": r["d"], "regimes": rows}, out / "regimes.json")
    return ["regimes.json"]


_RUNNERS = {"spread": _run_spread, "kn": _run_kn, "oracle": _run_oracle,
            "analyze": _run_analyze, "fit": _run_fit, "regimes": _run_regimes}


# ---------------------------------------------------------------- plumbing

def _dump_json(obj, path) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, allow_nan=True)
        fh.write("\n")


def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def run(config: dict) -> int:
    """Validate ``config``, execute its subcommand and write the artifacts.

    Returns the exit status; errors are recorded in ``error.json`` under the
    configured output directory when it can be created.
    """
    out = Path(config.get("output_dir", "out")) if isinstance(config, dict) else Path("out")
    try:
        cfg = presets.validate(config)
        out.mkdir(parents=True, exist_ok=True)
        err = out / "error.json"
        if err.exists():
            err.unlink()
        written = _RUNNERS[cfg["subcommand"]](cfg, out)
        manifest = {
            "version": __version__,
            "config": cfg,
            "outputs": {name: _sha256(out / name) for name in written},
        }
        _dump_json(manifest, out / "manifest.json")
        return EXIT_OK
    except Exception as exc:  # every failure becomes a machine-readable record
        return _report_error(exc, out)


def _report_error(exc: Exception, out: Path) -> int:
    validation = isinstance(exc, (ConfigError, ExperimentFormatError))
    code = EXIT_VALIDATION if validation else EXIT_RUNTIME
    module = getattr(exc, "module", "os" if isinstance(exc, OSError) else "globotoc")
    record = {"error": type(exc).__name__, "module": module, "message": str(exc), "exit_code": code}
    if getattr(exc, "row", None) is not None:
        record["row"] = exc.row
    try:
        out.mkdir(parents=True, exist_ok=True)
        _dump_json(record, out / "error.json")
    except OSError:
        pass
    print(json.dumps(record), file=sys.stderr)
    return code


def _u64(text):
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _floats(text):
    return [float(x) for x in text.split(",") if x.strip()]


def _common(p, suppress):
    default = argparse.SUPPRESS if suppress else None
    p.add_argument("--config", metavar="PATH", default=default, help="JSON config or an earlier manifest.json")
    p.add_argument("--preset", choices=presets.PRESETS, default=default)
    p.add_argument("--seed", type=_u64, default=default, help="master seed (unsigned 64-bit)")
    p.add_argument("--threads", type=int, default=default, help="worker threads for Monte Carlo trials")
    p.add_argument("--out", metavar="DIR", default=default, help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="globotoc", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    _common(parser, suppress=False)
    sub = parser.add_subparsers(dest="subcommand", required=True)
    parent = argparse.ArgumentParser(add_help=False)
    _common(parent, suppress=True)

    p = sub.add_parser("spread", parents=[parent], help="stochastic operator-spreading ensemble")
    p.add_argument("--trials", type=int, dest="spread.n_trials")
    p.add_argument("--t-max", type=float, dest="spread.t_max_units")
    p.add_argument("--step", type=float, dest="spread.sample_step_units")
    p.add_argument("--occupancy", type=_floats, dest="spread.occupancy_grid", help="comma-separated p values")
    p.add_argument("--integrator", choices=("gillespie", "tau-leap"), dest="spread.integrator")
    p.add_argument("--size", type=int, dest="lattice.linear_size")

    p = sub.add_parser("kn", parents=[parent], help="Kn-space master equation")
    p.add_argument("--N", type=int, dest="kn.N")
    p.add_argument("--steps", type=int, dest="kn.n_steps")
    p.add_argument("--mode", choices=kn.MODES, dest="kn.mode")
    p.add_argument("--dt", type=float, dest="kn.dt_units")
    p.add_argument("--gn-every", type=int, dest="kn.gn_every")

    p = sub.add_parser("oracle", parents=[parent], help="exact OTOCs and MQC spectra")
    p.add_argument("--L", type=int, dest="oracle.L")
    p.add_argument("--model", choices=("floquet", "H_DQ", "H_YY", "secular", "generic-random"), dest="oracle.model")
    p.add_argument("--alpha", dest="oracle.alpha", type=lambda s: s if s.lower().startswith("inf") else float(s))
    p.add_argument("--times", type=_floats, dest="oracle.times")
    p.add_argument("--method", choices=("exact", "random"), dest="oracle.method")
    p.add_argument("--quantities", type=lambda s: s.split(","), dest="oracle.quantities")
    p.add_argument("--n-states", type=int, dest="oracle.n_states")

    p = sub.add_parser("analyze", parents=[parent], help="cluster size and second moment of MQC spectra")
    p.add_argument("--input", dest="analyze.input_csv", metavar="CSV")

    p = sub.add_parser("fit", parents=[parent], help="fit a simulated curve to measured cluster sizes")
    p.add_argument("--sim", dest="fit.sim_csv", metavar="CSV")
    p.add_argument("--experiment", dest="fit.experiment_csv", metavar="CSV")
    p.add_argument("--hamiltonian", choices=("DQ", "YY"), dest="fit.hamiltonian")
    p.add_argument("--time-unit-ms", type=float, dest="fit.time_unit_ms")
    p.add_argument("--alpha", type=float, dest="fit.alpha")
    p.add_argument("--d", type=int, dest="fit.d")

    p = sub.add_parser("regimes", parents=[parent], help="light-cone regime table")
    p.add_argument("--alpha", type=_floats, dest="regimes.alpha_values")
    p.add_argument("--d", type=int, dest="regimes.d")
    return parser


def config_from_args(ns: argparse.Namespace) -> dict:
    user = {}
    if ns.config:
        try:
            with open(ns.config) as fh:
                user = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {ns.config}: {exc}") from None
        if not isinstance(user, dict):
            raise ConfigError("config file must hold a JSON object")
        if "config" in user and isinstance(user["config"], dict):
            user = user["config"]
    cfg = presets.resolve(user, ns.preset)
    cfg["subcommand"] = ns.subcommand
    for key, val in vars(ns).items():
        if "." in key and val is not None:
            block, field = key.split(".")
            cfg[block][field] = val
    if ns.seed is not None:
        cfg["seed"] = ns.seed
    if ns.threads is not None:
        cfg["threads"] = ns.threads
    if ns.out is not None:
        cfg["output_dir"] = ns.out
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    out = Path(ns.out) if ns.out else Path("out")
    try:
        cfg = config_from_args(ns)
    except Exception as exc:
        return _report_error(exc, out)
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
