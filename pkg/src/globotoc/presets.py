"""Run configurations: defaults, named presets and resolution into model objects."""
from __future__ import annotations

import copy
import json
import math
from importlib import resources

import jsonschema

from .errors import ConfigError
from .lattice import CouplingKernel, LatticeSpec

SUBCOMMANDS = ("spread", "kn", "oracle", "analyze", "fit", "regimes")
PRESETS = ("adamantane-DQ", "adamantane-YY", "krb")

# Nearest-neighbour dipolar rate of the adamantane model before the 3/16
# rescaling (which matches the operator norm of the three secular Pauli pairs
# to sixteen generic ones). Calibrated so that the ensemble mean N_op reaches
# about 50 at one time unit and about 8e3 at three units.
ADAMANTANE_NN_RATE = 0.112
ADAMANTANE_RATE_FACTOR = 3.0 / 16.0

DEFAULTS = {
    "subcommand": "spread",
    "seed": 0,
    "threads": 1,
    "output_dir": "out",
    "lattice": {
        "kind": "fcc",
        "linear_size": 10,
        "spins_per_site": 1,
        "nn_distance_nm": 1.0,
        "occupancy": 1.0,
        "boundary": "open",
        "dilution_seed": 0,
    },
    "kernel": {
        "alpha": 3.0,
        "nn_rate": 1.0,
        "rate_factor": 1.0,
        "angular_mode": "isotropic",
        "field_axis": [0.0, 0.0, 1.0],
        "cutoff_nn_multiple": 3.0,
    },
    "spread": {
        "death_ratio": 1.0 / 3.0,
        "t_max_units": 1.0,
        "sample_step_units": 0.1,
        "n_trials": 200,
        "integrator": "gillespie",
        "occupancy_grid": [],
        "time_unit_ms": 1.0,
    },
    "kn": {"N": 6, "n_steps": 200, "mode": "jump", "dt_units": 0.05, "gn_every": 1},
    "oracle": {
        "model": "floquet",
        "L": 8,
        "alpha": 2.0,
        "J": math.pi / 4,
        "b": math.pi / 4,
        "h_std": 1.0,
        "disorder_seed": 0,
        "times": [0, 1, 2, 3, 4],
        "quantities": ["local", "global", "mqc"],
        "method": "exact",
        "n_states": 20,
        "local_site": 0,
    },
    "analyze": {"input_csv": None},
    "fit": {
        "sim_csv": None,
        "experiment_csv": None,
        "time_unit_ms": 0.4,
        "hamiltonian": "DQ",
        "size_scale": 1.0,
        "J_range": [0.5, 5.0],
        "shift_range": [-3.0, 3.0],
        "alpha": 3.0,
        "d": 3,
    },
    "regimes": {"alpha_values": [1.5, 2.0, 2.5, 3.0, 3.25, 3.5, 3.75, 4.0, 5.0], "d": 3},
}

_PRESET_OVERRIDES = {
    "adamantane-DQ": {
        "subcommand": "spread",
        "lattice": {"kind": "fcc", "linear_size": 14, "spins_per_site": 16, "nn_distance_nm": 0.67},
        "kernel": {"alpha": 3.0, "nn_rate": ADAMANTANE_NN_RATE, "rate_factor": ADAMANTANE_RATE_FACTOR,
                   "cutoff_nn_multiple": 1.01},
        "spread": {"t_max_units": 3.0, "sample_step_units": 0.1, "n_trials": 2000, "time_unit_ms": 0.4},
        "fit": {"hamiltonian": "DQ", "time_unit_ms": 0.4},
    },
    "adamantane-YY": {
        "subcommand": "spread",
        "lattice": {"kind": "fcc", "linear_size": 14, "spins_per_site": 16, "nn_distance_nm": 0.67},
        "kernel": {"alpha": 3.0, "nn_rate": ADAMANTANE_NN_RATE, "rate_factor": ADAMANTANE_RATE_FACTOR,
                   "cutoff_nn_multiple": 1.01},
        "spread": {"t_max_units": 3.0, "sample_step_units": 0.1, "n_trials": 2000, "time_unit_ms": 0.4},
        "fit": {"hamiltonian": "YY", "time_unit_ms": 0.4},
    },
    "krb": {
        "subcommand": "spread",
        "lattice": {"kind": "simple-cubic", "linear_size": 30, "spins_per_site": 1, "nn_distance_nm": 1.0},
        "kernel": {"alpha": 3.0, "nn_rate": 1.0, "rate_factor": 1.0, "cutoff_nn_multiple": 3.0},
        "spread": {"t_max_units": 10.0, "sample_step_units": 0.5, "n_trials": 200,
                   "occupancy_grid": [0.15, 0.20, 0.25, 0.30], "time_unit_ms": 1.0},
    },
}


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def schema() -> dict:
    text = resources.files("globotoc").joinpath("config_schema.json").read_text()
    return json.loads(text)


def validate(config: dict) -> dict:
    try:
        jsonschema.validate(config, schema())
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config invalid at {path}: {exc.message}") from None
    return config


def preset(name: str) -> dict:
    """Fully populated configuration for a named preset."""
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    cfg = _merge(DEFAULTS, _PRESET_OVERRIDES[name])
    cfg["preset"] = name
    return validate(cfg)


def resolve(user: dict | None = None, preset_name: str | None = None) -> dict:
    """Defaults, then the preset, then the user's partial config."""
    base = preset(preset_name) if preset_name else copy.deepcopy(DEFAULTS)
    if user:
        if "config" in user and isinstance(user["config"], dict):
            user = user["config"]  # a manifest from an earlier run
        if user.get("preset") and not preset_name:
            base = preset(user["preset"])
        base = _merge(base, user)
    return validate(base)


def lattice_spec(cfg: dict) -> LatticeSpec:
    lat = cfg["lattice"]
    return LatticeSpec.from_nn_distance(
        lat["kind"], lat["linear_size"], lat["nn_distance_nm"],
        spins_per_site=lat["spins_per_site"], occupancy=lat["occupancy"], boundary=lat["boundary"])


def coupling_kernel(cfg: dict) -> CouplingKernel:
    k = cfg["kernel"]
    nn = cfg["lattice"]["nn_distance_nm"]
    mult = k.get("cutoff_nn_multiple")
    return CouplingKernel(
        alpha=k["alpha"],
        prefactor=k["nn_rate"] * k["rate_factor"],
        angular_mode=k["angular_mode"],
        field_axis=tuple(k["field_axis"]),
        cutoff_radius_nm=None if mult is None else mult * nn,
        reference_distance_nm=nn,
    )
