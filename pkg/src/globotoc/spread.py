"""Continuous-time stochastic operator spreading on a lattice of molecules.

Every spin is either *empty* (identity) or *occupied* (a non-identity Pauli).
An empty spin ``j`` becomes occupied at rate ``sum_{i occupied} lam_ij`` and an
occupied spin ``j`` empties at rate ``death_ratio * sum_{i occupied, i != j}
lam_ij``. With ``lam_ij = infection_scale * pairwise_rate`` between spins on
different molecules and ``intra_rate`` inside a molecule (zero for tumbling
molecules). The number of occupied spins ``N_op(t)`` is the stochastic proxy
for the global OTOC.
"""
from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import expm_multiply

from . import _kernels
from .errors import SpreadError
from .lattice import CouplingKernel, SiteSet, rate_matrix

INTEGRATORS = ("gillespie", "tau-leap")
ORACLE_MAX_SPINS = 12


@dataclass(frozen=True)
class SpreadParams:
    infection_scale: float = 1.0
    death_ratio: float = 1.0 / 3.0
    t_max: float = 1.0
    seed_spin: int | None = None
    integrator: str = "gillespie"
    tau: float | None = None
    intra_rate: float = 0.0
    # adaptive tau-leap: expected flips per step as a fraction of N_op
    event_fraction: float = 0.1

    def __post_init__(self):
        if not self.infection_scale > 0:
            raise SpreadError("infection_scale must be positive")
        if not self.death_ratio >= 0:
            raise SpreadError("death_ratio must be nonnegative")
        if not self.t_max > 0:
            raise SpreadError("t_max must be positive")
        if self.integrator not in INTEGRATORS:
            raise SpreadError(f"unknown integrator {self.integrator!r}")
        if self.tau is not None and not self.tau > 0:
            raise SpreadError("tau must be positive when given")
        if self.intra_rate < 0:
            raise SpreadError("intra_rate must be nonnegative")


@dataclass
class SpreadState:
    """Occupied count per occupied molecule (spins within a molecule are exchangeable)."""

    occupied_counts: np.ndarray
    time: float
    spins_per_site: int

    @property
    def n_op(self) -> int:
        return int(self.occupied_counts.sum())


@dataclass
class Trajectory:
    times: np.ndarray
    counts: np.ndarray
    n_events: int = 0

    def events(self):
        return list(zip(self.times.tolist(), self.counts.tolist()))

    def count_at(self, t: float) -> int:
        i = np.searchsorted(self.times, t, side="right") - 1
        return int(self.counts[max(i, 0)])


@dataclass
class TimeSeries:
    times: np.ndarray
    n_op_mean: np.ndarray
    n_op_stderr: np.ndarray
    trials: int
    meta: dict = field(default_factory=dict)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "n_op_mean", "n_op_stderr", "trials"])
            for t, m, s in zip(self.times, self.n_op_mean, self.n_op_stderr):
                w.writerow([repr(float(t)), repr(float(m)), repr(float(s)), self.trials])

    @classmethod
    def from_csv(cls, path) -> "TimeSeries":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(data[:, 0], data[:, 1], data[:, 2], int(data[0, 3]))


@dataclass
class TrialSamples:
    """Per-trial ``N_op`` at the sample times plus mean molecule occupations."""

    sample_times: np.ndarray
    counts: np.ndarray  # (trials, times)
    mean_occupation: dict  # snapshot time -> mean occupied count per molecule
    sites: SiteSet
    site_index: np.ndarray
    seed_site: int

    @property
    def n_trials(self) -> int:
        return self.counts.shape[0]


@dataclass
class _Prepared:
    indptr: np.ndarray
    indices: np.ndarray
    weights: np.ndarray
    site_index: np.ndarray
    seed_mol: int
    M: int


def trial_seed(base_seed: int, trial: int) -> int:
    """Per-trial 32-bit seed; adding trials never changes earlier trials' streams."""
    ss = np.random.SeedSequence(int(base_seed), spawn_key=(int(trial),))
    return int(ss.generate_state(1, dtype=np.uint32)[0])


def _seed_site(sites: SiteSet, params: SpreadParams) -> int:
    if params.seed_spin is None:
        return sites.center_site()
    site = int(params.seed_spin) // sites.spins_per_site
    if not 0 <= site < len(sites):
        raise SpreadError(f"seed spin {params.seed_spin} outside the lattice")
    return site


def _prepare(sites: SiteSet, kernel: CouplingKernel, params: SpreadParams) -> _Prepared:
    if len(sites) == 0 or sites.degenerate:
        raise SpreadError("empty site set: nothing can be seeded")
    seed_site = _seed_site(sites, params)
    if not sites.occupied[seed_site]:
        raise SpreadError(f"seed spin lies on diluted (empty) site {seed_site}")
    mat, idx = rate_matrix(sites, kernel)
    mat = (mat * params.infection_scale).tocsr()
    mat.sort_indices()
    seed_mol = int(np.searchsorted(idx, seed_site))
    return _Prepared(
        indptr=mat.indptr.astype(np.int64),
        indices=mat.indices.astype(np.int64),
        weights=mat.data.astype(np.float64),
        site_index=idx,
        seed_mol=seed_mol,
        M=sites.spins_per_site,
    )


def _run(prep: _Prepared, params: SpreadParams, sample_t, snap_slot, n_snap, seed, record):
    args = (prep.indptr, prep.indices, prep.weights, prep.M, params.death_ratio,
            params.intra_rate, prep.seed_mol, params.t_max, sample_t, snap_slot,
            n_snap, seed, record)
    if params.integrator == "gillespie":
        return _kernels.gillespie(*args)
    tau = -1.0 if params.tau is None else params.tau
    return _kernels.tau_leap(*args, tau, params.event_fraction)


def _check_times(times, t_max) -> np.ndarray:
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size == 0:
        raise SpreadError("sample_times must be a nonempty 1d sequence")
    if np.any(np.diff(times) < 0):
        raise SpreadError("sample_times must be ascending")
    if times[0] < 0 or times[-1] > t_max * (1 + 1e-12):
        raise SpreadError("sample_times must lie within [0, t_max]")
    return times


def run_trial(sites: SiteSet, kernel: CouplingKernel, params: SpreadParams,
              rng_seed: int) -> Trajectory:
    """One trajectory as the list of (time, occupied count) events up to ``t_max``."""
    prep = _prepare(sites, kernel, params)
    sample_t = np.array([params.t_max])
    _, _, ev_t, ev_n, n_events = _run(prep, params, sample_t, np.array([-1]), 0,
                                      trial_seed(rng_seed, 0), True)
    return Trajectory(ev_t.copy(), ev_n.copy(), int(n_events))


def final_state(sites: SiteSet, kernel: CouplingKernel, params: SpreadParams,
                rng_seed: int) -> SpreadState:
    prep = _prepare(sites, kernel, params)
    _, snaps, _, _, _ = _run(prep, params, np.array([params.t_max]), np.array([0]), 1,
                             trial_seed(rng_seed, 0), False)
    return SpreadState(snaps[0].copy(), params.t_max, prep.M)


def sample_trials(sites: SiteSet, kernel: CouplingKernel, params: SpreadParams,
                  n_trials: int, sample_times, base_seed: int,
                  snapshot_times=(), n_jobs: int = 1) -> TrialSamples:
    """Run independent trials; results are merged by trial index.

    ``snapshot_times`` must be a subset of ``sample_times``; for each the mean
    occupied count per molecule is accumulated (used by ``radial_profile``).
    """
    if n_trials < 1:
        raise SpreadError("n_trials must be at least 1")
    sample_t = _check_times(sample_times, params.t_max)
    prep = _prepare(sites, kernel, params)
    snap_slot = np.full(sample_t.size, -1, dtype=np.int64)
    snapshot_times = [float(s) for s in snapshot_times]
    for slot, s in enumerate(snapshot_times):
        hits = np.flatnonzero(np.isclose(sample_t, s, rtol=0, atol=1e-12))
        if hits.size == 0:
            raise SpreadError(f"snapshot time {s} is not one of the sample times")
        snap_slot[hits[0]] = slot
    n_snap = len(snapshot_times)

    def one(trial):
        counts, snaps, _, _, _ = _run(prep, params, sample_t, snap_slot, n_snap,
                                      trial_seed(base_seed, trial), False)
        return counts, snaps

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(one, range(n_trials)))
    else:
        results = [one(i) for i in range(n_trials)]

    counts = np.stack([c for c, _ in results]).astype(float)
    mean_occ = {}
    for slot, s in enumerate(snapshot_times):
        acc = np.zeros(len(prep.site_index))
        for _, snaps in results:
            acc += snaps[slot]
        mean_occ[s] = acc / n_trials
    return TrialSamples(sample_t, counts, mean_occ, sites, prep.site_index,
                        int(prep.site_index[prep.seed_mol]))


def summarize(samples: TrialSamples) -> TimeSeries:
    n = samples.n_trials
    mean = samples.counts.mean(axis=0)
    if n > 1:
        stderr = samples.counts.std(axis=0, ddof=1) / math.sqrt(n)
    else:
        stderr = np.zeros_like(mean)
    return TimeSeries(samples.sample_times.copy(), mean, stderr, n)


def run_ensemble(sites: SiteSet, kernel: CouplingKernel, params: SpreadParams,
                 n_trials: int, sample_times, base_seed: int, n_jobs: int = 1) -> TimeSeries:
    """Mean and standard error of ``N_op`` over independent trials.

    ``meta['edge_fraction']`` reports the share of the final mean occupation
    sitting within one nearest-neighbour distance of an open boundary; a
    value well above zero means the lattice was too small.
    """
    sample_t = _check_times(sample_times, params.t_max)
    samples = sample_trials(sites, kernel, params, n_trials, sample_t, base_seed,
                            snapshot_times=[sample_t[-1]], n_jobs=n_jobs)
    ts = summarize(samples)
    ts.meta["edge_fraction"] = edge_fraction(samples, sample_t[-1])
    ts.meta["integrator"] = params.integrator
    return ts


def edge_fraction(samples: TrialSamples, sample_time: float) -> float:
    sites = samples.sites
    occ = samples.mean_occupation[float(sample_time)]
    if sites.box_nm is not None or occ.sum() == 0:
        return 0.0
    pos = sites.positions[samples.site_index]
    lo, hi = sites.positions.min(axis=0), sites.positions.max(axis=0)
    span = hi > lo
    margin = sites.nn_distance_nm * 1.000001
    near = np.any(((pos - lo) < margin) & span, axis=1) | np.any(((hi - pos) < margin) & span, axis=1)
    return float(occ[near].sum() / occ.sum())


@dataclass
class RadialProfile:
    time: float
    r_lo: np.ndarray
    r_hi: np.ndarray
    occupation_prob: np.ndarray
    spins_per_bin: np.ndarray

    @property
    def total(self) -> float:
        return float(np.sum(self.occupation_prob * self.spins_per_bin))

    def front_position(self, threshold: float) -> float:
        """Outermost distance where the occupation probability still exceeds ``threshold``.

        Linear interpolation between bin centres.
        """
        centers = 0.5 * (self.r_lo + self.r_hi)
        p = self.occupation_prob
        above = np.flatnonzero(p >= threshold)
        if above.size == 0:
            return 0.0
        i = above[-1]
        if i + 1 >= p.size:
            return float(centers[i])
        p0, p1 = p[i], p[i + 1]
        return float(centers[i] + (p0 - threshold) / (p0 - p1) * (centers[i + 1] - centers[i]))


def radial_profile(samples: TrialSamples, sample_time: float, bin_edges=None) -> RadialProfile:
    """Occupation probability versus distance from the seed molecule.

    Bins default to one bin per distinct distance shell. The probability in a
    bin times the number of spins in it, summed over bins, reproduces the
    ensemble mean ``N_op`` at that time.
    """
    key = float(sample_time)
    if key not in samples.mean_occupation:
        raise SpreadError(f"no snapshot was recorded at t={sample_time}")
    occ = samples.mean_occupation[key]
    sites = samples.sites
    pos = sites.positions[samples.site_index]
    d = pos - sites.positions[samples.seed_site]
    if sites.box_nm is not None:
        finite = np.isfinite(sites.box_nm)
        d[:, finite] -= sites.box_nm[finite] * np.round(d[:, finite] / sites.box_nm[finite])
    r = np.linalg.norm(d, axis=1)
    M = sites.spins_per_site
    if bin_edges is None:
        shells = np.unique(np.round(r, 9))
        mids = 0.5 * (shells[1:] + shells[:-1])
        bin_edges = np.concatenate([[0.0], mids, [shells[-1] + 1.0]])
        if shells.size == 1:
            bin_edges = np.array([0.0, shells[0] + 1.0])
    bin_edges = np.asarray(bin_edges, dtype=float)
    which = np.clip(np.searchsorted(bin_edges, r, side="right") - 1, 0, len(bin_edges) - 2)
    nb = len(bin_edges) - 1
    spins = np.bincount(which, minlength=nb).astype(float) * M
    occupied = np.bincount(which, weights=occ, minlength=nb)
    with np.errstate(invalid="ignore", divide="ignore"):
        prob = np.where(spins > 0, occupied / spins, 0.0)
    return RadialProfile(key, bin_edges[:-1].copy(), bin_edges[1:].copy(), prob, spins)


def write_profile_csv(profiles, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "r_bin_lo", "r_bin_hi", "occupation_prob"])
        for prof in profiles:
            for lo, hi, p in zip(prof.r_lo, prof.r_hi, prof.occupation_prob):
                w.writerow([repr(prof.time), repr(float(lo)), repr(float(hi)), repr(float(p))])


def read_profile_csv(path):
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data


@dataclass
class OracleResult:
    times: np.ndarray
    occupation: np.ndarray  # (times, spins)
    probabilities: np.ndarray  # (times, 2**n)

    @property
    def mean_n_op(self) -> np.ndarray:
        return self.occupation.sum(axis=1)


def spin_rate_matrix(sites: SiteSet, kernel: CouplingKernel, params: SpreadParams) -> np.ndarray:
    """Dense spin-by-spin rate matrix over occupied molecules (diagonal zero)."""
    idx = np.flatnonzero(sites.occupied)
    M = sites.spins_per_site
    n = len(idx) * M
    lam = np.zeros((n, n))
    for a, i in enumerate(idx):
        for b, j in enumerate(idx):
            block = slice(a * M, (a + 1) * M), slice(b * M, (b + 1) * M)
            if i == j:
                lam[block] = params.intra_rate
            else:
                lam[block] = params.infection_scale * float(kernel.rate_at(sites.displacement(i, j)))
    np.fill_diagonal(lam, 0.0)
    return lam


def ctmc_generator(lam: np.ndarray, death_ratio: float) -> sparse.csr_matrix:
    """Generator ``Q`` with ``dp/dt = Q p`` on the 2**n occupancy configurations."""
    n = lam.shape[0]
    states = np.arange(2**n)
    bits = ((states[:, None] >> np.arange(n)[None, :]) & 1).astype(float)
    pressure = bits @ lam  # sum over occupied i of lam[i, j]
    birth = np.where(bits == 0, pressure, 0.0)
    death = np.where(bits == 1, death_ratio * pressure, 0.0)
    rows, cols, vals = [], [], []
    for j in range(n):
        flip = states ^ (1 << j)
        rate = birth[:, j] + death[:, j]
        nz = rate > 0
        rows.append(flip[nz])
        cols.append(states[nz])
        vals.append(rate[nz])
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = np.concatenate(vals)
    out = np.bincount(cols, weights=vals, minlength=2**n)
    q = sparse.coo_matrix(
        (np.concatenate([vals, -out]), (np.concatenate([rows, states]), np.concatenate([cols, states]))),
        shape=(2**n, 2**n),
    )
    return q.tocsr()


def ctmc_oracle(sites: SiteSet, kernel: CouplingKernel, params: SpreadParams,
                sample_times) -> OracleResult:
    """Exact master-equation solution on the full configuration space.

    Works spin by spin (no molecule lumping), so it checks the Monte Carlo
    engine along an independent route.
    """
    n = sites.total_spins
    if n > ORACLE_MAX_SPINS:
        raise SpreadError(f"ctmc_oracle supports at most {ORACLE_MAX_SPINS} spins, got {n}")
    if n == 0:
        raise SpreadError("empty site set")
    times = np.asarray(sample_times, dtype=float)
    if np.any(np.diff(times) < 0) or times[0] < 0:
        raise SpreadError("sample_times must be ascending and nonnegative")
    seed_site = _seed_site(sites, params)
    if not sites.occupied[seed_site]:
        raise SpreadError(f"seed spin lies on diluted (empty) site {seed_site}")
    idx = np.flatnonzero(sites.occupied)
    M = sites.spins_per_site
    local = int(np.searchsorted(idx, seed_site)) * M
    if params.seed_spin is not None:
        local += int(params.seed_spin) % M

    lam = spin_rate_matrix(sites, kernel, params)
    Q = ctmc_generator(lam, params.death_ratio)
    p = np.zeros(2**n)
    p[1 << local] = 1.0
    states = np.arange(2**n)
    bits = ((states[:, None] >> np.arange(n)[None, :]) & 1).astype(float)
    probs = np.empty((times.size, 2**n))
    t_prev = 0.0
    for s, t in enumerate(times):
        if t > t_prev:
            p = expm_multiply(Q * (t - t_prev), p)
            t_prev = t
        probs[s] = p
    return OracleResult(times, probs @ bits, probs)
