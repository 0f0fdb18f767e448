"""Multiple-quantum-coherence spectra: Fourier inversion, moments, Gaussian
cluster-size fits and ingestion of measured cluster-size series.

Coherence orders are counted in units of the total spin ``I_z = Z / 2``, so a
double-quantum flip changes ``n`` by 2. With ``I(phi) = sum_n g_n exp(i n phi)``
sampled on the uniform grid ``phi_k = 2 pi k / M``, the coefficients are
recovered exactly by an inverse DFT as long as no order ``|n| >= M / 2`` is
populated.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    AliasingError,
    EmptyExperimentError,
    ExperimentFormatError,
    MalformedRowError,
    MQCError,
    NoFitError,
    NonAscendingTimeError,
    NonPositiveSizeError,
)

NORMALIZATIONS = ("raw", "unit-sum")
# high-temperature expansion breaks down once the cluster size is this large
WEAK_POLARIZATION_LIMIT = 1e5
DEFAULT_TIME_UNIT_MS = 0.4


@dataclass
class MQCSpectrum:
    n_values: np.ndarray
    g: np.ndarray
    normalization: str = "raw"

    def __post_init__(self):
        self.n_values = np.asarray(self.n_values, dtype=np.int64)
        self.g = np.asarray(self.g, dtype=float)
        if self.n_values.shape != self.g.shape or self.g.ndim != 1:
            raise MQCError("n_values and g must be 1-d arrays of equal length")
        if len(np.unique(self.n_values)) != len(self.n_values):
            raise MQCError("duplicate coherence orders")
        if self.normalization not in NORMALIZATIONS:
            raise MQCError(f"unknown normalization {self.normalization!r}")
        scale = max(float(np.abs(self.g).max(initial=0.0)), 1.0)
        if np.any(self.g < -1e-9 * scale):
            raise MQCError("coherence intensities must be nonnegative")

    def get(self, n: int) -> float:
        hit = np.flatnonzero(self.n_values == n)
        return float(self.g[hit[0]]) if hit.size else 0.0

    def unit_sum(self) -> "MQCSpectrum":
        total = self.g.sum()
        if not total > 0:
            raise MQCError("spectrum has no weight to normalise")
        return MQCSpectrum(self.n_values, self.g / total, "unit-sum")

    def symmetrized(self) -> "MQCSpectrum":
        """``g_n -> (g_n + g_{-n}) / 2`` on the support closed under ``n -> -n``."""
        m = int(np.abs(self.n_values).max(initial=0))
        n = np.arange(-m, m + 1)
        dense = np.zeros(2 * m + 1)
        dense[self.n_values + m] = self.g
        return MQCSpectrum(n, 0.5 * (dense + dense[::-1]), self.normalization)

    def phase_signal(self, phis) -> np.ndarray:
        """``I(phi) = sum_n g_n exp(i n phi)``."""
        phis = np.asarray(phis, dtype=float)
        return np.exp(1j * np.outer(phis, self.n_values)) @ self.g


def phase_grid(n_samples: int) -> np.ndarray:
    return 2 * np.pi * np.arange(n_samples) / n_samples


def gn_from_phase_sweep(I_samples, n_max: int | None = None, imag_tol: float = 1e-8,
                        alias_tol: float = 1e-9) -> MQCSpectrum:
    """Invert ``I(phi_k)`` sampled at ``phi_k = 2 pi k / M`` into ``g_n``.

    Without ``n_max`` the orders ``|n| < M/2`` are returned and any weight in
    the outermost bins is treated as aliasing. With ``n_max`` the grid must
    satisfy ``M >= 2 n_max + 1`` and all bins beyond ``n_max`` must be empty.
    """
    I = np.asarray(I_samples, dtype=complex)
    M = I.size
    if I.ndim != 1 or M == 0:
        raise MQCError("need a 1-d, nonempty phase sweep")
    coef = np.fft.fft(I) / M
    orders = np.rint(np.fft.fftfreq(M) * M).astype(np.int64)
    scale = max(float(np.abs(coef).sum()), 1e-300)
    if n_max is None:
        edge = (M - 1) // 2
        if np.abs(coef[np.abs(orders) >= edge]).max() > alias_tol * scale:
            raise AliasingError(f"weight at the grid edge |n| = {edge}; use more phase samples")
        keep = np.abs(orders) < edge
    else:
        if M < 2 * n_max + 1:
            raise AliasingError(f"{M} phase samples cannot resolve |n| <= {n_max}")
        keep = np.abs(orders) <= n_max
        if np.any(~keep) and np.abs(coef[~keep]).max() > alias_tol * scale:
            raise AliasingError(f"weight beyond |n| = {n_max}; orders alias on this grid")
    order = np.argsort(orders[keep])
    n = orders[keep][order]
    g = coef[keep][order]
    if np.abs(g.imag).max(initial=0.0) > imag_tol * max(scale, 1.0):
        raise MQCError("phase sweep is not the transform of a real spectrum (imaginary residue)")
    return MQCSpectrum(n, g.real, "raw")


def second_moment(spec: MQCSpectrum) -> float:
    """``sum_n n^2 g_n`` of the unit-sum normalised spectrum."""
    s = spec if spec.normalization == "unit-sum" else spec.unit_sum()
    return float(np.sum(s.n_values.astype(float) ** 2 * s.g))


@dataclass
class ClusterFit:
    K: float
    K_err: float
    residual: float
    log_amplitude: float
    flags: list = field(default_factory=list)


def cluster_size_fit(spec: MQCSpectrum, rel_floor: float = 1e-12) -> ClusterFit:
    """Fit ``g_n = A exp(-n^2 / K)`` by least squares on ``log g_n`` against
    ``n^2`` with weights proportional to ``g_n``."""
    g = spec.g
    if g.size == 0 or not g.max() > 0:
        raise NoFitError("empty spectrum")
    use = g > rel_floor * g.max()
    n = spec.n_values[use].astype(float)
    if len(np.unique(np.abs(n))) < 3:
        raise NoFitError("fewer than three distinct |n| carry weight")
    y = np.log(g[use])
    w = g[use] / g[use].mean()
    X = np.stack([np.ones_like(n), n * n], axis=1)
    sw = np.sqrt(w)
    coef, *_ = np.linalg.lstsq(X * sw[:, None], y * sw, rcond=None)
    a, b = coef
    if not b < 0:
        raise NoFitError("spectrum does not decay with |n|")
    r = y - X @ coef
    rss = float(np.sum(w * r * r))
    dof = len(y) - 2
    cov = np.linalg.inv((X * w[:, None]).T @ X) * (rss / dof if dof > 0 else 0.0)
    K = -1.0 / b
    K_err = math.sqrt(max(cov[1, 1], 0.0)) / (b * b)
    flags = ["weak-polarization-limit"] if K > WEAK_POLARIZATION_LIMIT else []
    return ClusterFit(float(K), float(K_err), rss, float(a), flags)


def spectrum_record(spec: MQCSpectrum) -> dict:
    """JSON-ready summary ``{K, K_err, second_moment, flags}``."""
    m2 = second_moment(spec)
    flags = []
    try:
        fit = cluster_size_fit(spec)
        K, K_err = fit.K, fit.K_err
        flags += fit.flags
    except NoFitError:
        K = K_err = None
        flags.append("no-fit")
    if m2 > WEAK_POLARIZATION_LIMIT and "weak-polarization-limit" not in flags:
        flags.append("weak-polarization-limit")
    return {"K": K, "K_err": K_err, "second_moment": m2, "flags": flags}


def write_spectrum_json(spec: MQCSpectrum, path) -> None:
    with open(path, "w") as fh:
        json.dump(spectrum_record(spec), fh, indent=2)


@dataclass
class ExperimentSeries:
    """Measured cluster sizes; ``times`` are in simulation units."""

    times: np.ndarray
    cluster_size: np.ndarray
    err: np.ndarray | None = None
    source: str = ""
    hamiltonian: str = "DQ"
    time_unit_ms: float = DEFAULT_TIME_UNIT_MS

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.cluster_size = np.asarray(self.cluster_size, dtype=float)
        if self.err is not None:
            self.err = np.asarray(self.err, dtype=float)
        if self.hamiltonian not in ("DQ", "YY"):
            raise MQCError(f"unknown Hamiltonian tag {self.hamiltonian!r}")
        if np.any(np.diff(self.times) <= 0):
            raise NonAscendingTimeError("times must be strictly ascending")
        if np.any(self.cluster_size <= 0):
            raise NonPositiveSizeError("cluster sizes must be positive")

    def __len__(self):
        return len(self.times)

    @property
    def times_ms(self) -> np.ndarray:
        return self.times * self.time_unit_ms

    @property
    def flags(self) -> list:
        return ["weak-polarization-limit"] if np.any(self.cluster_size > WEAK_POLARIZATION_LIMIT) else []


def load_experiment(path, time_unit_ms: float = DEFAULT_TIME_UNIT_MS, source: str = "",
                    hamiltonian: str = "DQ", size_scale: float = 1.0) -> ExperimentSeries:
    """Read a ``t_ms,cluster_size[,err]`` CSV.

    ``size_scale`` multiplies sizes (and errors) to convert between reporting
    conventions. Each kind of defect raises its own error type, carrying the
    1-based file line in ``row``.
    """
    if not time_unit_ms > 0:
        raise MQCError("time_unit_ms must be positive")
    with open(path, newline="") as fh:
        lines = [(i + 1, r) for i, r in enumerate(csv.reader(fh)) if r and any(c.strip() for c in r)]
    if not lines:
        raise EmptyExperimentError(f"{path}: empty file")
    lineno, header = lines[0]
    header = [h.strip() for h in header]
    if header not in (["t_ms", "cluster_size"], ["t_ms", "cluster_size", "err"]):
        raise ExperimentFormatError(f"{path}: expected header t_ms,cluster_size[,err], got {','.join(header)}", lineno)
    width = len(header)
    if len(lines) == 1:
        raise EmptyExperimentError(f"{path}: no data rows")
    data = []
    for lineno, row in lines[1:]:
        if len(row) != width:
            raise MalformedRowError(f"{path}: line {lineno} has {len(row)} fields, expected {width}", lineno)
        try:
            vals = [float(c) for c in row]
        except ValueError:
            raise MalformedRowError(f"{path}: line {lineno} is not numeric: {','.join(row)}", lineno) from None
        if not all(math.isfinite(v) for v in vals):
            raise MalformedRowError(f"{path}: line {lineno} has non-finite values", lineno)
        if data and vals[0] <= data[-1][1][0]:
            raise NonAscendingTimeError(f"{path}: time at line {lineno} does not exceed the previous row", lineno)
        if vals[1] <= 0:
            raise NonPositiveSizeError(f"{path}: nonpositive cluster size at line {lineno}", lineno)
        data.append((lineno, vals))
    arr = np.array([v for _, v in data])
    return ExperimentSeries(
        times=arr[:, 0] / time_unit_ms,
        cluster_size=arr[:, 1] * size_scale,
        err=arr[:, 2] * size_scale if width == 3 else None,
        source=source or str(path),
        hamiltonian=hamiltonian,
        time_unit_ms=time_unit_ms,
    )


def write_experiment_csv(series: ExperimentSeries, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        has_err = series.err is not None
        w.writerow(["t_ms", "cluster_size"] + (["err"] if has_err else []))
        for i in range(len(series)):
            row = [repr(float(series.times_ms[i])), repr(float(series.cluster_size[i]))]
            if has_err:
                row.append(repr(float(series.err[i])))
            w.writerow(row)


def write_gn_csv(path, rows) -> None:
    """``rows`` is an iterable of ``(t, MQCSpectrum)``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "n", "g_n"])
        for t, spec in rows:
            for n, g in zip(spec.n_values, spec.g):
                w.writerow([repr(float(t)), int(n), repr(float(g))])
