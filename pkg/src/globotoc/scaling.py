"""Light-cone regimes of power-law interacting chains and lattices, predicted
global-OTOC growth, and the two-parameter fit of simulated cluster-size curves
to measured ones.

Regimes are indexed by the interaction exponent ``alpha`` (couplings ``~ r^-alpha``)
relative to the dimension ``d``; the singled-out exponents ``d``, ``d + 1/2`` and
``d + 1`` each get their own row.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.optimize import minimize

from .errors import FitError, WindowMismatchError

REGIMES = (
    "stretched-exponential",   # [d/2, d)
    "alpha-equals-d",          # d
    "power-law",               # (d, d + 1/2)
    "t-log-t",                 # d + 1/2
    "linear-anomalous",        # (d + 1/2, d + 1)
    "linear-log-broadening",   # d + 1
    "linear-diffusive",        # (d + 1, inf)
)
TAIL_CAVEAT = "tail-numerical-support-d1-only"
CONJECTURE_CAVEAT = "tail-dominated-growth"
_EPS = 1e-12


@dataclass
class ScalingRegime:
    regime_id: str
    alpha: float
    d: int
    light_cone: str
    scaling_function: str
    tail: str
    B: float | None = None
    eta: float | None = None
    caveats: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def classify_regime(alpha: float, d: int) -> ScalingRegime:
    """Table row for ``alpha >= d / 2``; the point ``alpha = d + 1`` belongs to
    its own row (front broadening ``(t ln t)^(1/2)``)."""
    if int(d) != d or d < 1:
        raise FitError("dimension must be a positive integer")
    if not math.isfinite(alpha) and alpha > 0:
        alpha = math.inf
    elif not alpha >= d / 2 - _EPS:
        raise FitError(f"alpha = {alpha} below d/2 = {d / 2}: no light-cone prediction")
    star = "1/r^(2 alpha)*"
    B = eta = None
    if alpha < d - _EPS:
        B = d * math.log(2) / (2 * (alpha - d) ** 2)
        eta = math.log2(d / alpha)
        row = ("stretched-exponential", "exp(B t^eta)", "C(r / exp(B t^eta))", star)
    elif abs(alpha - d) <= _EPS:
        row = ("alpha-equals-d", "exp((ln t)^2 / (4 d ln 2))", "C(r / t^((1/(4d)) log2 t))", star)
    elif alpha < d + 0.5 - _EPS:
        row = ("power-law", "t^(1/(2 alpha - 2d))", "C(r / t^(1/(2 alpha - 2d)))", star)
    elif abs(alpha - d - 0.5) <= _EPS:
        row = ("t-log-t", "t ln t", "C(r / (t ln t))", star)
    elif alpha < d + 1 - _EPS:
        row = ("linear-anomalous", "v_B t", "C((r - v_B t) / t^(1/(2 alpha - 2d)))", "1/r^(2 alpha - 2d)*")
    elif abs(alpha - d - 1) <= _EPS:
        row = ("linear-log-broadening", "v_B t", "C((r - v_B t) / (t ln t)^(1/2))", "erf")
    else:
        row = ("linear-diffusive", "v_B t", "C((r - v_B t) / t^(1/2))", "erf")
    caveats = []
    if row[3].endswith("*") and d > 1:
        caveats.append(TAIL_CAVEAT)
    if row[0] == "stretched-exponential":
        caveats.append(CONJECTURE_CAVEAT)
    return ScalingRegime(row[0], float(alpha), int(d), row[1], row[2], row[3], B, eta, caveats)


def predicted_global_otoc(regime: ScalingRegime, t) -> np.ndarray:
    """Leading time dependence of the global OTOC, up to a constant (``t > 1``).

    Below ``d + 1/2`` the power-law tail ``(R(t)/r)^(2 alpha)`` of the local
    OTOC dominates the spatial sum, giving ``R(t)^(2 alpha)``; from
    ``d + 1/2`` on the light cone is (nearly) linear and the light-cone volume
    ``R(t)^d`` is returned.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t <= 1):
        raise FitError("asymptotic forms need t > 1")
    a, d = regime.alpha, regime.d
    rid = regime.regime_id
    if rid == "stretched-exponential":
        return np.exp(2 * a * regime.B * t**regime.eta)
    if rid == "alpha-equals-d":
        return t ** (0.5 * np.log2(t))
    if rid == "power-law":
        return t ** (a / (a - d))
    if rid == "t-log-t":
        return (t * np.log(t)) ** d
    return t**d


@dataclass
class FitResult:
    J: float
    shift: float
    residual: float
    covariance: np.ndarray
    n_points: int
    regime: ScalingRegime | None = None
    caveats: list = field(default_factory=list)
    power_law: tuple | None = None

    def report(self) -> dict:
        out = {
            "J": self.J,
            "shift": self.shift,
            "residual": self.residual,
            "covariance": np.asarray(self.covariance).tolist(),
            "regime": self.regime.to_dict() if self.regime else None,
            "caveats": list(self.caveats),
        }
        if self.power_law is not None:
            out["power_law"] = {"exponent": self.power_law[0], "prefactor": self.power_law[1]}
        return out

    def write_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.report(), fh, indent=2, allow_nan=True)


class _Objective:
    """``S(J, shift) = sum_k (log N_sim(J (t_k - shift)) - log N_exp(t_k))^2``."""

    def __init__(self, sim_t, sim_n, exp_t, exp_n):
        sim_t = np.asarray(sim_t, dtype=float)
        sim_n = np.asarray(sim_n, dtype=float)
        if sim_t.size < 2 or np.any(np.diff(sim_t) <= 0):
            raise FitError("simulation times must be strictly ascending")
        if np.any(sim_n <= 0):
            raise FitError("simulated sizes must be positive")
        self.lo, self.hi = sim_t[0], sim_t[-1]
        self.interp = PchipInterpolator(sim_t, np.log(sim_n), extrapolate=False)
        self.t = np.asarray(exp_t, dtype=float)
        self.y = np.log(np.asarray(exp_n, dtype=float))

    def __call__(self, p):
        J, shift = p
        if not J > 0:
            return math.inf
        tau = J * (self.t - shift)
        if tau.min() < self.lo - 1e-12 or tau.max() > self.hi + 1e-12:
            return math.inf
        r = self.interp(np.clip(tau, self.lo, self.hi)) - self.y
        return float(r @ r)


def _hessian(f, p, steps):
    p = np.asarray(p, dtype=float)
    H = np.empty((2, 2))
    f0 = f(p)
    for i in range(2):
        e = np.zeros(2)
        e[i] = steps[i]
        H[i, i] = (f(p + e) - 2 * f0 + f(p - e)) / steps[i] ** 2
    e0 = np.array([steps[0], 0.0])
    e1 = np.array([0.0, steps[1]])
    H[0, 1] = H[1, 0] = (f(p + e0 + e1) - f(p + e0 - e1) - f(p - e0 + e1) + f(p - e0 - e1)) / (4 * steps[0] * steps[1])
    return H


def fit_experiment(sim, exp, J_range=(0.5, 5.0), shift_range=(-3.0, 3.0), grid=(61, 61),
                   regime: ScalingRegime | None = None) -> FitResult:
    """Fit rate scale ``J`` and time shift so that ``N_sim(J (t - shift))`` matches ``N_exp(t)``.

    ``sim`` needs ``times`` and ``n_op_mean``; ``exp`` needs ``times`` and
    ``cluster_size`` (dimensionless time units). The simulated curve is
    interpolated monotonically inside its window and never extrapolated.
    A log-spaced ``J`` by linear ``shift`` grid seeds a Nelder-Mead refinement;
    the covariance comes from the local quadratic model,
    ``2 s^2 H^-1`` with ``s^2 = S / (n - 2)``.
    """
    exp_t = np.asarray(exp.times, dtype=float)
    if exp_t.size < 3:
        raise FitError("need at least three experimental points")
    f = _Objective(sim.times, sim.n_op_mean, exp_t, exp.cluster_size)
    Js = np.geomspace(J_range[0], J_range[1], grid[0])
    shifts = np.linspace(shift_range[0], shift_range[1], grid[1])
    S = np.array([[f((J, s)) for s in shifts] for J in Js])
    if not np.isfinite(S).any():
        raise WindowMismatchError("simulation window cannot cover the experiment for any (J, shift) on the grid")
    i, j = np.unravel_index(np.argmin(S), S.shape)
    start = np.array([Js[i], shifts[j]])
    res = minimize(f, start, method="Nelder-Mead",
                   options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 4000})
    best = res.x if res.fun <= S[i, j] else start
    resid = f(best)
    n = exp_t.size
    steps = (1e-4 * max(abs(best[0]), 1e-3), 1e-4 * max(abs(best[1]), 1.0))
    cov = np.full((2, 2), np.nan)
    H = _hessian(f, best, steps)
    if np.all(np.isfinite(H)) and n > 2:
        try:
            cov = 2 * (resid / (n - 2)) * np.linalg.inv(H)
        except np.linalg.LinAlgError:
            pass
    caveats = list(regime.caveats) if regime else []
    # the free power law is only a side summary; skip it when t > 0 has too few points
    plaw = power_law_fit(exp_t, exp.cluster_size) if (exp_t > 0).sum() >= 2 else None
    return FitResult(float(best[0]), float(best[1]), float(resid), cov, n, regime, caveats, plaw)


def power_law_fit(times, sizes) -> tuple:
    """``N = A t^p`` by least squares in log-log over ``t > 0``; returns ``(p, A)``."""
    t = np.asarray(times, dtype=float)
    n = np.asarray(sizes, dtype=float)
    use = t > 0
    if use.sum() < 2:
        raise FitError("power-law fit needs two points with t > 0")
    p, logA = np.polyfit(np.log(t[use]), np.log(n[use]), 1)
    return float(p), float(math.exp(logA))
