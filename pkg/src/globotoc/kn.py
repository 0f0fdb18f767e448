"""Stochastic cluster-size / coherence-order (Kn space) model for double-quantum dynamics.

A Pauli string on ``K`` spins built from raising, lowering and z operators
carries coherence ``n = #raising - #lowering``. The number of such strings is

    Q(K, n) = sum_{c=|n|}^{K} C(K, c) C(K - c, c - |n|)

(the trinomial coefficient of ``x**n`` in ``(x + 1 + 1/x)**K``). Mass moves on
the (K, n) grid with transition weights built from ratios of ``Q``. Starting
from ``(K, n) = (1, 0)`` only even ``n`` are ever reached.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import breadth_first_order
from scipy.sparse.linalg import spsolve
from scipy.special import gammaln, logsumexp

from .errors import KnError
from .mqc import MQCSpectrum

MODES = ("jump", "rate")


def q_exact(K: int, n: int) -> int:
    """Exact integer Q(K, n); ``Q(K, -n) = Q(K, n)`` and zero when ``|n| > K``."""
    n = abs(n)
    if K < 0 or n > K:
        return 0
    return sum(math.comb(K, c) * math.comb(K - c, c - n) for c in range(n, K + 1))


def q_value(K: int, n: int) -> float:
    """``log Q(K, n)`` by streaming log-sum-exp over log-gamma binomials (``-inf`` for zero)."""
    n = abs(n)
    if K < 0 or n > K:
        return -math.inf
    c = np.arange(n, (K + n) // 2 + 1, dtype=float)
    terms = (gammaln(K + 1) - gammaln(c + 1) - gammaln(K - c + 1)
             + gammaln(K - c + 1) - gammaln(c - n + 1) - gammaln(K - 2 * c + n + 1))
    return float(logsumexp(terms))


def vandermonde_holds(K: int, n: int) -> bool:
    """Exact check of ``sum_x C(K, x) C(K, n + x) == C(2K, K + n)``."""
    lhs = sum(math.comb(K, x) * math.comb(K, n + x) for x in range(0, K + 1) if 0 <= n + x <= K)
    return lhs == math.comb(2 * K, K + n)


def log_q_table(n_max: int) -> np.ndarray:
    """``table[K, |n|] = log Q(K, n)`` for ``0 <= K <= n_max`` via the trinomial recurrence."""
    table = np.full((n_max + 1, n_max + 3), -np.inf)
    table[0, 0] = 0.0
    for K in range(1, n_max + 1):
        prev = table[K - 1]
        # Q(K, n) = Q(K-1, n-1) + Q(K-1, n) + Q(K-1, n+1), with Q(K-1, -1) = Q(K-1, 1)
        left = np.concatenate([[prev[1]], prev[: K]])
        table[K, : K + 1] = np.logaddexp(np.logaddexp(left, prev[: K + 1]), prev[1: K + 2])
    return table[:, : n_max + 1]


def transition_rates(K: int, n: int, N: int) -> dict:
    """Weights of the four moves out of ``(K, n)`` for ``N`` spins in total.

    ``W(K+1, n±2) = K (N-K)/(N-1) [Q(K-1, n) + Q(K-1, n±1)] / Q(K, n)``
    ``W(K-1, n±2) = K (K-1)/(N-1) [Q(K-2, n±2) + Q(K-2, n±1)] / Q(K, n)``
    """
    if N < 2:
        raise KnError("need at least two spins")
    if not 1 <= K <= N or abs(n) > K:
        raise KnError(f"state (K={K}, n={n}) outside 1 <= K <= N, |n| <= K")
    lq = q_value
    base = lq(K, n)
    if base == -np.inf:
        raise KnError(f"state (K={K}, n={n}) is unreachable (Q = 0)")
    grow = K * (N - K) / (N - 1)
    shrink = K * (K - 1) / (N - 1)
    out = {}
    for s in (+1, -1):
        g = np.exp(lq(K - 1, n) - base) + np.exp(lq(K - 1, n + s) - base)
        h = np.exp(lq(K - 2, n + 2 * s) - base) + np.exp(lq(K - 2, n + s) - base)
        out[(K + 1, n + 2 * s)] = float(grow * g)
        out[(K - 1, n + 2 * s)] = float(shrink * h)
    return out


@dataclass
class KnDistribution:
    n_total: int
    mass: np.ndarray  # mass[K, n + n_total]
    step_index: int
    time: float | None = None

    @property
    def n_values(self) -> np.ndarray:
        return np.arange(-self.n_total, self.n_total + 1)

    def gn(self) -> np.ndarray:
        return self.mass.sum(axis=0)

    def k_mean(self) -> float:
        return float(np.arange(self.mass.shape[0]) @ self.mass.sum(axis=1))

    def second_moment(self) -> float:
        n = self.n_values
        return float(self.gn() @ (n * n))


def _lookup(table, K, n):
    """Vectorised ``log Q`` lookup returning ``-inf`` off the support."""
    n = np.abs(n)
    ok = (K >= 0) & (n <= K)
    out = np.full(K.shape, -np.inf)
    out[ok] = table[K[ok], n[ok]]
    return out


class KnChain:
    """Reachable state space and move weights for ``N`` spins.

    States are ``(K, n)`` with ``1 <= K <= N``, even ``|n| <= K`` and
    ``K + n/2`` odd (the class reachable from ``(1, 0)``).
    ``weights[j, i]`` is the weight of the move ``i -> j``.
    """

    def __init__(self, N: int):
        if N < 2:
            raise KnError("need at least two spins")
        self.N = N
        table = log_q_table(N)
        states = [(K, n) for K in range(1, N + 1) for n in range(-(K - K % 2), K + 1, 2)]
        self.states = np.array(states, dtype=np.int64)
        self.index = {s: i for i, s in enumerate(states)}
        K, n = self.states[:, 0], self.states[:, 1]
        base = _lookup(table, K, n)
        grow = K * (N - K) / (N - 1)
        shrink = K * (K - 1) / (N - 1)
        # row offset of the first state with cluster size K, and its smallest n
        first = np.concatenate([[0], np.cumsum([2 * (K_ // 2) + 1 for K_ in range(1, N + 1)])])
        rows, cols, vals = [], [], []
        for s in (+1, -1):
            for dk, pref, terms in (
                (+1, grow, (_lookup(table, K - 1, n), _lookup(table, K - 1, n + s))),
                (-1, shrink, (_lookup(table, K - 2, n + 2 * s), _lookup(table, K - 2, n + s))),
            ):
                w = pref * (np.exp(terms[0] - base) + np.exp(terms[1] - base))
                ok = w > 0
                K2, n2 = K[ok] + dk, n[ok] + 2 * s
                if np.any((K2 < 1) | (K2 > N) | (np.abs(n2) > K2)):
                    raise KnError("a move leaves the (K, n) grid")
                lo = -(K2 - K2 % 2)
                rows.append(first[K2 - 1] + (n2 - lo) // 2)
                cols.append(np.flatnonzero(ok))
                vals.append(w[ok])
        size = len(states)
        W = sparse.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(size, size))
        # every move shifts K and n/2 by one each, so the parity of K + n/2 is
        # conserved; keep only the class reachable from (1, 0)
        keep = np.sort(breadth_first_order(W.T.tocsr(), states.index((1, 0)), directed=True,
                                           return_predecessors=False))
        self.states = self.states[keep]
        self.index = {(int(k), int(m)): i for i, (k, m) in enumerate(self.states)}
        self.weights = W[keep][:, keep].tocsr()
        self.outflow = np.asarray(self.weights.sum(axis=0)).ravel()

    @property
    def size(self) -> int:
        return len(self.states)

    def jump_matrix(self) -> sparse.csr_matrix:
        """Column-stochastic matrix: each state's outflow normalised to one."""
        return (self.weights @ sparse.diags(1.0 / self.outflow)).tocsr()

    def generator(self) -> sparse.csr_matrix:
        return (self.weights - sparse.diags(self.outflow)).tocsr()

    def initial(self) -> np.ndarray:
        p = np.zeros(self.size)
        p[self.index[(1, 0)]] = 1.0
        return p

    def to_distribution(self, p, step, time=None) -> KnDistribution:
        N = self.N
        mass = np.zeros((N + 1, 2 * N + 1))
        mass[self.states[:, 0], self.states[:, 1] + N] = p
        return KnDistribution(N, mass, step, time)

    def moments(self, p):
        K = self.states[:, 0]
        n = self.states[:, 1]
        return float(K @ p), float((n * n) @ p)


def iter_master(N: int, n_steps: int, mode: str = "jump", dt: float = 0.05):
    """Yield ``(step, time, probability vector, chain)`` for steps ``0..n_steps``.

    ``jump``: each step moves all mass along the four channels with
    probabilities proportional to the weights (time is the step count).
    ``rate``: continuous-time master equation with the weights as rates,
    sampled every ``dt`` (propagated by uniformization).
    """
    if mode not in MODES:
        raise KnError(f"unknown mode {mode!r}")
    chain = KnChain(N)
    p = chain.initial()
    yield 0, 0.0, p, chain
    if mode == "jump":
        P = chain.jump_matrix()
        for s in range(1, n_steps + 1):
            p = P @ p
            yield s, float(s), p, chain
    else:
        step = _Uniformizer(chain, dt)
        for s in range(1, n_steps + 1):
            p = step(p)
            yield s, s * dt, p, chain


class _Uniformizer:
    """Exact-in-distribution propagator ``exp(G dt)`` by uniformization.

    With ``lam >= max outflow``, ``P = I + G / lam`` is column stochastic and
    ``exp(G dt) = sum_k Pois(k; lam dt) P^k``. Every term is nonnegative, so
    positivity and total probability survive to rounding. Long steps are
    split so that ``lam * dt`` stays moderate.
    """

    def __init__(self, chain, dt, max_lam_dt=40.0, tail=1e-16):
        if not dt > 0:
            raise KnError("dt must be positive")
        lam = float(chain.outflow.max())
        n_sub = max(1, math.ceil(lam * dt / max_lam_dt))
        self.n_sub = n_sub
        self.P = (sparse.identity(chain.size, format="csr") + chain.generator() / lam).tocsr()
        x = lam * dt / n_sub
        # Poisson weights up to the point past the mode where they drop below ``tail``
        w = [math.exp(-x)]
        while len(w) <= x or w[-1] > tail:
            w.append(w[-1] * x / len(w))
        self.w = np.array(w)

    def __call__(self, p):
        for _ in range(self.n_sub):
            term = p
            acc = self.w[0] * term
            for wk in self.w[1:]:
                term = self.P @ term
                acc += wk * term
            p = acc / acc.sum()
        return p


def evolve_master(N: int, n_steps: int, mode: str = "jump", dt: float = 0.05) -> list:
    """All distributions for steps ``0..n_steps`` (memory grows as steps * N**2)."""
    return [chain.to_distribution(p, s, t) for s, t, p, chain in iter_master(N, n_steps, mode, dt)]


def stationary_kn(N: int, mode: str = "jump", tol: float = 1e-13, max_steps: int = 200000) -> KnDistribution:
    """Long-time limit. The jump chain has period two (K changes parity every
    step), so consecutive steps are averaged before testing convergence."""
    chain = KnChain(N)
    p = chain.initial()
    if mode == "jump":
        P = chain.jump_matrix()
        prev = None
        for s in range(1, max_steps + 1):
            q = P @ p
            avg = 0.5 * (p + q)
            if prev is not None and np.abs(avg - prev).max() < tol:
                return chain.to_distribution(avg, s)
            prev, p = avg, q
        raise KnError("jump chain did not converge")
    # continuous time: solve G q = 0 with one balance row replaced by sum(q) = 1
    G = chain.generator().tolil()
    G[0, :] = np.ones(chain.size)
    rhs = np.zeros(chain.size)
    rhs[0] = 1.0
    q = spsolve(G.tocsc(), rhs)
    return chain.to_distribution(np.clip(q, 0.0, None) / np.clip(q, 0.0, None).sum(), -1, math.inf)


def mqc_from_kn(dist: KnDistribution) -> MQCSpectrum:
    """Marginalise over K: ``g_n = sum_K g_{Kn}``."""
    return MQCSpectrum(dist.n_values.copy(), dist.gn(), "unit-sum")


def otoc_series_kn(N: int, n_steps: int, mode: str = "rate", dt: float = 0.05):
    """Second moment ``sum_n n^2 g_n`` and mean cluster size at each step.

    Returns ``(times, second_moment, k_mean)`` arrays of length ``n_steps + 1``.
    """
    times, m2, km = [], [], []
    for s, t, p, chain in iter_master(N, n_steps, mode, dt):
        k, m = chain.moments(p)
        times.append(t)
        km.append(k)
        m2.append(m)
    return np.array(times), np.array(m2), np.array(km)


def write_moments_csv(path, steps, k_mean, second_moment) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "K_mean", "second_moment"])
        for s, k, m in zip(steps, k_mean, second_moment):
            w.writerow([int(s), repr(float(k)), repr(float(m))])


def write_gn_csv(path, dists) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "n", "g_n"])
        for d in dists:
            g = d.gn()
            for n, v in zip(d.n_values, g):
                w.writerow([d.step_index, int(n), repr(float(v))])
