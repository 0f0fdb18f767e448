"""Exact dynamics: the long-range kicked Ising circuit and dipolar-type Hamiltonians.

Evolvers act on a single state ``(2**L,)`` or on a batch of column states
``(2**L, B)``. ``forward(x, t)`` applies ``U(t)`` (``U**t`` for the circuit,
``exp(-i H t)`` for a Hamiltonian) and ``backward(x, t)`` its inverse, so a
Heisenberg operator is ``O(t) = U(t)^dagger O U(t)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import expm_multiply

from ..errors import OracleError
from .pauli import check_size, pauli_sum, spin_signs

DENSE_MAX_SPINS = 12
MODELS = ("H_DQ", "H_YY", "secular", "generic-random", "custom")


@dataclass
class StateVector:
    n_spins: int
    amplitudes: np.ndarray

    def __post_init__(self):
        check_size(self.n_spins)
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex)
        if self.amplitudes.shape != (2**self.n_spins,):
            raise OracleError("amplitude vector has the wrong length")
        if abs(np.linalg.norm(self.amplitudes) - 1.0) > 1e-10:
            raise OracleError("state is not normalised")

    @classmethod
    def all_up(cls, L):
        psi = np.zeros(2**L, dtype=complex)
        psi[0] = 1.0
        return cls(L, psi)

    @classmethod
    def basis(cls, L, index):
        psi = np.zeros(2**L, dtype=complex)
        psi[index] = 1.0
        return cls(L, psi)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))


def random_states(L: int, n: int, seed: int) -> np.ndarray:
    """``n`` Haar-random states as columns; column ``k`` depends only on ``(seed, k)``."""
    check_size(L)
    out = np.empty((2**L, n), dtype=complex)
    for k in range(n):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(k,)))
        v = rng.standard_normal(2**L) + 1j * rng.standard_normal(2**L)
        out[:, k] = v / np.linalg.norm(v)
    return out


def rotate_all(x: np.ndarray, L: int, c: float, s: complex) -> np.ndarray:
    """Apply ``prod_a (c + s X_a)`` to a state or a batch of states."""
    batch = x.reshape(2**L, -1)
    B = batch.shape[1]
    y = batch.copy()
    for a in range(L):
        v = y.reshape(2 ** (L - 1 - a), 2, 2**a, B)
        v0 = v[:, 0].copy()
        v1 = v[:, 1]
        v[:, 0] = c * v0 + s * v1
        v[:, 1] = s * v0 + c * v1
    return y.reshape(x.shape)


def chain_distances(L: int, boundary: str = "open") -> np.ndarray:
    r = np.arange(L)
    d = np.abs(r[:, None] - r[None, :]).astype(float)
    if boundary == "periodic":
        d = np.minimum(d, L - d)
    elif boundary != "open":
        raise OracleError(f"unknown boundary {boundary!r}")
    return d


@dataclass(frozen=True)
class FloquetSpec:
    """Long-range kicked Ising chain, one period ``U = U_I U_K`` with

    ``U_K = exp(i b sum_r X_r)`` and
    ``U_I = exp(i J sum_{r<r'} d^-alpha Z_r Z_r' + i sum_r h_r Z_r)``.

    ``alpha = inf`` keeps nearest neighbours only. The fields ``h_r`` are
    Gaussian with standard deviation ``h_std`` drawn from a Philox stream
    keyed by ``disorder_seed``.
    """

    n_spins: int
    alpha: float = math.inf
    J: float = math.pi / 4
    b: float = math.pi / 4
    h_std: float = 1.0
    disorder_seed: int = 0
    boundary: str = "open"

    def __post_init__(self):
        check_size(self.n_spins)
        if not self.alpha > 0:
            raise OracleError("alpha must be positive")
        if self.h_std < 0:
            raise OracleError("h_std must be nonnegative")
        chain_distances(1, self.boundary)

    def fields(self) -> np.ndarray:
        rng = np.random.Generator(np.random.Philox(key=self.disorder_seed))
        return rng.normal(0.0, 1.0, self.n_spins) * self.h_std

    def couplings(self) -> np.ndarray:
        """``J / d**alpha`` for each pair, zero on the diagonal."""
        d = chain_distances(self.n_spins, self.boundary)
        with np.errstate(divide="ignore"):
            if math.isinf(self.alpha):
                w = np.where(d == 1, 1.0, 0.0)
            else:
                w = np.where(d > 0, d ** (-self.alpha), 0.0)
        return self.J * w

    def ising_angles(self) -> np.ndarray:
        L = self.n_spins
        s = spin_signs(L).astype(float)
        w = np.triu(self.couplings(), k=1)
        zz = np.einsum("ai,ab,bi->i", s, w, s)
        return zz + self.fields() @ s


@dataclass(frozen=True)
class HamiltonianSpec:
    """Two-body spin Hamiltonian over the couplings ``D[a, b]``.

    ``H_DQ``: ``sum_{a!=b} D (XX - YY)``; ``H_YY``: ``sum_{a!=b} D (YY - XX - ZZ)``;
    ``secular``: ``sum_{a!=b} D (ZZ - XX - YY)``; ``generic-random``: all 15
    non-identity Pauli pairs per bond with Gaussian weights, scaled by
    ``sqrt(3/16)``; ``custom``: explicit ``(coef, sites, axes)`` terms.
    """

    model: str
    couplings: np.ndarray = None
    terms: tuple = ()
    seed: int = 0
    n_spins: int = field(default=None)

    def __post_init__(self):
        if self.model not in MODELS:
            raise OracleError(f"unknown model {self.model!r}")
        if self.model == "custom":
            if self.n_spins is None:
                raise OracleError("custom Hamiltonians need n_spins")
            object.__setattr__(self, "terms", tuple((float(c), tuple(s), tuple(a)) for c, s, a in self.terms))
        else:
            D = np.asarray(self.couplings, dtype=float)
            if D.ndim != 2 or D.shape[0] != D.shape[1]:
                raise OracleError("couplings must be a square matrix")
            if not np.allclose(D, D.T, atol=1e-14):
                raise OracleError("couplings must be symmetric")
            D = D.copy()
            np.fill_diagonal(D, 0.0)
            D.setflags(write=False)
            object.__setattr__(self, "couplings", D)
            object.__setattr__(self, "n_spins", D.shape[0])
        check_size(self.n_spins)

    def pauli_terms(self):
        L = self.n_spins
        if self.model == "custom":
            return list(self.terms)
        D = self.couplings
        pairs = [(a, b) for a in range(L) for b in range(a + 1, L) if D[a, b] != 0]
        out = []
        if self.model == "generic-random":
            rng = np.random.Generator(np.random.Philox(key=self.seed))
            axes = ("I", "X", "Y", "Z")
            scale = math.sqrt(3 / 16)
            for a, b in pairs:
                w = rng.standard_normal(16)
                for k in range(1, 16):
                    mu, nu = axes[k // 4], axes[k % 4]
                    sites, ax = [], []
                    if mu != "I":
                        sites.append(a)
                        ax.append(mu)
                    if nu != "I":
                        sites.append(b)
                        ax.append(nu)
                    out.append((scale * D[a, b] * w[k], tuple(sites), tuple(ax)))
            return out
        signs = {"H_DQ": {"X": 1, "Y": -1, "Z": 0},
                 "H_YY": {"X": -1, "Y": 1, "Z": -1},
                 "secular": {"X": -1, "Y": -1, "Z": 1}}[self.model]
        for a, b in pairs:
            for ax, sg in signs.items():
                if sg:
                    # the sum over ordered pairs counts every bond twice
                    out.append((2 * sg * D[a, b], (a, b), (ax, ax)))
        return out

    def matrix(self) -> sparse.csr_matrix:
        H = pauli_sum(self.n_spins, self.pauli_terms())
        diff = (H - H.getH()).tocsr()
        if diff.nnz and abs(diff).max() > 1e-12:
            raise OracleError("assembled Hamiltonian is not Hermitian")
        return H


def dipolar_couplings(positions, field_axis=(0.0, 0.0, 1.0), scale: float = 1.0) -> np.ndarray:
    """``D[a, b] = scale (3 cos^2 theta - 1) / (2 r^3)`` for point dipoles."""
    pos = np.asarray(positions, dtype=float)
    axis = np.asarray(field_axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    d = pos[None, :, :] - pos[:, None, :]
    r = np.linalg.norm(d, axis=-1)
    np.fill_diagonal(r, np.inf)
    if np.any(r == 0):
        raise OracleError("coincident spins")
    cos_t = (d @ axis) / r
    D = scale * (3 * cos_t**2 - 1) / (2 * r**3)
    np.fill_diagonal(D, 0.0)
    return D


class FloquetEvolver:
    def __init__(self, spec: FloquetSpec):
        self.spec = spec
        self.L = spec.n_spins
        self.phase = np.exp(1j * spec.ising_angles())
        self.c = math.cos(spec.b)
        self.s = math.sin(spec.b)

    def _steps(self, t):
        n = int(round(t))
        if n != t or n < 0:
            raise OracleError(f"circuit time must be a nonnegative integer, got {t}")
        return n

    def _phase(self, x, conj=False):
        ph = np.conj(self.phase) if conj else self.phase
        return ph * x if x.ndim == 1 else ph[:, None] * x

    def forward(self, x, t=1):
        for _ in range(self._steps(t)):
            x = self._phase(rotate_all(x, self.L, self.c, 1j * self.s))
        return x

    def backward(self, x, t=1):
        for _ in range(self._steps(t)):
            x = rotate_all(self._phase(x, conj=True), self.L, self.c, -1j * self.s)
        return x


class HamiltonianEvolver:
    """``exp(-i H t)`` by dense diagonalisation or sparse Krylov-type action."""

    def __init__(self, spec: HamiltonianSpec, method: str = "auto"):
        self.spec = spec
        self.L = spec.n_spins
        self.H = spec.matrix()
        if method == "auto":
            method = "dense" if self.L <= 10 else "krylov"
        if method == "dense":
            if self.L > DENSE_MAX_SPINS:
                raise OracleError(f"dense evolution limited to L <= {DENSE_MAX_SPINS}")
            self.E, self.V = np.linalg.eigh(self.H.toarray())
        elif method != "krylov":
            raise OracleError(f"unknown evolution method {method!r}")
        self.method = method

    def _apply(self, x, t):
        if t < 0:
            raise OracleError("time must be nonnegative")
        if t == 0:
            return x.copy()
        if self.method == "dense":
            ph = np.exp(-1j * self.E * t)
            y = self.V.conj().T @ x
            y = ph * y if y.ndim == 1 else ph[:, None] * y
            return self.V @ y
        return expm_multiply(-1j * t * self.H, x)

    def forward(self, x, t):
        return self._apply(x, t)

    def backward(self, x, t):
        if self.method == "dense":
            ph = np.exp(1j * self.E * t)
            y = self.V.conj().T @ x
            y = ph * y if y.ndim == 1 else ph[:, None] * y
            return self.V @ y
        return expm_multiply(1j * t * self.H, x)


def make_evolver(spec, method: str = "auto"):
    if isinstance(spec, FloquetSpec):
        return FloquetEvolver(spec)
    if isinstance(spec, HamiltonianSpec):
        return HamiltonianEvolver(spec, method)
    raise OracleError(f"unsupported dynamics spec {type(spec).__name__}")


def evolve(state: StateVector, spec, t, method: str = "auto") -> StateVector:
    """Schrodinger evolution of ``state`` to time ``t`` (periods for the circuit)."""
    ev = make_evolver(spec, method)
    if ev.L != state.n_spins:
        raise OracleError("state and dynamics have different sizes")
    out = ev.forward(state.amplitudes, t)
    return StateVector(state.n_spins, out)
