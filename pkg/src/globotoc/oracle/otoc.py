"""Local, global and off-diagonal OTOCs, exact MQC spectra and the pure-state
phase-rotation protocol.

OTOCs use the Pauli normalisation, e.g. ``C_ab(t) = -tr([Z_a(t), Z_b]^2) / 2^N``;
MQC quantities use ``I_z = Z / 2``. Traces are evaluated either exactly, from
dense Heisenberg operators (``L <= 12``), or by averaging ``<psi|.|psi>`` over
Haar-random states, for which the returned ``stderr`` is the standard error of
the mean over states.

For Hermitian ``A, B`` the commutator is anti-Hermitian, so
``-<psi|[A,B][C,D]|psi> = <[A,B] psi | [C,D] psi>``; all random-state terms are
inner products of the vectors ``v_ab = [A_a(t), B_b] psi``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from ..errors import AliasingError, OracleError
from ..mqc import MQCSpectrum, gn_from_phase_sweep, phase_grid
from .models import DENSE_MAX_SPINS, make_evolver, random_states, rotate_all
from .pauli import OperatorSpec, apply_operator, apply_string, operator_matrix, spin_signs, total_z

METHODS = ("exact", "random")
PLACEMENTS = ("second-at-zero", "equal-time")


class Estimate(NamedTuple):
    value: float
    stderr: float = 0.0

    def __float__(self):
        return float(self.value)


def _mean_err(samples) -> Estimate:
    x = np.asarray(samples, dtype=float)
    err = float(x.std(ddof=1) / math.sqrt(x.size)) if x.size > 1 else 0.0
    return Estimate(float(x.mean()), err)


def _check_dense(L):
    if L > DENSE_MAX_SPINS:
        raise OracleError(f"exact traces need dense operators; limited to L <= {DENSE_MAX_SPINS}")


def _check_method(method):
    if method not in METHODS:
        raise OracleError(f"unknown method {method!r}")


def heisenberg(ev, A: np.ndarray, t) -> np.ndarray:
    """Dense ``U(t)^dagger A U(t)``, built by evolving columns."""
    AU = ev.backward(A.conj().T, t).conj().T
    return ev.backward(AU, t)


def heisenberg_operator(spec, op: OperatorSpec, t, evolver=None) -> np.ndarray:
    ev = evolver or make_evolver(spec)
    _check_dense(ev.L)
    return heisenberg(ev, operator_matrix(ev.L, op).toarray(), t)


def heisenberg_series(spec, op: OperatorSpec, times, evolver=None):
    """Yield ``(t, O(t))`` for ascending ``times``, stepping incrementally."""
    ev = evolver or make_evolver(spec)
    _check_dense(ev.L)
    A = operator_matrix(ev.L, op).toarray()
    prev = 0
    for t in times:
        if t < prev:
            raise OracleError("times must be ascending")
        if t > prev:
            A = heisenberg(ev, A, t - prev)
        prev = t
        yield t, A


def _heis_apply(ev, op, x, t):
    """``O(t) x = U^dagger O U x`` for a state or a batch."""
    return ev.backward(apply_operator(ev.forward(x, t), ev.L, op), t)


def _commutator_vectors(ev, A: OperatorSpec, B: OperatorSpec, t, psi):
    return _heis_apply(ev, A, apply_operator(psi, ev.L, B), t) - apply_operator(_heis_apply(ev, A, psi, t), ev.L, B)


def _local_profile_dense(A, L, axis):
    """``C_ab`` for every ``b`` from a dense ``A = A_a(t)``."""
    N = 2**L
    if axis == "Z":
        P = np.abs(A) ** 2
        S = spin_signs(L).astype(float)
        return (2 * P.sum() - 2 * np.einsum("bi,ij,bj->b", S, P, S)) / N
    out = np.empty(L)
    for b in range(L):
        B = operator_matrix(L, OperatorSpec.single(b, axis))
        K = np.asarray(A @ B) - np.asarray((B @ A))
        out[b] = np.vdot(K, K).real / N
    return out


def local_otoc(a, b, t, spec, method="exact", n_states=20, seed=0, axis="Z") -> Estimate:
    """``-tr([P_a(t), P_b]^2) / 2^N`` for Pauli axis ``P``."""
    _check_method(method)
    ev = make_evolver(spec)
    L = ev.L
    if not (0 <= a < L and 0 <= b < L):
        raise OracleError("site outside the chain")
    if method == "exact":
        A = heisenberg_operator(spec, OperatorSpec.single(a, axis), t, ev)
        if axis == "Z":
            return Estimate(float(_local_profile_dense_single(A, L, b)))
        return Estimate(float(_local_profile_dense(A, L, axis)[b]))
    psi = random_states(L, n_states, seed)
    v = _commutator_vectors(ev, OperatorSpec.single(a, axis), OperatorSpec.single(b, axis), t, psi)
    return _mean_err(np.sum(np.abs(v) ** 2, axis=0))


def _local_profile_dense_single(A, L, b):
    P = np.abs(A) ** 2
    s = spin_signs(L)[b].astype(float)
    return (2 * P.sum() - 2 * s @ P @ s) / 2**L


def local_otoc_profile(a, times, spec, axis="Z"):
    """Exact ``C_ab(t)`` for all ``b``; returns an array ``(len(times), L)``."""
    ev = make_evolver(spec)
    rows = [_local_profile_dense(A, ev.L, axis)
            for _, A in heisenberg_series(spec, OperatorSpec.single(a, axis), times, ev)]
    return np.array(rows)


def global_otoc(t, spec, method="exact", n_states=20, seed=0) -> Estimate:
    """``-tr([Z(t), Z]^2) / 2^N`` with ``Z`` the total Pauli Z."""
    _check_method(method)
    ev = make_evolver(spec)
    L = ev.L
    Z = OperatorSpec.total("Z")
    if method == "exact":
        A = heisenberg_operator(spec, Z, t, ev)
        return Estimate(_global_dense(A, L))
    psi = random_states(L, n_states, seed)
    v = _commutator_vectors(ev, Z, Z, t, psi)
    return _mean_err(np.sum(np.abs(v) ** 2, axis=0))


def _global_dense(A, L):
    m = total_z(L)
    return float(np.sum(np.abs(A) ** 2 * (m[:, None] - m[None, :]) ** 2) / 2**L)


def global_otoc_series(times, spec) -> np.ndarray:
    ev = make_evolver(spec)
    return np.array([_global_dense(A, ev.L) for _, A in heisenberg_series(spec, OperatorSpec.total("Z"), times, ev)])


def offdiag_otoc(a, b, c, d, t, spec, method="exact", n_states=20, seed=0, axis="Z") -> Estimate:
    """``-tr([P_a(t), P_b][P_c(t), P_d]) / 2^N`` for ``(a, b) != (c, d)``."""
    _check_method(method)
    if (a, b) == (c, d):
        raise OracleError("off-diagonal term needs (a, b) != (c, d); use local_otoc")
    ev = make_evolver(spec)
    L = ev.L
    ops = [OperatorSpec.single(s, axis) for s in (a, b, c, d)]
    if method == "exact":
        _check_dense(L)
        K = []
        for A_op, B_op in ((ops[0], ops[1]), (ops[2], ops[3])):
            A = heisenberg_operator(spec, A_op, t, ev)
            B = operator_matrix(L, B_op)
            K.append(np.asarray(A @ B) - np.asarray(B @ A))
        return Estimate(float(np.vdot(K[0], K[1]).real / 2**L))
    psi = random_states(L, n_states, seed)
    v1 = _commutator_vectors(ev, ops[0], ops[1], t, psi)
    v2 = _commutator_vectors(ev, ops[2], ops[3], t, psi)
    return _mean_err(np.sum(v1.conj() * v2, axis=0).real)


def _gram_batch(ev, t, psi, axis):
    """Gram matrices ``<v_ab|v_cd>`` for each column of ``psi``: ``(k, L*L, L*L)``."""
    L, N = ev.L, 2**ev.L
    k = psi.shape[1]
    strings = [((a,), (axis,)) for a in range(L)]
    f0 = ev.forward(psi, t)
    fb = ev.forward(np.concatenate([apply_string(psi, L, *s) for s in strings], axis=1), t)
    h = ev.backward(np.concatenate([apply_string(f0, L, *s) for s in strings], axis=1), t)
    g = ev.backward(np.concatenate([apply_string(fb, L, *s) for s in strings], axis=1), t)
    g = g.reshape(N, L, L, k)   # [:, a, b, state]
    h = h.reshape(N, L, k)      # [:, a, state]
    v = g - np.stack([apply_string(h.reshape(N, L * k), L, *strings[b]).reshape(N, L, k)
                      for b in range(L)], axis=2)
    v = v.reshape(N, L * L, k)
    return np.einsum("nik,njk->kij", v.conj(), v)


@dataclass
class OTOCDecomposition:
    """Split of the global OTOC into diagonal and off-diagonal terms.

    ``terms[a, b, c, d] = -tr([P_a(t), P_b][P_c(t), P_d]) / 2^N``.
    """

    t: float
    terms: np.ndarray
    total: Estimate
    diagonal_sum: Estimate
    offdiag_sum: Estimate
    max_offdiag: float

    @property
    def diagonal(self) -> np.ndarray:
        L = self.terms.shape[0]
        return np.einsum("abab->ab", self.terms.reshape(L, L, L, L)).copy()

    @property
    def relative_offdiag(self) -> float:
        if self.total.value == 0:
            return 0.0 if self.diagonal_sum.value == 0 else math.inf
        return abs(self.total.value - self.diagonal_sum.value) / self.total.value


def decompose_otoc(t, spec, method="random", n_states=2, seed=0, axis="Z", chunk=16) -> OTOCDecomposition:
    """All ``L**4`` terms of the global OTOC at time ``t``.

    ``exact`` sums over the full computational basis (practical for ``L <= 8``);
    ``random`` averages over ``n_states`` Haar states.
    """
    _check_method(method)
    ev = make_evolver(spec)
    L, N = ev.L, 2**ev.L
    if method == "exact":
        acc = np.zeros((L * L, L * L), dtype=complex)
        for lo in range(0, N, chunk):
            basis = np.zeros((N, min(chunk, N - lo)), dtype=complex)
            basis[np.arange(lo, lo + basis.shape[1]), np.arange(basis.shape[1])] = 1.0
            acc += _gram_batch(ev, t, basis, axis).sum(axis=0)
        per_state = (acc / N).real[None]
    else:
        per_state = np.concatenate([_gram_batch(ev, t, random_states(L, n_states, seed)[:, [k]], axis)
                                    for k in range(n_states)]).real
    eye = np.eye(L * L, dtype=bool)
    totals = per_state.sum(axis=(1, 2))
    diags = np.trace(per_state, axis1=1, axis2=2)
    terms = per_state.mean(axis=0)
    off = np.abs(np.where(eye, 0.0, terms)).max()
    return OTOCDecomposition(
        t=t,
        terms=terms.reshape(L, L, L, L),
        total=_mean_err(totals),
        diagonal_sum=_mean_err(diags),
        offdiag_sum=_mean_err(totals - diags),
        max_offdiag=float(off),
    )


def app_d_diagnostic(t, spec, seed=0, placement="second-at-zero", axis="X", site=0, ref=1):
    """``<psi|[P_site(t), P_r][P_site(t), P_ref]|psi>`` for every ``r`` on one Haar state.

    ``ref`` picks the diagonal entry ``r = ref``. With ``placement="equal-time"``
    every operator is evolved, ``[P_site(t), P_r(t)]``, which vanishes for
    ``r != site`` because the commutator of distinct single-site Paulis is zero.
    """
    if placement not in PLACEMENTS:
        raise OracleError(f"unknown placement {placement!r}")
    ev = make_evolver(spec)
    L = ev.L
    psi = random_states(L, 1, seed)[:, 0]
    A = OperatorSpec.single(site, axis)

    def kvec(r):
        B = OperatorSpec.single(r, axis)
        if placement == "second-at-zero":
            return _commutator_vectors(ev, A, B, t, psi)
        x = ev.forward(psi, t)
        y = apply_operator(apply_operator(x, L, B), L, A) - apply_operator(apply_operator(x, L, A), L, B)
        return ev.backward(y, t)

    vecs = [kvec(r) for r in range(L)]
    # <psi|K_r K_ref|psi> = -<K_r psi|K_ref psi> for anti-Hermitian K_r
    return np.array([-np.vdot(vecs[r], vecs[ref]) for r in range(L)])


def _iz_heisenberg(t, spec, ev):
    return 0.5 * heisenberg_operator(spec, OperatorSpec.total("Z"), t, ev)


def mqc_exact(t, spec, n_max=None, n_phi=None) -> MQCSpectrum:
    """``g_n`` from a phase sweep of
    ``I(phi) = tr(e^{i phi I_z} I_z(t) e^{-i phi I_z} I_z(t)) / tr(I_z^2)``."""
    ev = make_evolver(spec)
    L = ev.L
    n_max = L if n_max is None else n_max
    if not 0 <= n_max <= L:
        raise OracleError("n_max must lie in 0..L")
    n_phi = 2 * n_max + 2 if n_phi is None else n_phi
    if n_phi < 2 * n_max + 1:
        raise AliasingError(f"{n_phi} phase samples cannot resolve |n| <= {n_max}")
    A = _iz_heisenberg(t, spec, ev)
    m = total_z(L) / 2
    norm = 2**L * L / 4
    samples = []
    for phi in phase_grid(n_phi):
        d = np.exp(1j * phi * m)
        samples.append(np.sum((d[:, None] * A * d.conj()[None, :]) * A.T) / norm)
    spec_out = gn_from_phase_sweep(np.array(samples), n_max=n_max)
    return MQCSpectrum(spec_out.n_values, np.clip(spec_out.g, 0.0, None), "unit-sum")


def mqc_commutator_moment(t, spec) -> float:
    """``-tr([I_z, I_z(t)]^2) / tr(I_z^2)`` by explicit matrix products."""
    ev = make_evolver(spec)
    L = ev.L
    A = _iz_heisenberg(t, spec, ev)
    Iz = np.diag(total_z(L) / 2).astype(complex)
    K = Iz @ A - A @ Iz
    return float(-np.trace(K @ K).real / (2**L * L / 4))


@dataclass
class PhaseProtocolResult:
    value: float
    analytic: float
    residual: float
    table: np.ndarray


def phase_protocol_pure(t, spec, phi_steps=None, tol=1e-6) -> PhaseProtocolResult:
    """Second phase derivative of the all-up pure-state protocol.

    ``F(phi) = <psi(t)| e^{-i phi X} Z(-t) e^{i phi X} |psi(t)>`` with
    ``psi(t) = U(t)|up...up>`` and ``Z(-t) = U(t) Z U(t)^dagger``. The reported
    ``value`` is ``-F''(0) = -tr([X, rho(t)][X, Z(-t)])``, obtained from central
    differences at geometrically shrinking steps with Richardson extrapolation; ``analytic``
    evaluates ``<psi(t)|[X, [X, Z(-t)]]|psi(t)>`` directly.
    """
    ev = make_evolver(spec)
    L = ev.L
    psi0 = np.zeros(2**L, dtype=complex)
    psi0[0] = 1.0
    psi = ev.forward(psi0, t)
    Z = OperatorSpec.total("Z")
    X = OperatorSpec.total("X")

    def O(x):
        return ev.forward(apply_operator(ev.backward(x, t), L, Z), t)

    def F(phi):
        chi = rotate_all(psi, L, math.cos(phi), 1j * math.sin(phi))
        return np.vdot(chi, O(chi)).real

    if phi_steps is None:
        phi_steps = [0.2 / L / 2**k for k in range(4)]
    phi_steps = np.asarray(phi_steps, dtype=float)
    if phi_steps.size < 2 or np.any(phi_steps <= 0):
        raise OracleError("need at least two positive phase steps")
    f0 = F(0.0)
    n = phi_steps.size
    R = np.full((n, n), np.nan)
    for i, h in enumerate(phi_steps):
        R[i, 0] = (F(h) - 2 * f0 + F(-h)) / h**2
        for j in range(1, i + 1):
            q = (phi_steps[i - 1] / phi_steps[i]) ** (2 * j)
            R[i, j] = R[i, j - 1] + (R[i, j - 1] - R[i - 1, j - 1]) / (q - 1)
    value = -R[-1, -1]
    residual = abs(R[-1, -1] - R[-2, -2])
    if residual > tol * max(1.0, abs(value)):
        raise OracleError(f"phase step too large: extrapolation residual {residual:.3g}")
    Xpsi = apply_operator(psi, L, X)
    XXpsi = apply_operator(Xpsi, L, X)
    analytic = 2 * np.vdot(XXpsi, O(psi)).real - 2 * np.vdot(Xpsi, O(Xpsi)).real
    return PhaseProtocolResult(float(value), float(analytic), float(residual), R)


def mixed_phase_reference(t, spec) -> float:
    """Mixed-state counterpart ``-tr([X, Z(-t)]^2) / 2^N`` (dense, ``L <= 12``)."""
    ev = make_evolver(spec)
    L = ev.L
    _check_dense(L)
    Zm = operator_matrix(L, OperatorSpec.total("Z")).toarray()
    # Z(-t) = U Z U^dagger
    O = ev.forward(ev.forward(Zm, t).conj().T, t).conj().T
    Xm = operator_matrix(L, OperatorSpec.total("X"))
    K = np.asarray(Xm @ O) - np.asarray((Xm.T @ O.T).T)
    return float(np.vdot(K, K).real / 2**L)


def write_local_otoc_csv(path, rows) -> None:
    """``rows``: iterable of ``(t, r, value)``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "r", "local_otoc"])
        for t, r, v in rows:
            w.writerow([repr(float(t)), int(r), repr(float(v))])


def write_global_otoc_csv(path, rows) -> None:
    """``rows``: iterable of ``(t, value, estimator_err)``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "global_otoc", "estimator_err"])
        for t, v, e in rows:
            w.writerow([repr(float(t)), repr(float(v)), repr(float(e))])
