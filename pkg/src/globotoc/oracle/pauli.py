"""Pauli operators on the computational basis of ``L`` spin-1/2s.

Spin ``a`` is bit ``a`` of the basis index; bit 0 is spin up, so
``Z_a |i> = s_a(i) |i>`` with ``s_a(i) = 1 - 2 bit_a(i)`` and the all-up state
is index 0. A Pauli string acts as ``(P x)[j] = phase[j] * x[j ^ flip]``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import sparse

from ..errors import OracleError

AXES = ("X", "Y", "Z")
MAX_SPINS = 24


def check_size(L: int) -> None:
    if not 1 <= L <= MAX_SPINS:
        raise OracleError(f"L = {L} outside 1..{MAX_SPINS}")


@lru_cache(maxsize=32)
def spin_signs(L: int) -> np.ndarray:
    """``(L, 2**L)`` array of Z eigenvalues ``s_a(i)``."""
    check_size(L)
    idx = np.arange(2**L, dtype=np.int64)
    s = 1 - 2 * ((idx[None, :] >> np.arange(L)[:, None]) & 1)
    s = s.astype(np.int8)
    s.setflags(write=False)
    return s


@lru_cache(maxsize=32)
def total_z(L: int) -> np.ndarray:
    """Eigenvalues of ``Z = sum_a Z_a`` (Pauli normalisation)."""
    m = spin_signs(L).sum(axis=0, dtype=np.int64).astype(float)
    m.setflags(write=False)
    return m


@dataclass(frozen=True)
class OperatorSpec:
    """A Pauli string (``sites``/``axes`` pairwise) or a total spin ``sum_a P_a``."""

    kind: str
    sites: tuple = ()
    axes: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "sites", tuple(int(s) for s in self.sites))
        object.__setattr__(self, "axes", tuple(str(a).upper() for a in self.axes))
        if any(a not in AXES for a in self.axes):
            raise OracleError(f"axes must be drawn from {AXES}")
        if self.kind == "pauli-string":
            if len(self.sites) < 1 or len(self.sites) != len(self.axes):
                raise OracleError("a Pauli string needs one axis per site and at least one site")
            if len(set(self.sites)) != len(self.sites):
                raise OracleError("Pauli string sites must be distinct")
        elif self.kind == "total-spin-axis":
            if len(self.axes) != 1:
                raise OracleError("a total-spin operator needs exactly one axis")
        else:
            raise OracleError(f"unknown operator kind {self.kind!r}")

    @classmethod
    def single(cls, site, axis="Z"):
        return cls("pauli-string", (site,), (axis,))

    @classmethod
    def total(cls, axis="Z"):
        return cls("total-spin-axis", (), (axis,))

    def terms(self, L: int):
        """Pauli strings making up the operator, as ``(sites, axes)`` pairs."""
        if self.kind == "pauli-string":
            if max(self.sites) >= L or min(self.sites) < 0:
                raise OracleError(f"site outside 0..{L - 1}")
            return [(self.sites, self.axes)]
        return [((a,), self.axes) for a in range(L)]


def string_action(L: int, sites, axes):
    """``(flip, phase)`` with ``(P x)[j] = phase[j] * x[j ^ flip]``."""
    s = spin_signs(L)
    flip = 0
    phase = np.ones(2**L, dtype=complex)
    for a, ax in zip(sites, axes):
        if ax == "Z":
            phase *= s[a]
        elif ax == "X":
            flip |= 1 << a
        else:
            # Y|b> = i (-1)^b |1-b>; in terms of the output bit this is -i s_a(j)
            flip |= 1 << a
            phase *= -1j * s[a]
    return flip, phase


def apply_string(x: np.ndarray, L: int, sites, axes) -> np.ndarray:
    """Apply a Pauli string to a state or to the columns of a batch ``(2**L, B)``."""
    flip, phase = string_action(L, sites, axes)
    idx = np.arange(2**L) ^ flip
    if x.ndim == 1:
        return phase * x[idx]
    return phase[:, None] * x[idx]


def apply_operator(x: np.ndarray, L: int, op: OperatorSpec) -> np.ndarray:
    out = None
    for sites, axes in op.terms(L):
        y = apply_string(x, L, sites, axes)
        out = y if out is None else out + y
    return out


def string_matrix(L: int, sites, axes) -> sparse.csr_matrix:
    flip, phase = string_action(L, sites, axes)
    rows = np.arange(2**L)
    return sparse.csr_matrix((phase, (rows, rows ^ flip)), shape=(2**L, 2**L))


def operator_matrix(L: int, op: OperatorSpec) -> sparse.csr_matrix:
    mats = [string_matrix(L, s, a) for s, a in op.terms(L)]
    return sum(mats[1:], mats[0]).tocsr()


def pauli_sum(L: int, terms) -> sparse.csr_matrix:
    """Sparse matrix of ``sum_k c_k P_k`` for ``terms = [(c_k, sites_k, axes_k), ...]``."""
    dim = 2**L
    rows = np.arange(dim)
    data, r, c = [], [], []
    for coef, sites, axes in terms:
        if coef == 0:
            continue
        flip, phase = string_action(L, sites, axes)
        data.append(coef * phase)
        r.append(rows)
        c.append(rows ^ flip)
    if not data:
        return sparse.csr_matrix((dim, dim), dtype=complex)
    m = sparse.coo_matrix((np.concatenate(data), (np.concatenate(r), np.concatenate(c))), shape=(dim, dim))
    return m.tocsr()
