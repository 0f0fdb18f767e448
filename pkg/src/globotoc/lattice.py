"""Site sets for fcc, simple-cubic and chain lattices, and pairwise rate kernels.

A *site* holds one molecule with ``spins_per_site`` spin-1/2s. All spins of a
molecule share the molecule's position, so rates are defined between sites;
the rate between any spin of site ``i`` and any spin of site ``j`` is
``pairwise_rate(sites, i, j, kernel)``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.spatial import cKDTree

from .errors import LatticeError

KINDS = ("fcc", "simple-cubic", "chain")
BOUNDARIES = ("open", "periodic")
ANGULAR_MODES = ("isotropic", "dipolar")

_FCC_BASIS = np.array(
    [[0.0, 0.0, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5], [0.5, 0.5, 0.0]]
)


@dataclass(frozen=True)
class LatticeSpec:
    kind: str
    linear_size: int
    spins_per_site: int = 1
    lattice_constant_nm: float = 1.0
    occupancy: float = 1.0
    boundary: str = "open"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise LatticeError(f"unknown lattice kind {self.kind!r}")
        if self.boundary not in BOUNDARIES:
            raise LatticeError(f"unknown boundary {self.boundary!r}")
        if int(self.linear_size) != self.linear_size or self.linear_size < 1:
            raise LatticeError(f"linear_size must be a positive integer, got {self.linear_size}")
        if int(self.spins_per_site) != self.spins_per_site or self.spins_per_site < 1:
            raise LatticeError(f"spins_per_site must be a positive integer, got {self.spins_per_site}")
        if not self.lattice_constant_nm > 0:
            raise LatticeError("lattice_constant_nm must be positive")
        if not 0.0 <= self.occupancy <= 1.0:
            raise LatticeError(f"occupancy must lie in [0, 1], got {self.occupancy}")

    @property
    def dimension(self) -> int:
        return 1 if self.kind == "chain" else 3

    @property
    def basis_size(self) -> int:
        return 4 if self.kind == "fcc" else 1

    @property
    def n_sites(self) -> int:
        return self.linear_size**self.dimension * self.basis_size

    @property
    def nn_distance_nm(self) -> float:
        """Nearest-neighbour distance (a/sqrt(2) for the conventional fcc cell)."""
        if self.kind == "fcc":
            return self.lattice_constant_nm / math.sqrt(2.0)
        return self.lattice_constant_nm

    @classmethod
    def from_nn_distance(cls, kind, linear_size, nn_distance_nm, **kwargs):
        a = nn_distance_nm * math.sqrt(2.0) if kind == "fcc" else nn_distance_nm
        return cls(kind, linear_size, lattice_constant_nm=a, **kwargs)


@dataclass(frozen=True)
class CouplingKernel:
    """Power-law rate kernel ``prefactor * (reference_distance / r) ** (2 alpha)``.

    The stochastic rate is the coupling squared, hence the exponent ``2 alpha``.
    In ``dipolar`` mode the rate is further multiplied by the squared angular
    factor ``((3 cos^2 theta - 1) / 2) ** 2`` with theta measured from
    ``field_axis``.
    """

    alpha: float = 3.0
    prefactor: float = 1.0
    angular_mode: str = "isotropic"
    field_axis: tuple = (0.0, 0.0, 1.0)
    cutoff_radius_nm: float | None = None
    reference_distance_nm: float = 1.0

    def __post_init__(self):
        if not self.alpha > 0:
            raise LatticeError("alpha must be positive")
        if not self.prefactor > 0:
            raise LatticeError("prefactor must be positive")
        if self.angular_mode not in ANGULAR_MODES:
            raise LatticeError(f"unknown angular mode {self.angular_mode!r}")
        if self.cutoff_radius_nm is not None and not self.cutoff_radius_nm > 0:
            raise LatticeError("cutoff_radius_nm must be positive or None")
        if not self.reference_distance_nm > 0:
            raise LatticeError("reference_distance_nm must be positive")
        axis = np.asarray(self.field_axis, dtype=float)
        norm = np.linalg.norm(axis)
        if axis.shape != (3,) or norm == 0:
            raise LatticeError("field_axis must be a nonzero 3-vector")
        object.__setattr__(self, "field_axis", tuple(axis / norm))

    def rate_at(self, displacement) -> np.ndarray:
        """Rates for an array of displacement vectors (shape ``(..., 3)``)."""
        disp = np.asarray(displacement, dtype=float)
        r = np.linalg.norm(disp, axis=-1)
        if np.any(r == 0):
            raise LatticeError("coincident sites: distance is zero")
        rate = self.prefactor * (self.reference_distance_nm / r) ** (2 * self.alpha)
        if self.angular_mode == "dipolar":
            cos_t = disp @ np.asarray(self.field_axis) / r
            rate = rate * ((3 * cos_t**2 - 1) / 2) ** 2
        if self.cutoff_radius_nm is not None:
            rate = np.where(r <= self.cutoff_radius_nm, rate, 0.0)
        return rate


@dataclass(frozen=True, eq=False)
class SiteSet:
    positions: np.ndarray
    molecule_index: np.ndarray
    occupied: np.ndarray
    spins_per_site: int = 1
    box_nm: np.ndarray | None = None
    nn_distance_nm: float = 1.0
    kind: str = "chain"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("positions", "molecule_index", "occupied"):
            arr = np.array(getattr(self, name))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.box_nm is not None:
            box = np.array(self.box_nm, dtype=float)
            box.setflags(write=False)
            object.__setattr__(self, "box_nm", box)

    def __len__(self):
        return len(self.positions)

    @property
    def n_occupied(self) -> int:
        return int(self.occupied.sum())

    @property
    def degenerate(self) -> bool:
        """True when no molecule survived dilution, so no simulation can be seeded."""
        return self.n_occupied == 0

    @property
    def total_spins(self) -> int:
        return self.n_occupied * self.spins_per_site

    def displacement(self, i, j) -> np.ndarray:
        d = np.asarray(self.positions[j] - self.positions[i], dtype=float)
        if self.box_nm is not None:
            d = d - self.box_nm * np.round(d / self.box_nm)
        return d

    def center_site(self, occupied_only=True) -> int:
        """Occupied site closest to the geometric centre of the lattice."""
        c = self.positions.mean(axis=0)
        dist = np.linalg.norm(self.positions - c, axis=1)
        if occupied_only:
            dist = np.where(self.occupied, dist, np.inf)
        return int(np.argmin(dist))

    def equals(self, other) -> bool:
        return (
            np.array_equal(self.positions, other.positions)
            and np.array_equal(self.occupied, other.occupied)
            and np.array_equal(self.molecule_index, other.molecule_index)
            and self.spins_per_site == other.spins_per_site
        )


def build_lattice(spec: LatticeSpec) -> SiteSet:
    """Enumerate all molecule positions; dilution is applied separately."""
    n, a = spec.linear_size, spec.lattice_constant_nm
    if spec.kind == "chain":
        pos = np.zeros((n, 3))
        pos[:, 0] = np.arange(n) * a
        box = np.array([n * a, np.inf, np.inf]) if spec.boundary == "periodic" else None
    else:
        r = np.arange(n)
        cells = np.stack(np.meshgrid(r, r, r, indexing="ij"), axis=-1).reshape(-1, 1, 3)
        basis = _FCC_BASIS if spec.kind == "fcc" else np.zeros((1, 3))
        pos = ((cells + basis[None, :, :]).reshape(-1, 3)) * a
        box = np.full(3, n * a) if spec.boundary == "periodic" else None
    m = len(pos)
    return SiteSet(
        positions=pos,
        molecule_index=np.arange(m),
        occupied=np.ones(m, dtype=bool),
        spins_per_site=spec.spins_per_site,
        box_nm=box,
        nn_distance_nm=spec.nn_distance_nm,
        kind=spec.kind,
    )


def pairwise_rate(sites: SiteSet, i: int, j: int, kernel: CouplingKernel) -> float:
    """Rate between one spin on site ``i`` and one spin on site ``j``."""
    if i == j:
        raise LatticeError("pairwise_rate needs two distinct sites")
    return float(kernel.rate_at(sites.displacement(i, j)))


def dilute_sites(sites: SiteSet, p: float, rng_seed: int) -> SiteSet:
    """Keep each molecule independently with probability ``p``."""
    if not 0.0 <= p <= 1.0:
        raise LatticeError(f"occupancy must lie in [0, 1], got {p}")
    rng = np.random.default_rng(np.random.SeedSequence(rng_seed))
    keep = rng.random(len(sites)) < p
    return SiteSet(
        positions=sites.positions,
        molecule_index=sites.molecule_index,
        occupied=sites.occupied & keep,
        spins_per_site=sites.spins_per_site,
        box_nm=sites.box_nm,
        nn_distance_nm=sites.nn_distance_nm,
        kind=sites.kind,
        meta={**sites.meta, "occupancy": p, "dilution_seed": rng_seed},
    )


def rate_matrix(sites: SiteSet, kernel: CouplingKernel, occupied_only=True):
    """Symmetric CSR matrix of site-to-site rates.

    Returns ``(matrix, index)`` where ``index`` maps matrix rows back to site
    ids. With a cutoff the neighbour search uses a k-d tree; without one all
    pairs are evaluated, which is only sensible for small site sets.
    """
    idx = np.flatnonzero(sites.occupied) if occupied_only else np.arange(len(sites))
    pos = sites.positions[idx]
    n = len(idx)
    if n < 2:
        return sparse.csr_matrix((n, n)), idx
    box = sites.box_nm
    if kernel.cutoff_radius_nm is not None:
        if box is not None:
            # chains are periodic along x only; the other coordinates are all zero
            finite = np.isfinite(box)
            tree = cKDTree(np.mod(pos[:, finite], box[finite]), boxsize=box[finite])
        else:
            tree = cKDTree(pos)
        pairs = tree.query_pairs(kernel.cutoff_radius_nm * (1 + 1e-12), output_type="ndarray")
    else:
        ii, jj = np.triu_indices(n, k=1)
        pairs = np.stack([ii, jj], axis=1)
    if len(pairs) == 0:
        return sparse.csr_matrix((n, n)), idx
    d = pos[pairs[:, 1]] - pos[pairs[:, 0]]
    if box is not None:
        finite = np.isfinite(box)
        d[:, finite] -= box[finite] * np.round(d[:, finite] / box[finite])
    w = kernel.rate_at(d)
    keep = w > 0
    pairs, w = pairs[keep], w[keep]
    rows = np.concatenate([pairs[:, 0], pairs[:, 1]])
    cols = np.concatenate([pairs[:, 1], pairs[:, 0]])
    mat = sparse.coo_matrix((np.concatenate([w, w]), (rows, cols)), shape=(n, n)).tocsr()
    mat.sort_indices()
    return mat, idx


def write_sites_csv(sites: SiteSet, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["site_id", "x_nm", "y_nm", "z_nm", "occupied"])
        for i, (p, occ) in enumerate(zip(sites.positions, sites.occupied)):
            w.writerow([i, repr(float(p[0])), repr(float(p[1])), repr(float(p[2])), int(occ)])


def read_sites_csv(path, spins_per_site=1, nn_distance_nm=1.0, kind="chain") -> SiteSet:
    rows = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return SiteSet(
        positions=rows[:, 1:4],
        molecule_index=rows[:, 0].astype(int),
        occupied=rows[:, 4].astype(bool),
        spins_per_site=spins_per_site,
        nn_distance_nm=nn_distance_nm,
        kind=kind,
    )
