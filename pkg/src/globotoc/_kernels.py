"""Compiled inner loops of the spreading model.

State is the occupied count ``k[m]`` on every molecule ``m`` plus the cached
field ``F[m] = sum_{m'} w[m, m'] k[m']`` (the infection pressure felt by each
spin of ``m``). With ``M`` spins per molecule, death ratio ``r`` and uniform
intra-molecule rate ``u`` the molecule-level rates are

    birth  (M - k) * (F + u k)
    death  r * k * (F + u (k - 1))

Spins of one molecule are exchangeable, so this lumping is exact.
"""
import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def _molecule_rate(k, F, M, r, u):
    return (M - k) * (F + u * k) + r * k * (F + u * (k - 1))


@njit(cache=True, nogil=True)
def _tree_set(tree, size, m, value):
    j = size + m
    tree[j] = value
    j //= 2
    while j >= 1:
        tree[j] = tree[2 * j] + tree[2 * j + 1]
        j //= 2


@njit(cache=True, nogil=True)
def gillespie(indptr, indices, weights, M, r, u, seed_mol, t_max,
              sample_t, snap_slot, n_snap, rng_seed, record):
    """Exact event-driven trajectory.

    ``snap_slot[s]`` is the snapshot slot for sample ``s`` or -1. Returns
    ``(counts, snaps, ev_t, ev_n, n_events)``; the event arrays are only
    filled when ``record`` is true and begin with the t = 0 seed event.
    """
    np.random.seed(rng_seed)
    nm = indptr.size - 1
    k = np.zeros(nm, np.int64)
    F = np.zeros(nm)
    size = 1
    while size < nm:
        size *= 2
    tree = np.zeros(2 * size)

    k[seed_mol] = 1
    for p in range(indptr[seed_mol], indptr[seed_mol + 1]):
        F[indices[p]] += weights[p]
    for m in range(nm):
        tree[size + m] = _molecule_rate(k[m], F[m], M, r, u)
    for i in range(size - 1, 0, -1):
        tree[i] = tree[2 * i] + tree[2 * i + 1]

    counts = np.empty(sample_t.size, np.int64)
    snaps = np.zeros((n_snap, nm), np.int64)
    cap = 1024 if record else 1
    ev_t = np.empty(cap)
    ev_n = np.empty(cap, np.int64)
    n_rec = 0
    if record:
        ev_t[0] = 0.0
        ev_n[0] = 1
        n_rec = 1

    t = 0.0
    ntot = 1
    si = 0
    n_events = 0
    while si < sample_t.size:
        total = tree[1]
        if total <= 1e-300:
            tn = np.inf
        else:
            tn = t - np.log(1.0 - np.random.random()) / total
        while si < sample_t.size and sample_t[si] < tn:
            counts[si] = ntot
            if snap_slot[si] >= 0:
                snaps[snap_slot[si], :] = k
            si += 1
        if tn > t_max or si >= sample_t.size:
            break
        t = tn
        x = np.random.random() * total
        i = 1
        while i < size:
            if x < tree[2 * i]:
                i = 2 * i
            else:
                x -= tree[2 * i]
                i = 2 * i + 1
        m = i - size
        if m >= nm:
            m = nm - 1
        birth = (M - k[m]) * (F[m] + u * k[m])
        d = 1 if x < birth else -1
        k[m] += d
        ntot += d
        n_events += 1
        for p in range(indptr[m], indptr[m + 1]):
            q = indices[p]
            F[q] += d * weights[p]
            if F[q] < 0.0:
                F[q] = 0.0
            _tree_set(tree, size, q, _molecule_rate(k[q], F[q], M, r, u))
        _tree_set(tree, size, m, _molecule_rate(k[m], F[m], M, r, u))
        if record:
            if n_rec >= cap:
                new_t = np.empty(2 * cap)
                new_n = np.empty(2 * cap, np.int64)
                new_t[:cap] = ev_t
                new_n[:cap] = ev_n
                ev_t = new_t
                ev_n = new_n
                cap *= 2
            ev_t[n_rec] = t
            ev_n[n_rec] = ntot
            n_rec += 1
    return counts, snaps, ev_t[:n_rec], ev_n[:n_rec], n_events


@njit(cache=True, nogil=True)
def tau_leap(indptr, indices, weights, M, r, u, seed_mol, t_max,
             sample_t, snap_slot, n_snap, rng_seed, record, tau, event_fraction):
    """Fixed or adaptive step binomial tau-leaping.

    Each step draws births among the empty spins and deaths among the occupied
    spins of every molecule from the rates frozen at the start of the step.
    ``tau <= 0`` selects adaptive steps sized so that the expected number of
    flips is ``event_fraction`` times the occupied count.
    """
    np.random.seed(rng_seed)
    nm = indptr.size - 1
    k = np.zeros(nm, np.int64)
    F = np.zeros(nm)
    k[seed_mol] = 1
    for p in range(indptr[seed_mol], indptr[seed_mol + 1]):
        F[indices[p]] += weights[p]

    counts = np.empty(sample_t.size, np.int64)
    snaps = np.zeros((n_snap, nm), np.int64)
    cap = 1024 if record else 1
    ev_t = np.empty(cap)
    ev_n = np.empty(cap, np.int64)
    n_rec = 0
    if record:
        ev_t[0] = 0.0
        ev_n[0] = 1
        n_rec = 1

    delta = np.zeros(nm, np.int64)
    t = 0.0
    ntot = 1
    si = 0
    n_events = 0
    while si < sample_t.size and sample_t[si] <= 0.0:
        counts[si] = ntot
        if snap_slot[si] >= 0:
            snaps[snap_slot[si], :] = k
        si += 1
    while si < sample_t.size:
        if tau > 0:
            step = tau
        else:
            total = 0.0
            for m in range(nm):
                total += _molecule_rate(k[m], F[m], M, r, u)
            if total <= 1e-300:
                step = np.inf
            else:
                step = event_fraction * max(ntot, 1) / total
        t_next = min(t + step, sample_t[si])
        dt = t_next - t
        if dt == np.inf:
            break
        for m in range(nm):
            delta[m] = 0
            km = k[m]
            bf = F[m] + u * km
            if km < M and bf > 0:
                nb = np.random.binomial(M - km, 1.0 - np.exp(-bf * dt))
                delta[m] += nb
            df = r * (F[m] + u * (km - 1))
            if km > 0 and df > 0:
                nd = np.random.binomial(km, 1.0 - np.exp(-df * dt))
                delta[m] -= nd
        for m in range(nm):
            d = delta[m]
            if d != 0:
                k[m] += d
                ntot += d
                n_events += abs(d)
                for p in range(indptr[m], indptr[m + 1]):
                    q = indices[p]
                    F[q] += d * weights[p]
                    if F[q] < 0.0:
                        F[q] = 0.0
        t = t_next
        if record:
            if n_rec >= cap:
                new_t = np.empty(2 * cap)
                new_n = np.empty(2 * cap, np.int64)
                new_t[:cap] = ev_t
                new_n[:cap] = ev_n
                ev_t = new_t
                ev_n = new_n
                cap *= 2
            ev_t[n_rec] = t
            ev_n[n_rec] = ntot
            n_rec += 1
        while si < sample_t.size and sample_t[si] <= t:
            counts[si] = ntot
            if snap_slot[si] >= 0:
                snaps[snap_slot[si], :] = k
            si += 1
    while si < sample_t.size:
        counts[si] = ntot
        if snap_slot[si] >= 0:
            snaps[snap_slot[si], :] = k
        si += 1
    return counts, snaps, ev_t[:n_rec], ev_n[:n_rec], n_events
