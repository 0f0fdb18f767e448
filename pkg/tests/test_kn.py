import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings, strategies as st

from globotoc.errors import KnError
from globotoc.kn import (
    KnChain, evolve_master, iter_master, log_q_table, mqc_from_kn, otoc_series_kn, q_exact,
    q_value, stationary_kn, transition_rates, vandermonde_holds, write_gn_csv, write_moments_csv,
)
from globotoc.mqc import cluster_size_fit, second_moment

# trinomial row 4 of (x + 1 + 1/x)^4, computed by hand: 1 4 10 16 19 16 10 4 1
TRINOMIAL_ROW_4 = {0: 19, 1: 16, 2: 10, 3: 4, 4: 1}


def test_small_q_values():
    assert q_exact(1, 0) == 1
    assert q_exact(2, 2) == 1
    assert q_exact(3, 4) == 0
    assert q_value(3, 4) == -math.inf
    for n, q in TRINOMIAL_ROW_4.items():
        assert q_exact(4, n) == q == q_exact(4, -n)
        assert math.exp(q_value(4, n)) == pytest.approx(q, rel=1e-12)


def test_log_space_q_matches_integers():
    table = log_q_table(30)
    for K in range(31):
        for n in range(K + 1):
            exact = q_exact(K, n)
            assert math.exp(q_value(K, n) - math.log(exact)) == pytest.approx(1.0, abs=1e-10)
            assert math.exp(table[K, n] - math.log(exact)) == pytest.approx(1.0, abs=1e-10)


def test_vandermonde_identity():
    assert all(vandermonde_holds(K, n) for K in range(31) for n in range(-K, K + 1))


def test_transition_rate_examples():
    r = transition_rates(1, 0, 6)
    assert r[(2, 2)] == pytest.approx(1.0) and r[(2, -2)] == pytest.approx(1.0)
    assert r[(0, 2)] == 0 and r[(0, -2)] == 0
    top = transition_rates(6, 0, 6)
    assert top[(7, 2)] == 0 and top[(7, -2)] == 0


def test_transition_rate_errors():
    with pytest.raises(KnError):
        transition_rates(1, 0, 1)
    with pytest.raises(KnError):
        transition_rates(7, 0, 6)
    with pytest.raises(KnError):
        transition_rates(2, 3, 6)


def _dense_weights(N):
    """Move weights assembled state by state from the scalar rate formula."""
    states = [(K, n) for K in range(1, N + 1) for n in range(-K, K + 1) if n % 2 == 0 and (K + n // 2) % 2 == 1]
    idx = {s: i for i, s in enumerate(states)}
    W = np.zeros((len(states), len(states)))
    for (K, n), i in idx.items():
        for dest, w in transition_rates(K, n, N).items():
            if w > 0:
                W[idx[dest], i] += w
    return states, W


@pytest.mark.parametrize("N", [2, 3, 5, 8])
def test_chain_matches_scalar_rates(N):
    chain = KnChain(N)
    states, W = _dense_weights(N)
    assert sorted(map(tuple, chain.states.tolist())) == sorted(states)
    perm = [chain.index[s] for s in states]
    np.testing.assert_allclose(chain.weights.toarray()[np.ix_(perm, perm)], W, rtol=1e-12, atol=0)


@pytest.mark.parametrize("N", [3, 5, 8])
def test_stationary_matches_dense_eigenvectors(N):
    states, W = _dense_weights(N)
    out = W.sum(axis=0)
    G = W - np.diag(out)
    q = scipy.linalg.null_space(G)[:, 0]
    q = q / q.sum()
    vals, vecs = np.linalg.eig(W / out)
    v = np.real(vecs[:, np.argmin(np.abs(vals - 1))])
    v = v / v.sum()
    chain = KnChain(N)
    perm = [chain.index[s] for s in states]
    for mode, ref in (("rate", q), ("jump", v)):
        d = stationary_kn(N, mode)
        got = d.mass[chain.states[:, 0], chain.states[:, 1] + N][perm]
        np.testing.assert_allclose(got, ref, atol=1e-10)


def test_initial_distribution_and_first_step():
    dists = evolve_master(6, 2)
    assert dists[0].mass[1, 6] == 1.0 and dists[0].mass.sum() == 1.0
    g0 = mqc_from_kn(dists[0])
    assert g0.get(0) == 1.0 and second_moment(g0) == 0.0
    # from (1, 0) the only moves are to (2, +-2), each with half the mass
    assert dists[1].mass[2, 8] == pytest.approx(0.5) and dists[1].mass[2, 4] == pytest.approx(0.5)


@pytest.mark.parametrize("mode", ["jump", "rate"])
def test_probability_conserved_and_even_support(mode):
    N = 12
    for _, _, p, chain in iter_master(N, 60, mode, dt=0.1):
        assert abs(p.sum() - 1.0) < 1e-12
        assert np.all(p >= 0)
        d = chain.to_distribution(p, 0)
        g = d.gn()
        assert np.all(g[(d.n_values % 2) != 0] == 0)
        np.testing.assert_allclose(g, g[::-1], atol=1e-15)
        assert d.second_moment() <= N * N
        K = np.arange(N + 1)[:, None]
        nn = d.n_values[None, :]
        assert np.all(d.mass[(K + nn // 2) % 2 == 0] == 0)


@pytest.mark.parametrize("N", [6, 21])
def test_stationary_shape(N):
    d = stationary_kn(N)
    g = d.gn()
    n = d.n_values
    assert abs(g.sum() - 1) < 1e-12
    np.testing.assert_allclose(g, g[::-1], atol=1e-14)
    assert np.all(g[n % 2 != 0] == 0)
    assert np.argmax(g) == N  # n = 0
    even = g[(n % 2 == 0) & (n >= 0)]
    assert np.all(np.diff(even) < 0)


def test_n21_cluster_size_comparable_to_n():
    K = cluster_size_fit(mqc_from_kn(stationary_kn(21))).K
    assert 21 / 2 <= K <= 21 * 2


def test_saturation_grows_with_n():
    sat = [stationary_kn(N, "rate").second_moment() for N in (50, 100, 200, 400)]
    assert np.all(np.diff(sat) > 0)
    assert all(s <= N * N for s, N in zip(sat, (50, 100, 200, 400)))


def test_otoc_series_starts_at_zero_and_rises():
    t, m2, k = otoc_series_kn(40, 30, mode="rate", dt=0.1)
    assert m2[0] == 0 and k[0] == 1
    assert np.all(m2 >= 0)
    assert m2[-1] > m2[5] > 0


def test_mode_errors():
    with pytest.raises(KnError):
        list(iter_master(5, 2, mode="euler"))
    with pytest.raises(KnError):
        KnChain(1)


def test_csv_writers(tmp_path):
    dists = evolve_master(4, 3)
    write_gn_csv(tmp_path / "g.csv", dists)
    data = np.loadtxt(tmp_path / "g.csv", delimiter=",", skiprows=1)
    assert data.shape == (4 * 9, 3)
    for d in dists:
        rows = data[data[:, 0] == d.step_index]
        np.testing.assert_array_equal(rows[:, 2], d.gn())
    write_moments_csv(tmp_path / "m.csv", [0, 1], [1.0, 2.0], [0.0, 4.0])
    assert (tmp_path / "m.csv").read_text().splitlines()[0] == "step,K_mean,second_moment"


@settings(max_examples=40, deadline=None)
@given(K=st.integers(0, 40), n=st.integers(-45, 45))
def test_q_symmetry_and_recurrence(K, n):
    assert q_exact(K, n) == q_exact(K, -n)
    if K >= 1:
        assert q_exact(K, n) == q_exact(K - 1, n - 1) + q_exact(K - 1, n) + q_exact(K - 1, n + 1)


@settings(max_examples=30, deadline=None)
@given(N=st.integers(2, 30), data=st.data())
def test_rates_are_mirror_symmetric(N, data):
    K = data.draw(st.integers(1, N))
    n = data.draw(st.integers(0, K // 2)) * 2 * data.draw(st.sampled_from([1, -1]))
    if abs(n) > K:
        return
    r = transition_rates(K, n, N)
    m = transition_rates(K, -n, N)
    for (k2, n2), w in r.items():
        assert m[(k2, -n2)] == pytest.approx(w, rel=1e-12)
