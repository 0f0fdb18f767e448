import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from globotoc.errors import (
    AliasingError, EmptyExperimentError, ExperimentFormatError, MalformedRowError, MQCError,
    NoFitError, NonAscendingTimeError, NonPositiveSizeError,
)
from globotoc.mqc import (
    MQCSpectrum, cluster_size_fit, gn_from_phase_sweep, load_experiment, phase_grid, second_moment,
    spectrum_record, write_experiment_csv, write_gn_csv, write_spectrum_json,
)


def gaussian(K, n_max):
    n = np.arange(-n_max, n_max + 1)
    return MQCSpectrum(n, np.exp(-n * n / K)).unit_sum()


def test_constant_sweep_is_delta():
    spec = gn_from_phase_sweep(np.ones(9))
    assert spec.get(0) == pytest.approx(1.0)
    assert np.allclose(spec.g[spec.n_values != 0], 0.0, atol=1e-15)
    assert second_moment(spec) == 0.0


def test_cos_two_phi():
    phi = phase_grid(11)
    spec = gn_from_phase_sweep(np.cos(2 * phi))
    assert spec.get(2) == pytest.approx(0.5) and spec.get(-2) == pytest.approx(0.5)
    assert second_moment(spec) == pytest.approx(4.0)


def test_aliasing_detected():
    phi = phase_grid(8)
    with pytest.raises(AliasingError):
        gn_from_phase_sweep(np.cos(3 * phi))
    with pytest.raises(AliasingError):
        gn_from_phase_sweep(np.cos(2 * phase_grid(4)), n_max=2)
    with pytest.raises(AliasingError):
        gn_from_phase_sweep(np.cos(3 * phase_grid(12)), n_max=2)


def test_imaginary_residue_rejected():
    phi = phase_grid(9)
    with pytest.raises(MQCError):
        gn_from_phase_sweep(np.exp(1j * phi) - np.exp(-1j * phi))


def test_gaussian_second_moment_is_half_k():
    assert second_moment(gaussian(100, 50)) == pytest.approx(50.0, rel=0.01)


def test_exact_gaussian_fit():
    fit = cluster_size_fit(gaussian(64, 40))
    assert fit.K == pytest.approx(64.0, abs=1e-6)
    assert fit.flags == []


def test_delta_has_no_fit():
    delta = MQCSpectrum([0], [1.0], "unit-sum")
    with pytest.raises(NoFitError):
        cluster_size_fit(delta)
    rec = spectrum_record(delta)
    assert rec["K"] is None and "no-fit" in rec["flags"]


def test_weak_polarization_flag():
    n = np.arange(-400, 401)
    big = MQCSpectrum(n, np.exp(-n * n / 2e5)).unit_sum()
    assert "weak-polarization-limit" in cluster_size_fit(big).flags
    assert "weak-polarization-limit" in spectrum_record(big)["flags"]


def test_spectrum_validation():
    with pytest.raises(MQCError):
        MQCSpectrum([0, 1], [1.0])
    with pytest.raises(MQCError):
        MQCSpectrum([0, 0], [1.0, 1.0])
    with pytest.raises(MQCError):
        MQCSpectrum([0, 2], [1.0, -0.5])
    with pytest.raises(MQCError):
        MQCSpectrum([0], [1.0], "percent")


def write(path, text):
    path.write_text(text)
    return path


def test_load_experiment_converts_units(tmp_path):
    s = load_experiment(write(tmp_path / "e.csv", "t_ms,cluster_size\n0.4,136\n0.8,900\n"))
    assert s.times[0] == pytest.approx(1.0) and s.cluster_size[0] == 136
    assert s.times_ms[1] == pytest.approx(0.8)
    s2 = load_experiment(write(tmp_path / "f.csv", "t_ms,cluster_size,err\n1,10,1\n2,20,2\n"),
                         time_unit_ms=0.5, size_scale=2.0, hamiltonian="YY")
    np.testing.assert_allclose(s2.times, [2.0, 4.0])
    np.testing.assert_allclose(s2.err, [2.0, 4.0])
    assert s2.hamiltonian == "YY"


@pytest.mark.parametrize("text, exc, row", [
    ("", EmptyExperimentError, None),
    ("t_ms,cluster_size\n", EmptyExperimentError, None),
    ("t_ms,cluster_size\n0.4,1,2\n", MalformedRowError, 2),
    ("t_ms,cluster_size\n0.4,abc\n", MalformedRowError, 2),
    ("t_ms,cluster_size\n0.4,10\n0.8,20\n0.6,30\n", NonAscendingTimeError, 4),
    ("t_ms,cluster_size\n0.4,10\n0.8,0\n", NonPositiveSizeError, 3),
    ("time,size\n0.4,10\n", ExperimentFormatError, 1),
])
def test_load_experiment_errors(tmp_path, text, exc, row):
    with pytest.raises(exc) as info:
        load_experiment(write(tmp_path / "bad.csv", text))
    if row is not None:
        assert info.value.row == row


def test_experiment_and_gn_csv_round_trip(tmp_path):
    s = load_experiment(write(tmp_path / "e.csv", "t_ms,cluster_size,err\n0.4,136,3\n1.2,4000,50\n"))
    write_experiment_csv(s, tmp_path / "out.csv")
    back = load_experiment(tmp_path / "out.csv")
    np.testing.assert_array_equal(back.times, s.times)
    np.testing.assert_array_equal(back.cluster_size, s.cluster_size)
    spec = gaussian(10, 8)
    write_gn_csv(tmp_path / "g.csv", [(1.5, spec)])
    data = np.loadtxt(tmp_path / "g.csv", delimiter=",", skiprows=1)
    np.testing.assert_array_equal(data[:, 2], spec.g)
    write_spectrum_json(spec, tmp_path / "s.json")
    rec = json.loads((tmp_path / "s.json").read_text())
    assert set(rec) == {"K", "K_err", "second_moment", "flags"}


spectra = st.integers(1, 12).flatmap(
    lambda m: st.lists(st.floats(0.0, 1.0), min_size=2 * m + 1, max_size=2 * m + 1).map(
        lambda g: (m, np.array(g))))


@settings(max_examples=60, deadline=None)
@given(spectra)
def test_fourier_round_trip(case):
    m, g = case
    if g.sum() == 0:
        g[m] = 1.0
    spec = MQCSpectrum(np.arange(-m, m + 1), g)
    M = 2 * m + 3
    back = gn_from_phase_sweep(spec.phase_signal(phase_grid(M)))
    dense = np.zeros(2 * m + 1)
    dense[back.n_values + m] = back.g
    np.testing.assert_allclose(dense, g, atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(spectra)
def test_second_moment_invariant_under_symmetrization(case):
    m, g = case
    if g.sum() == 0:
        g[0] = 1.0
    spec = MQCSpectrum(np.arange(-m, m + 1), g)
    assert second_moment(spec.symmetrized()) == pytest.approx(second_moment(spec), rel=1e-12, abs=1e-12)
    assert second_moment(spec) >= 0


@settings(max_examples=30, deadline=None)
@given(K=st.floats(2.0, 500.0))
def test_gaussian_fit_recovers_k(K):
    n_max = int(4 * np.sqrt(K)) + 3
    assert cluster_size_fit(gaussian(K, n_max)).K == pytest.approx(K, rel=1e-8)
