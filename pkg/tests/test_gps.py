"""Unit tests for the phase-space map builders.

Scans are compared bit for bit against single-point calls, symmetry
residuals against exactly symmetric constructions, and every worker count
against the serial path.
"""

import math

import numpy as np
import pytest

from becdimer.gps import (
    FieldMap,
    GridSpec,
    min_c_quantum,
    movie_frames,
    point_observables,
    quantum_series,
    scan_min_window,
    scan_quantum,
    section,
    symmetry_maps,
)
from becdimer.meanfield import PhasePoint, h_cl
from becdimer.quantum import ModelParams, build_hamiltonian, diagonalize

PARAMS = ModelParams(N=40, J=10.0, lam=5.0)


def test_grid_is_cell_centered():
    g = GridSpec(8, 5)
    np.testing.assert_allclose(g.phi_values, (2 * np.arange(8) + 1) * math.pi / 8, atol=0)
    assert g.z_values.tolist() == [-0.8, -0.4, 0.0, 0.4, 0.8]
    assert 0.0 not in g.phi_values
    assert 1.0 not in g.z_values


def test_grid_closed_under_negation_for_any_parity():
    for nz in (4, 5, 101):
        zs = GridSpec(6, nz).z_values
        assert np.array_equal(-zs[::-1], zs)
    for nphi in (6, 7):
        phis = GridSpec(nphi, 4).phi_values
        assert np.allclose((-phis[::-1]) % (2 * math.pi), phis, atol=1e-12)


def test_grid_validation():
    with pytest.raises(ValueError):
        GridSpec(1, 10)
    with pytest.raises(ValueError):
        GridSpec(10, 1)


def test_scan_equals_pointwise_pipeline():
    grid = GridSpec(3, 3)
    spec = diagonalize(build_hamiltonian(PARAMS))
    maps = scan_quantum(grid, PARAMS, 0.7, ("c", "E", "xi2"), spec=spec)
    for i, phi in enumerate(grid.phi_values):
        for j, z in enumerate(grid.z_values):
            vals = point_observables(float(phi), float(z), PARAMS, spec, 0.7, ("c", "E", "xi2"))
            for name in ("c", "E", "xi2"):
                assert maps[name].values[i, j] == vals[name]


def test_scan_at_zero_time_is_fully_coherent():
    maps = scan_quantum(GridSpec(4, 5), PARAMS, 0.0, ("c",))
    np.testing.assert_allclose(maps["c"].values, 1.0, rtol=0, atol=1e-12)


def test_scan_metadata():
    m = scan_quantum(GridSpec(2, 2), PARAMS, 0.3, ("c",))["c"]
    assert m.tau == 0.3
    assert m.engine == "quantum"
    assert m.seed is None and m.M is None
    assert m.values.shape == (2, 2)


def test_scan_validation():
    with pytest.raises(ValueError):
        scan_quantum(GridSpec(2, 2), PARAMS, 0.1, ("bogus",))
    with pytest.raises(ValueError):
        scan_quantum(GridSpec(2, 2), PARAMS, -0.1, ("c",))
    spec = diagonalize(build_hamiltonian(PARAMS))
    with pytest.raises(ValueError):
        point_observables(0.0, 0.0, PARAMS, spec, 0.0, ("nope",))


def test_scan_worker_invariance():
    grid = GridSpec(5, 4)
    one = scan_quantum(grid, PARAMS, 0.4, ("c", "E_sc"), workers=1)
    three = scan_quantum(grid, PARAMS, 0.4, ("c", "E_sc"), workers=3)
    for name in ("c", "E_sc"):
        assert np.array_equal(one[name].values, three[name].values)


def test_semiclassical_entanglement_map_never_positive():
    m = scan_quantum(GridSpec(10, 9), PARAMS, 1.0, ("E_sc",))["E_sc"]
    assert np.max(m.values) <= 0.0


def test_quantum_series_shapes_and_t0():
    out = quantum_series(PARAMS, 0.0, 0.2, np.arange(4) * 0.01, ("c", "mean_z"))
    assert out["c"].shape == (4,)
    assert out["c"][0] == pytest.approx(1.0, abs=1e-12)
    assert out["mean_z"][0] == pytest.approx(0.2, abs=1e-12)


def test_min_window_scan_quantum_matches_pointwise():
    grid = GridSpec(4, 5)
    spec = diagonalize(build_hamiltonian(PARAMS))
    m = scan_min_window(grid, PARAMS, 0.1, spec=spec)
    assert m.observable == "min_c"
    assert m.seed is None and m.M is None
    for i, phi in enumerate(grid.phi_values):
        for j, z in enumerate(grid.z_values):
            want = min_c_quantum(float(phi), float(z), PARAMS, spec, 0.1)
            assert m.values[i, j] == want
    t0 = scan_quantum(grid, PARAMS, 0.0, ("c",), spec=spec)["c"]
    assert np.all(m.values <= t0.values + 1e-15)


def test_min_window_scan_lida_metadata_and_determinism():
    grid = GridSpec(3, 2)
    a = scan_min_window(grid, PARAMS, 0.02, engine="lida", M=200, seed=5)
    b = scan_min_window(grid, PARAMS, 0.02, engine="lida", M=200, seed=5, workers=2)
    assert a.engine == "lida"
    assert a.seed == 5 and a.M == 200
    assert np.array_equal(a.values, b.values)
    shifted = scan_min_window(grid, PARAMS, 0.02, engine="lida", M=200, seed=6)
    assert not np.array_equal(a.values, shifted.values)


def test_min_window_scan_validation():
    with pytest.raises(ValueError):
        scan_min_window(GridSpec(2, 2), PARAMS, 0.1, engine="nope")
    with pytest.raises(ValueError):
        scan_min_window(GridSpec(2, 2), PARAMS, -0.5)


def test_symmetry_residual_zero_for_even_construction():
    # the classical energy is even in z, so its dS residual must vanish
    # bit for bit on the reflection-closed grid
    grid = GridSpec(12, 7)
    vals = np.empty((12, 7))
    for i, phi in enumerate(grid.phi_values):
        for j, z in enumerate(grid.z_values):
            vals[i, j] = h_cl(PhasePoint(float(phi), float(z)), 5.0)
    f = FieldMap(grid=grid, observable="h", values=vals, params=PARAMS)
    ds, _ = symmetry_maps(f)
    assert not ds.values.any()
    assert ds.observable == "dS(h)"


def test_relabel_residual_small_for_quantum_map():
    # exchanging the two modes is exact in the model, so the relabel
    # residual only carries eigensolver rounding
    maps = scan_quantum(GridSpec(10, 9), PARAMS, 0.5, ("c", "E"))
    for name in ("c", "E"):
        _, rel = symmetry_maps(maps[name])
        scale = np.maximum(1.0, np.abs(maps[name].values))
        assert np.max(np.abs(rel.values) / scale) < 1e-9
        assert rel.observable == f"relabel({name})"


def test_symmetry_breaking_is_nonzero_off_axis():
    maps = scan_quantum(GridSpec(10, 9), PARAMS, 1.0, ("c",))
    ds, _ = symmetry_maps(maps["c"])
    assert np.max(np.abs(ds.values)) > 0.01


def test_section_picks_nearest_column():
    grid = GridSpec(10, 5)
    m = scan_quantum(grid, PARAMS, 0.0, ("c",))["c"]
    s = section(m, 0.05)
    assert s.phi == grid.phi_values[0]
    assert np.array_equal(s.values, m.values[0])
    s2 = section(m, math.pi)
    d = np.abs(grid.phi_values - math.pi)
    assert s2.phi == grid.phi_values[int(np.argmin(d))]
    assert np.array_equal(s2.z_values, grid.z_values)


def test_movie_frames_count_and_identity():
    grid = GridSpec(5, 4)
    spec = diagonalize(build_hamiltonian(PARAMS))
    frames = movie_frames(grid, PARAMS, t_end=0.05, dt_frame=0.025, spec=spec)
    assert len(frames) == 3
    for k, frame in enumerate(frames):
        assert frame.tau == pytest.approx(k * 0.025, abs=0)
        again = scan_quantum(grid, PARAMS, k * 0.025, ("c",), spec=spec)["c"]
        assert np.array_equal(frame.values, again.values)


def test_movie_frames_validation():
    with pytest.raises(ValueError):
        movie_frames(GridSpec(2, 2), PARAMS, t_end=1.0, dt_frame=0.0)
    with pytest.raises(ValueError):
        movie_frames(GridSpec(2, 2), PARAMS, t_end=-1.0)
