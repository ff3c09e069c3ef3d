import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from topofreq import bhz
from topofreq.bhz import BhzParams
from topofreq.errors import GapClosedError, InvalidArgumentError
from topofreq.spin import bloch_of, field_matrix

kvals = st.floats(0, 2 * np.pi, allow_nan=False)


@pytest.mark.parametrize(
    "M, k, h",
    [(2, (0, 0), (0, 0, 0)), (1, (np.pi / 2, 0), (1, 0, 0)), (1, (np.pi, np.pi), (0, 0, 3))],
)
def test_h_of_k_examples(M, k, h):
    assert np.allclose(bhz.h_of_k(BhzParams(M), *k), h, atol=1e-15)


def test_bands_examples():
    lo, hi = bhz.bands(BhzParams(1), 0.0, 0.0)
    assert (lo, hi) == (-1.0, 1.0)
    assert bhz.min_gap(BhzParams(3), 64) == pytest.approx(2.0)
    assert bhz.min_gap(BhzParams(2), 64) <= 2 * (2 * np.pi / 64)


def test_gap_closes_only_at_critical_masses():
    for M in np.linspace(-3.5, 3.5, 71):
        if min(abs(M - c) for c in (-2, 0, 2)) >= 0.05:
            assert bhz.min_gap(BhzParams(M), 64) > 0.05


def test_eigenstate_lower_examples():
    s = bhz.eigenstate_from_field(np.array([0.0, 0.0, -1.0]), "lower")
    assert np.allclose(s, [1, 0])
    assert np.allclose(bloch_of(bhz.eigenstate_from_field(np.array([1.0, 0.0, 0.0]), "lower")), [-1, 0, 0])


def test_alternate_gauge_used_at_singularity():
    # h along +z makes |h| - h_z vanish for the lower band
    s = bhz.eigenstate_from_field(np.array([0.0, 0.0, 2.0]), "lower")
    assert np.allclose(np.abs(s), [0, 1])
    assert np.allclose(bloch_of(s), [0, 0, -1])


@given(kvals, kvals, st.sampled_from([-1.0, 1.0, 3.0, 0.5]), st.sampled_from(["lower", "upper"]))
def test_eigen_residual(kx, ky, M, band):
    p = BhzParams(M)
    h = bhz.h_of_k(p, kx, ky)
    e = np.linalg.norm(h)
    s = bhz.eigenstate_lower(p, kx, ky) if band == "lower" else bhz.eigenstate_upper(p, kx, ky)
    lam = -e if band == "lower" else e
    assert np.linalg.norm(field_matrix(h) @ s - lam * s) <= 1e-12
    assert np.allclose(bloch_of(s), np.sign(lam) * h / e, atol=1e-12)


def test_eigen_residual_both_gauges_near_poles():
    for h in ([1e-12, 0, 1.0], [0, 1e-11, -1.0], [1e-8, 1e-8, 1.0], [0.3, 0.1, -0.2]):
        h = np.array(h)
        for band, lam in (("lower", -1), ("upper", 1)):
            s = bhz.eigenstate_from_field(h, band)
            assert np.linalg.norm(field_matrix(h) @ s - lam * np.linalg.norm(h) * s) <= 1e-12


def test_gap_closed_errors():
    with pytest.raises(GapClosedError):
        bhz.eigenstate_lower(BhzParams(2), 0.0, 0.0)
    with pytest.raises(GapClosedError):
        bhz.berry_curvature(BhzParams(0), np.pi, 0.0)
    with pytest.raises(GapClosedError):
        bhz.chern_number(BhzParams(2), 16)
    with pytest.raises(InvalidArgumentError):
        bhz.chern_number(BhzParams(1), 3)


def _plaquette_flux(p, kx, ky, d):
    ks = [(kx, ky), (kx + d, ky), (kx + d, ky + d), (kx, ky + d)]
    states = [bhz.eigenstate_lower(p, *k) for k in ks]
    prod = 1.0 + 0j
    for a, b in zip(states, states[1:] + states[:1]):
        prod *= np.vdot(a, b)
    # Berry phase of the lower band for A = i <u|du>
    return -np.angle(prod)


def test_curvature_vs_plaquette():
    p = BhzParams(3.0)
    d = 1e-3
    flux = _plaquette_flux(p, -d / 2, -d / 2, d)
    assert bhz.berry_curvature(p, 0.0, 0.0) == pytest.approx(flux / d**2, abs=1e-6)
    # at k = 0: h = (0, 0, M - 2), d_kx h x d_ky h = z, so F = 1/(2 (M - 2)^2)
    assert bhz.berry_curvature(p, 0.0, 0.0) == pytest.approx(1 / (2 * (3 - 2) ** 2))


def test_curvature_vanishes_at_large_mass():
    kx, ky = bhz.bz_grid(64)
    assert np.max(np.abs(bhz.berry_curvature(BhzParams(100), kx, ky))) <= 1 / 100


@given(kvals, kvals)
def test_curvature_symmetric_under_axis_swap(kx, ky):
    p = BhzParams(1.3)
    assert bhz.berry_curvature(p, kx, ky) == pytest.approx(bhz.berry_curvature(p, ky, kx), abs=1e-12)


@pytest.mark.parametrize("M, C", [(-1, 1), (1, -1), (3, 0), (-3, 0), (0.5, -1), (-1.5, 1)])
def test_chern_number(M, C):
    for n in (8, 16, 32, 64):
        assert bhz.chern_number(BhzParams(M), n) == C


def test_upper_band_has_opposite_chern():
    assert bhz.chern_number(BhzParams(1), 32, band="upper") == 1
    assert bhz.chern_number(BhzParams(-1), 32, band="upper") == -1


@pytest.mark.parametrize("M", [-3.0, -1.0, -0.3, 0.4, 1.0, 1.8, 2.2, 3.0])
def test_grid_independence_and_curvature_integral(M):
    p = BhzParams(M)
    cs = {bhz.chern_number(p, n) for n in (8, 16, 32, 64)}
    assert len(cs) == 1
    assert bhz.curvature_integral(p, 256) == pytest.approx(cs.pop(), abs=1e-3)


def test_winding_examples():
    w3 = bhz.winding_diagnostic(BhzParams(3))
    assert w3.zmin == pytest.approx(1) and w3.zmax == pytest.approx(5)
    assert w3.origin_enclosed is False
    w1 = bhz.winding_diagnostic(BhzParams(1))
    assert w1.zmin < 0 < w1.zmax and w1.origin_enclosed
    wm = bhz.winding_diagnostic(BhzParams(-1))
    assert wm.origin_enclosed and wm.degree == -w1.degree
    assert bhz.winding_diagnostic(BhzParams(2)).origin_enclosed is None


@given(st.floats(-3.8, 3.8), st.sampled_from([1.0, 0.5, -1.0]))
def test_winding_consistent_with_chern(M, B):
    if min(abs(M - c) for c in (-2, 0, 2)) < 0.2:
        return
    p = BhzParams(M, B)
    w = bhz.winding_diagnostic(p)
    c = bhz.chern_number(p, 32)
    assert w.origin_enclosed == (c != 0)
    assert abs(w.degree) == abs(c)


def test_curvature_csv(tmp_path):
    bhz.curvature_to_csv(BhzParams(1), tmp_path / "f.csv", 8)
    lines = (tmp_path / "f.csv").read_text().splitlines()
    assert lines[0] == "kx,ky,F_xy" and len(lines) == 65
