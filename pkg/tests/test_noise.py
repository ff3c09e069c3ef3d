import json
import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st
from scipy import stats

from topofreq import noise
from topofreq.drive import DriveParams
from topofreq.errors import DegenerateEstimateError, InvalidArgumentError, TopofreqError
from topofreq.noise import (
    GaussianNoiseParams,
    HeuristicNoiseParams,
    angle_from_loss,
    gaussian_measure,
    gaussian_measure_many,
    mc_chern,
    perturb_state,
    rotation_matrix,
    sample_perturbation_angle,
)
from topofreq.tomography import fidelity

comp = st.floats(-1, 1, allow_nan=False)


def test_param_invariants():
    for beta in (0.0, 1.0, -0.1):
        with pytest.raises(InvalidArgumentError):
            HeuristicNoiseParams(beta)
    for s in (-0.1, 1.0):
        with pytest.raises(InvalidArgumentError):
            GaussianNoiseParams(s)


def test_angle_examples():
    assert angle_from_loss(0.0) == 0.0
    assert angle_from_loss(1.0) == pytest.approx(np.pi)
    assert angle_from_loss(3.7) == pytest.approx(np.pi)
    x = np.linspace(0, 1, 11)
    assert np.allclose((1 + np.cos(angle_from_loss(x))) / 2, 1 - x)


def test_heuristic_mean_fidelity(rng):
    th = sample_perturbation_angle(HeuristicNoiseParams(0.029), rng, size=10**6)
    assert np.all((0 <= th) & (th <= np.pi))
    assert np.mean((1 + np.cos(th)) / 2) == pytest.approx(0.971, abs=1e-3)


def test_heuristic_loss_distribution(rng):
    beta = 0.029
    loss = (1 - np.cos(sample_perturbation_angle(HeuristicNoiseParams(beta), rng, size=10**5))) / 2

    def cdf(x):
        return np.where(x < 1, 1 - np.exp(-np.asarray(x) / beta), 1.0)

    assert stats.kstest(loss, cdf).statistic <= 0.01
    assert np.mean(loss >= 1 - 1e-12) <= math.exp(-1 / beta) + 1e-4


def test_perturb_trivial_angles(rng):
    b = np.array([0.0, 0.6, 0.8])
    assert np.allclose(perturb_state(b, 0.0, rng), b)
    assert np.allclose(perturb_state(b, np.pi, rng), -b, atol=1e-15)


@given(comp, comp, comp, st.floats(0, np.pi), st.integers(0, 2**32))
def test_perturb_exact_angle(x, y, z, theta, seed):
    b = np.array([x, y, z])
    assume(np.linalg.norm(b) > 0.1)
    b = b / np.linalg.norm(b)
    out = perturb_state(b, theta, np.random.default_rng(seed))
    assert abs(np.linalg.norm(out) - 1) <= 1e-12
    assert fidelity(b, out) == pytest.approx((1 + np.cos(theta)) / 2, abs=1e-12)


def test_perturb_matches_rodrigues_matrix():
    b = np.array([0.0, 0.0, 1.0])
    g = np.random.default_rng(5).standard_normal(3)
    axis = g - g.dot(b) * b
    out = perturb_state(b, 0.7, np.random.default_rng(5))
    assert np.allclose(out, rotation_matrix(axis, 0.7) @ b)


def test_perturb_azimuth_isotropic(rng):
    b = np.tile([0.0, 0.0, 1.0], (10**5, 1))
    out = perturb_state(b, np.full(10**5, 0.4), rng)
    az = np.arctan2(out[:, 1], out[:, 0])
    counts, _ = np.histogram(az, bins=36, range=(-np.pi, np.pi))
    assert stats.chisquare(counts).pvalue > 1e-3


def test_gaussian_zero_sigma(rng):
    b = np.array([0.6, 0.0, 0.8])
    assert np.allclose(gaussian_measure(b, GaussianNoiseParams(0.0), rng), b)


def test_gaussian_mean_fidelity(rng):
    b = np.array([0.0, 0.0, 1.0])
    draws = gaussian_measure_many(b, GaussianNoiseParams(0.24), rng, 10**5)
    assert fidelity(draws, b).mean() == pytest.approx(0.971, abs=0.005)


def test_gaussian_loss_law(rng):
    b = np.array([1.0, 0.0, 0.0])
    loss = 1 - fidelity(gaussian_measure_many(b, GaussianNoiseParams(0.1), rng, 10**5), b)
    assert stats.kstest(loss, "expon", args=(0, 0.1**2 / 2)).statistic <= 0.02
    for s in (0.05, 0.1, 0.15):
        loss = 1 - fidelity(gaussian_measure_many(b, GaussianNoiseParams(s), rng, 10**5), b)
        assert loss.mean() == pytest.approx(s**2 / 2, rel=0.05)


def test_gaussian_single_draw_statistics(rng):
    b = np.array([0.0, 1.0, 0.0])
    p = GaussianNoiseParams(0.24)
    f = [fidelity(gaussian_measure(b, p, rng), b) for _ in range(5000)]
    assert np.mean(f) == pytest.approx(0.971, abs=0.01)


class _ScriptedRng:
    def __init__(self, draws):
        self.draws = list(draws)

    def standard_normal(self, shape):
        return np.asarray(self.draws.pop(0), dtype=float)


def test_gaussian_resamples_once():
    b = np.array([0.0, 0.0, 1.0])
    p = GaussianNoiseParams(0.5)
    out = gaussian_measure(b, p, _ScriptedRng([[0, 0, -2.0], [0, 0, 0.2]]))
    assert np.allclose(out, [0, 0, 1])
    with pytest.raises(DegenerateEstimateError):
        gaussian_measure(b, p, _ScriptedRng([[0, 0, -2.0], [0, 0, -2.0]]))


@pytest.fixture(scope="module")
def standard_run():
    from topofreq.propagator import evolve

    p = DriveParams.experiment(1.0)
    return p, evolve(p, n_samples=800)


def test_noiseless_limit(standard_run):
    p, clean = standard_run
    # rotation angles scale as sqrt(beta), and so does the spread
    runs = [mc_chern(p, HeuristicNoiseParams(b, seed=3), 5, clean=clean) for b in (1e-8, 1e-12, 1e-16)]
    stds = [r.std for r in runs]
    assert stds[0] > stds[1] > stds[2]
    assert stds[2] <= 1e-6
    assert runs[2].mean == pytest.approx(runs[2].clean, abs=1e-6)


def test_determinism_and_thread_independence(standard_run):
    p, clean = standard_run
    a = mc_chern(p, HeuristicNoiseParams(0.029, seed=11), 40, threads=1, clean=clean)
    b = mc_chern(p, HeuristicNoiseParams(0.029, seed=11), 40, threads=1, clean=clean)
    c = mc_chern(p, HeuristicNoiseParams(0.029, seed=11), 40, threads=4, clean=clean)
    assert (a.mean, a.std) == (b.mean, b.std) == (c.mean, c.std)
    assert np.array_equal(a.samples, c.samples)
    d = mc_chern(p, HeuristicNoiseParams(0.029, seed=12), 40, clean=clean)
    assert d.mean != a.mean


def test_exchangeable_statistics(standard_run):
    p, clean = standard_run
    res = mc_chern(p, HeuristicNoiseParams(0.029, seed=1), 30, clean=clean)
    vals = list(res.samples)
    perm = list(np.random.default_rng(0).permutation(vals))
    assert noise._fsum_stats(vals) == noise._fsum_stats(perm)


def test_spread_at_reference_noise(standard_run):
    p, clean = standard_run
    res = mc_chern(p, HeuristicNoiseParams(0.029, seed=0), 200, threads=2, clean=clean)
    assert 0.15 <= res.std <= 0.35
    assert res.mean == pytest.approx(-1, abs=0.2)


def test_failed_realizations(monkeypatch, standard_run):
    p, clean = standard_run
    real = noise._one_realization

    def flaky(clean_, n, i, w, fail_every):
        if i % fail_every == 0:
            raise TopofreqError("synthetic failure")
        return real(clean_, n, i, w)

    monkeypatch.setattr(noise, "_one_realization", lambda c, n, i, w: flaky(c, n, i, w, 20))
    res = mc_chern(p, HeuristicNoiseParams(0.029), 40, clean=clean)
    assert set(res.failures) == {0, 20} and res.n == 38
    monkeypatch.setattr(noise, "_one_realization", lambda c, n, i, w: flaky(c, n, i, w, 5))
    with pytest.raises(TopofreqError):
        mc_chern(p, HeuristicNoiseParams(0.029), 40, clean=clean)


def test_argument_checks(standard_run):
    p, clean = standard_run
    with pytest.raises(InvalidArgumentError):
        mc_chern(p, HeuristicNoiseParams(0.029), 1, clean=clean)
    with pytest.raises(InvalidArgumentError):
        mc_chern(p, HeuristicNoiseParams(0.029), 5, threads=0, clean=clean)


def test_exports(tmp_path, standard_run):
    p, clean = standard_run
    res = mc_chern(p, HeuristicNoiseParams(0.029, seed=9), 4, clean=clean)
    res.to_csv(tmp_path / "mc.csv")
    lines = (tmp_path / "mc.csv").read_text().splitlines()
    assert lines[0] == "realization,C_est" and len(lines) == 5
    res.write_summary(tmp_path / "s.json")
    assert json.loads((tmp_path / "s.json").read_text()) == {"mean": res.mean, "std": res.std, "n": 4, "seed": 9}
