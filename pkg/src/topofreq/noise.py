"""Stochastic error models and the Monte Carlo spread of the extracted Chern number.

Two models are provided. The heuristic one rotates each clean Bloch vector by
an angle whose fidelity loss is exponentially distributed. The Gaussian one
adds isotropic noise to the expectation values and projects back onto the
sphere; for small ``sigma`` the loss ``1 - F`` is then approximately
exponential with mean ``sigma^2 / 2``.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .drive import DriveParams
from .errors import DegenerateEstimateError, InvalidArgumentError, TopofreqError
from .observables import chern_from_work, work_series
from .propagator import Trajectory, evolve
from .tomography import project_bloch

MIN_COMPLETED_FRACTION = 0.9


@dataclass(frozen=True)
class HeuristicNoiseParams:
    beta: float = 0.029
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.beta < 1:
            raise InvalidArgumentError("beta must lie in (0, 1)")


@dataclass(frozen=True)
class GaussianNoiseParams:
    sigma_noise: float = 0.24
    seed: int = 0

    def __post_init__(self):
        if not 0 <= self.sigma_noise < 1:
            raise InvalidArgumentError("sigma_noise must lie in [0, 1)")


def angle_from_loss(x):
    """``theta = arccos(1 - 2 min(x, 1))``, so ``(1 + cos theta)/2 = 1 - min(x, 1)``."""
    x = np.minimum(np.asarray(x, dtype=float), 1.0)
    return np.arccos(np.clip(1.0 - 2.0 * x, -1.0, 1.0))


def sample_perturbation_angle(p: HeuristicNoiseParams, rng: np.random.Generator, size=None):
    return angle_from_loss(rng.exponential(p.beta, size=size))


def _rotate_about_random_axes(b, theta, rng):
    """Rotate each row of ``b`` by ``theta`` about a random axis orthogonal to it."""
    g = rng.standard_normal(b.shape)
    axis = g - np.sum(g * b, axis=-1, keepdims=True) * b
    axis /= np.linalg.norm(axis, axis=-1, keepdims=True)
    # R b = b + sin(theta) (axis x b) + (1 - cos(theta)) axis x (axis x b); axis . b = 0
    cross = np.cross(axis, b)
    th = theta[..., None]
    return b + np.sin(th) * cross - (1.0 - np.cos(th)) * b


def perturb_state(b, theta, rng: np.random.Generator) -> np.ndarray:
    """Rotate ``b`` by exactly ``theta`` about an axis drawn uniformly from the circle
    orthogonal to it (a Gaussian vector, orthogonalised and normalised).

    Uses ``R = 1 + sin(theta) A + (1 - cos(theta)) A^2`` with ``A`` the skew
    matrix of the axis. Accepts one vector or a stack with matching ``theta``.
    """
    b = np.asarray(b, dtype=float)
    theta = np.asarray(theta, dtype=float)
    single = b.ndim == 1
    bb = np.atleast_2d(b)
    th = np.broadcast_to(theta, bb.shape[:-1])
    out = _rotate_about_random_axes(bb, th, rng)
    return out[0] if single else out


def rotation_matrix(axis, theta) -> np.ndarray:
    """Rodrigues matrix ``1 + sin(theta) A + (1 - cos(theta)) A^2``."""
    n = np.asarray(axis, dtype=float)
    n = n / np.linalg.norm(n)
    A = np.array([[0.0, -n[2], n[1]], [n[2], 0.0, -n[0]], [-n[1], n[0], 0.0]])
    return np.eye(3) + math.sin(theta) * A + (1 - math.cos(theta)) * A @ A


def heuristic_perturb(states, p: HeuristicNoiseParams, rng: np.random.Generator) -> np.ndarray:
    """Independent perturbation of every sample of a trajectory."""
    states = np.asarray(states, dtype=float)
    theta = sample_perturbation_angle(p, rng, size=states.shape[0])
    return _rotate_about_random_axes(states, theta, rng)


def gaussian_measure(b, p: GaussianNoiseParams, rng: np.random.Generator) -> np.ndarray:
    """``project_bloch(b + eta)`` with i.i.d. normal components of width ``sigma_noise``."""
    b = np.asarray(b, dtype=float)
    for _ in range(2):
        noisy = b + p.sigma_noise * rng.standard_normal(b.shape)
        try:
            return project_bloch(noisy)
        except DegenerateEstimateError:
            continue
    raise DegenerateEstimateError("Gaussian measurement hit the zero vector twice")


def gaussian_measure_many(b, p: GaussianNoiseParams, rng: np.random.Generator, n: int) -> np.ndarray:
    """``n`` independent Gaussian measurements of one state, shape ``(n, 3)``."""
    b = np.asarray(b, dtype=float)
    noisy = b + p.sigma_noise * rng.standard_normal((n, 3))
    bad = np.linalg.norm(noisy, axis=1) == 0
    if np.any(bad):
        noisy[bad] = b + p.sigma_noise * rng.standard_normal((int(bad.sum()), 3))
    return project_bloch(noisy)


def realization_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(index)]))


@dataclass
class MonteCarloResult:
    mean: float
    std: float
    samples: np.ndarray
    seed: int
    requested: int
    failures: dict = field(default_factory=dict)
    clean: float = float("nan")

    @property
    def n(self) -> int:
        return int(np.count_nonzero(np.isfinite(self.samples)))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["realization", "C_est"])
            for i, c in enumerate(self.samples):
                w.writerow([i, repr(float(c))])

    def summary(self) -> dict:
        return {"mean": self.mean, "std": self.std, "n": self.n, "seed": self.seed}

    def write_summary(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.summary(), fh, indent=2, sort_keys=True)


def _one_realization(clean: Trajectory, noise: HeuristicNoiseParams, index: int, window: str) -> float:
    rng = realization_rng(noise.seed, index)
    noisy = clean.with_states(heuristic_perturb(clean.states, noise, rng), noise_index=index)
    c, _ = chern_from_work(work_series(noisy, window), clean.params)
    if not np.isfinite(c):
        raise TopofreqError("non-finite Chern estimate")
    return c


def _fsum_stats(values) -> tuple[float, float]:
    n = len(values)
    mean = math.fsum(values) / n
    var = math.fsum((v - mean) ** 2 for v in values) / (n - 1)
    return mean, math.sqrt(var)


def mc_chern(
    p: DriveParams,
    noise: HeuristicNoiseParams,
    realizations: int = 500,
    threads: int = 1,
    n_samples: int = 800,
    window: str = "exclude_transient",
    clean: Trajectory | None = None,
) -> MonteCarloResult:
    """Chern-number distribution under the heuristic model.

    The clean trajectory is simulated once; each realization perturbs all of
    its samples independently and reruns work, fit and Chern extraction.
    Realization ``i`` always draws from ``SeedSequence([seed, i])``, so the
    result does not depend on ``threads``.
    """
    if realizations < 2:
        raise InvalidArgumentError("need at least two realizations")
    if threads < 1:
        raise InvalidArgumentError("threads must be at least 1")
    clean = clean if clean is not None else evolve(p, n_samples=n_samples)
    c_clean, _ = chern_from_work(work_series(clean, window), p)

    def run(i):
        try:
            return i, _one_realization(clean, noise, i, window), None
        except (TopofreqError, FloatingPointError, ValueError) as exc:
            return i, float("nan"), f"{type(exc).__name__}: {exc}"

    if threads == 1:
        results = [run(i) for i in range(realizations)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, range(realizations)))
    samples = np.full(realizations, np.nan)
    failures = {}
    for i, c, reason in results:
        samples[i] = c
        if reason is not None:
            failures[i] = reason
    done = [float(c) for c in samples if np.isfinite(c)]
    if len(done) < MIN_COMPLETED_FRACTION * realizations or len(done) < 2:
        raise TopofreqError(f"only {len(done)} of {realizations} realizations completed: {failures}")
    mean, std = _fsum_stats(done)
    return MonteCarloResult(mean, std, samples, noise.seed, realizations, failures, float(c_clean))
