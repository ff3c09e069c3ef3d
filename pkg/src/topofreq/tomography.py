"""Simulated projective readout and the tomography post-processing chain.

Raw Bloch components come from per-basis shot counts. They are rotated out of
the virtual-Z frame, projected radially onto the sphere (for one qubit this is
the maximum-likelihood physical state) and summarised by purity and fidelity.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares

from .errors import DegenerateEstimateError, FitError, InvalidArgumentError

BASES = ("X", "Y", "Z")
FIT_FORMS = ("purity", "fidelity")


@dataclass(frozen=True)
class ShotRecord:
    """Counts of ``+1`` and ``-1`` outcomes in each of the X, Y, Z bases."""

    plus: tuple[int, int, int]
    minus: tuple[int, int, int]
    shots_per_basis: int

    def __post_init__(self):
        for p, m in zip(self.plus, self.minus):
            if p < 0 or m < 0 or p + m != self.shots_per_basis:
                raise InvalidArgumentError("counts must sum to shots_per_basis in every basis")

    def raw_bloch(self) -> np.ndarray:
        plus = np.asarray(self.plus, dtype=float)
        minus = np.asarray(self.minus, dtype=float)
        return (plus - minus) / self.shots_per_basis

    def standard_error(self) -> np.ndarray:
        r = self.raw_bloch()
        return np.sqrt(np.maximum(1.0 - r * r, 0.0) / self.shots_per_basis)


def sample_shots(b, shots: int, rng: np.random.Generator) -> ShotRecord:
    """Independent binomial readout per basis with ``P(+1) = (1 + b_i)/2``."""
    b = np.asarray(b, dtype=float)
    if b.shape != (3,) or not np.all(np.isfinite(b)):
        raise InvalidArgumentError("b must be a finite 3-vector")
    if abs(np.linalg.norm(b) - 1.0) > 1e-6:
        raise InvalidArgumentError("b must be a unit Bloch vector")
    if shots < 1:
        raise InvalidArgumentError("shots must be at least 1")
    p_plus = np.clip((1.0 + b) / 2.0, 0.0, 1.0)
    plus = rng.binomial(shots, p_plus)
    return ShotRecord(tuple(int(v) for v in plus), tuple(int(shots - v) for v in plus), int(shots))


def rotate_frame(raw, phi):
    """Undo the virtual-Z frame: rotate ``(x, y)`` by ``-phi`` about z.

    Works on a single 3-vector or a stack ``(..., 3)`` with matching ``phi``.
    """
    raw = np.asarray(raw, dtype=float)
    phi = np.asarray(phi, dtype=float)
    c, s = np.cos(phi), np.sin(phi)
    x, y, z = raw[..., 0], raw[..., 1], raw[..., 2]
    return np.stack([c * x + s * y, -s * x + c * y, z + 0 * phi], axis=-1)


def project_bloch(raw) -> np.ndarray:
    raw = np.asarray(raw, dtype=float)
    norm = np.linalg.norm(raw, axis=-1, keepdims=True)
    if np.any(norm == 0) or not np.all(np.isfinite(norm)):
        raise DegenerateEstimateError("zero Bloch estimate (maximally mixed); no direction to project onto")
    return raw / norm


def purity(raw) -> float:
    """``tr rho^2 = 1/2 + |r|^2/2`` with ``|r|`` clamped to 1."""
    r = min(float(np.linalg.norm(raw)), 1.0)
    return 0.5 + 0.5 * r * r


def fidelity(a, b):
    """``(1 + a . b)/2`` for unit Bloch vectors (vectorised over leading axes)."""
    f = 0.5 * (1.0 + np.sum(np.asarray(a, dtype=float) * np.asarray(b, dtype=float), axis=-1))
    return np.clip(f, 0.0, 1.0)


@dataclass(frozen=True)
class DensityEstimate:
    raw: np.ndarray
    bloch: np.ndarray
    purity: float

    @classmethod
    def from_raw(cls, raw) -> "DensityEstimate":
        raw = np.asarray(raw, dtype=float)
        return cls(raw=raw, bloch=project_bloch(raw), purity=purity(raw))

    @classmethod
    def from_shots(cls, rec: ShotRecord, phi: float = 0.0) -> "DensityEstimate":
        return cls.from_raw(rotate_frame(rec.raw_bloch(), phi))


@dataclass(frozen=True)
class DecayFit:
    form: str
    amplitude: float
    timescale: float
    infinite_timescale: bool
    residual_rms: float
    starts_tried: int

    def __iter__(self):
        return iter((self.amplitude, self.timescale))


def _model(form, amp, tau, t):
    decay = np.exp(-t / tau)
    return 0.5 + amp * decay if form == "purity" else amp * decay


def fit_exp_decay(times, values, form: str = "purity", max_nfev: int = 2000) -> DecayFit:
    """Nonlinear least squares on ``1/2 + a e^{-t/lambda}`` or ``b e^{-t/xi}``.

    Three starts with timescales log-spaced around the data span are tried and
    the lowest residual wins. A timescale beyond ``1e6`` spans is reported as
    infinite, with the amplitude taken from the mean level.
    """
    if form not in FIT_FORMS:
        raise InvalidArgumentError(f"form must be one of {FIT_FORMS}")
    t = np.asarray(times, dtype=float)
    y = np.asarray(values, dtype=float)
    if t.shape != y.shape or t.ndim != 1 or t.size < 3:
        raise InvalidArgumentError("need matching 1-D times and values with at least three points")
    if not (np.all(np.isfinite(t)) and np.all(np.isfinite(y))):
        raise InvalidArgumentError("times and values must be finite")
    lo = 0.0 if form == "fidelity" else 0.5
    if np.any(y < lo - 0.1) or np.any(y > 1.1):
        raise InvalidArgumentError(f"values outside the range of the {form} form")

    floor = 0.5 if form == "purity" else 0.0
    span = float(np.ptp(t))
    if span <= 0:
        raise InvalidArgumentError("times must not all coincide")
    t0 = t - t.min()
    if np.ptp(y) < 1e-14:
        amp = float(y.mean() - floor)
        return DecayFit(form, amp, math.inf, True, 0.0, 0)

    # parameters (amplitude, log timescale); the shift to t0 is undone on the amplitude
    log_lo, log_hi = math.log(span * 1e-3), math.log(span * 1e8)

    def resid(q):
        return _model(form, q[0], math.exp(q[1]), t0) - y

    best = None
    starts = np.log(span) + np.log([0.3, 3.0, 30.0])
    for s in starts:
        amp0 = float(max(y[0] - floor, 1e-6))
        try:
            res = least_squares(resid, [amp0, s], bounds=([-2.0, log_lo], [2.0, log_hi]), max_nfev=max_nfev)
        except (ValueError, FloatingPointError) as exc:  # pragma: no cover
            raise FitError(f"least squares failed: {exc}", {"start": float(s)}) from exc
        if res.success and (best is None or res.cost < best.cost):
            best = res
    if best is None:
        raise FitError(
            "exponential fit did not converge from any start",
            {"form": form, "starts": [float(math.exp(s)) for s in starts], "n_points": int(t.size)},
        )
    tau = float(math.exp(best.x[1]))
    amp = float(best.x[0]) * math.exp(t.min() / tau)
    rms = float(np.sqrt(2 * best.cost / t.size))
    if tau > 1e6 * span:
        return DecayFit(form, float(y.mean() - floor), math.inf, True, rms, len(starts))
    return DecayFit(form, amp, tau, False, rms, len(starts))


def tomography_to_csv(path, times, raw, bloch, purities, fidelities) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "sx_raw", "sy_raw", "sz_raw", "sx", "sy", "sz", "purity", "fidelity"])
        for row in zip(times, raw, bloch, purities, fidelities):
            t, r, b, pu, fi = row
            w.writerow([repr(float(t))] + [repr(float(v)) for v in r] + [repr(float(v)) for v in b]
                       + [repr(float(pu)), repr(float(fi))])
