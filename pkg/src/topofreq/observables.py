"""Work done by each drive tone, linear pumping fits and the Chern estimate."""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass

import numpy as np
from scipy import stats
from scipy.integrate import cumulative_trapezoid

from .drive import DriveParams, field_at, instantaneous_frequencies, instantaneous_phases
from .errors import InvalidArgumentError
from .propagator import Trajectory

FIT_WINDOWS = ("exclude_transient", "full")


@dataclass(frozen=True)
class LinearFit:
    slope: float
    intercept: float
    slope_ci95: float
    t_start: float
    t_end: float
    n_points: int


@dataclass
class WorkRecord:
    times: np.ndarray
    W1: np.ndarray
    W2: np.ndarray
    fit1: LinearFit
    fit2: LinearFit
    window: str = "exclude_transient"

    def to_csv(self, path, time_scale: float = 1.0, time_label: str = "t", work_scale: float = 1.0) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([time_label, "W1", "W2"])
            for t, a, b in zip(self.times * time_scale, self.W1 * work_scale, self.W2 * work_scale):
                w.writerow([repr(float(t)), repr(float(a)), repr(float(b))])

    def fit_summary(self) -> dict:
        return {"window": self.window, "fit1": asdict(self.fit1), "fit2": asdict(self.fit2)}

    def write_fit_summary(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.fit_summary(), fh, indent=2, sort_keys=True)


def dh_dt(p: DriveParams, t):
    """Time derivatives of the two tone terms ``h_1`` and ``h_2``.

    ``h_1 = eta (sin th1, 0, -cos th1)`` so ``dh_1/dt = eta w1(t) (cos th1, 0, sin th1)``,
    with ``w1(t)`` the instantaneous (ramped) frequency; likewise for tone 2 along y.
    """
    th1, th2 = instantaneous_phases(p, t)
    w1, w2 = instantaneous_frequencies(p, t)
    zero = np.zeros_like(th1)
    d1 = p.eta * w1[..., None] * np.stack([np.cos(th1), zero, np.sin(th1)], axis=-1)
    d2 = p.eta * w2[..., None] * np.stack([zero, np.cos(th2), np.sin(th2)], axis=-1)
    return d1, d2


def fit_line(t, y, level: float = 0.95) -> LinearFit:
    """Least-squares line with a two-sided Student-t confidence half-width on the slope."""
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if t.size < 3:
        raise InvalidArgumentError("need at least three points for a slope confidence interval")
    res = stats.linregress(t, y)
    q = stats.t.ppf(0.5 + level / 2, t.size - 2)
    return LinearFit(
        slope=float(res.slope),
        intercept=float(res.intercept),
        slope_ci95=float(q * res.stderr),
        t_start=float(t[0]),
        t_end=float(t[-1]),
        n_points=int(t.size),
    )


def fit_start(p: DriveParams, window: str = "exclude_transient") -> float:
    """First time included in the pumping fit.

    The default skips the ramp and the following ``omega_1`` period.
    """
    if window == "full":
        return 0.0
    if window == "exclude_transient":
        return p.ramp_duration + 2 * np.pi / p.omega1
    raise InvalidArgumentError(f"unknown fit window {window!r}")


def drive_powers(p: DriveParams, times, states):
    d1, d2 = dh_dt(p, times)
    states = np.asarray(states, dtype=float)
    return np.einsum("ij,ij->i", d1, states), np.einsum("ij,ij->i", d2, states)


def work_series(traj: Trajectory, window: str = "exclude_transient") -> WorkRecord:
    """Cumulative work ``W_i(t) = int_0^t <dh_i/dt> dt'`` by the trapezoid rule, plus fits."""
    if len(traj) < 2:
        raise InvalidArgumentError("work needs at least two samples")
    p = traj.params
    P1, P2 = drive_powers(p, traj.times, traj.states)
    W1 = cumulative_trapezoid(P1, traj.times, initial=0.0)
    W2 = cumulative_trapezoid(P2, traj.times, initial=0.0)
    mask = traj.times >= fit_start(p, window) - 1e-12
    if mask.sum() < 3:
        raise InvalidArgumentError("fit window holds fewer than three samples")
    return WorkRecord(
        times=traj.times,
        W1=W1,
        W2=W2,
        fit1=fit_line(traj.times[mask], W1[mask]),
        fit2=fit_line(traj.times[mask], W2[mask]),
        window=window,
    )


def chern_from_slopes(slope1, slope2, ci1, ci2, omega1, omega2):
    scale = np.pi / (omega1 * omega2)
    return scale * (slope1 - slope2), scale * np.hypot(ci1, ci2)


def chern_from_work(rec: WorkRecord, p: DriveParams) -> tuple[float, float]:
    """``C = pi (dW1/dt - dW2/dt) / (omega1 omega2)`` with the CI propagated in quadrature."""
    c, ci = chern_from_slopes(
        rec.fit1.slope, rec.fit2.slope, rec.fit1.slope_ci95, rec.fit2.slope_ci95, p.omega1, p.omega2
    )
    return float(c), float(ci)


def energy(p: DriveParams, times, states) -> np.ndarray:
    return np.einsum("ij,ij->i", field_at(p, times), np.asarray(states, dtype=float))


def energy_balance(traj: Trajectory) -> float:
    """``|<H(T)> - <H(0)> - W1(T) - W2(T)|`` on the trajectory's own sample grid.

    The static ``eta M sigma_z`` term does no work, so the two tone works must
    account for the full change of the energy expectation.
    """
    p = traj.params
    E = energy(p, traj.times[[0, -1]], traj.states[[0, -1]])
    P1, P2 = drive_powers(p, traj.times, traj.states)
    W = np.trapezoid(P1 + P2, traj.times) if hasattr(np, "trapezoid") else np.trapz(P1 + P2, traj.times)
    return float(abs(E[1] - E[0] - W))
