"""Quasiperiodic two-tone field, its phase integral and the hardware envelope.

All quantities are dimensionless: energies in units of the drive strength
eta, times in units of 1/eta. :class:`PhysicalUnits` only converts to seconds.
"""

from __future__ import annotations

import csv
import dataclasses
from dataclasses import dataclass, field

import numpy as np
from scipy.special import fresnel

from .errors import InvalidArgumentError

GOLDEN_RATIO = (1 + np.sqrt(5)) / 2

# Device constants of the reference experiment.
OMEGA_MAX_RAD_PER_S = 36.9e6
ETA_FRACTION = 0.9
WINDOW_SECONDS = 20e-6
RAMP_SECONDS = 444e-9
HARDWARE_DT_SECONDS = 0.22e-9
EXPERIMENT_OMEGA1 = 0.125
EXPERIMENT_SAMPLES = 800

# dt * max|h| bound used for the default propagation step.
STEP_ANGLE = 0.05


def max_field_norm(eta: float, M: float) -> float:
    """Upper bound of ``|h(t)|`` over all phases."""
    return abs(eta) * np.sqrt(2.0 + (abs(M) + 2.0) ** 2)


def default_dt(eta: float, M: float) -> float:
    return STEP_ANGLE / max_field_norm(eta, M)


@dataclass(frozen=True)
class PhysicalUnits:
    """Conversion between dimensionless time and seconds.

    ``omega_max`` is taken in rad/s so that ``1/omega1`` at ``omega1 = 0.125 eta``
    comes out near 240 ns, as quoted for the device.
    """

    omega_max: float = OMEGA_MAX_RAD_PER_S
    dt_hardware: float = HARDWARE_DT_SECONDS
    eta_fraction: float = ETA_FRACTION

    def __post_init__(self):
        if not self.omega_max > 0 or not self.dt_hardware > 0:
            raise InvalidArgumentError("omega_max and dt_hardware must be positive")
        if not 0 < self.eta_fraction:
            raise InvalidArgumentError("eta_fraction must be positive")

    @property
    def eta_rad_per_s(self) -> float:
        return self.eta_fraction * self.omega_max

    def to_seconds(self, t):
        return np.asarray(t, dtype=float) / self.eta_rad_per_s

    def to_dimensionless(self, seconds):
        return np.asarray(seconds, dtype=float) * self.eta_rad_per_s


@dataclass(frozen=True)
class DriveParams:
    eta: float = 1.0
    omega1: float = EXPERIMENT_OMEGA1
    omega2: float = EXPERIMENT_OMEGA1 * GOLDEN_RATIO
    phi1: float = 0.0
    phi2: float = 0.0
    M: float = 1.0
    ramp_duration: float = 0.0
    t_total: float = 100.0
    dt: float | None = None

    def __post_init__(self):
        for name in ("eta", "omega1", "omega2", "phi1", "phi2", "M", "ramp_duration", "t_total"):
            if not np.isfinite(getattr(self, name)):
                raise InvalidArgumentError(f"{name} must be finite")
        if self.omega1 <= 0 or self.omega2 <= 0:
            raise InvalidArgumentError("drive frequencies must be positive")
        if self.dt is not None and not self.dt > 0:
            raise InvalidArgumentError(f"dt must be positive, got {self.dt}")
        if not self.t_total > 0 or self.t_total < (self.dt or 0.0):
            raise InvalidArgumentError("t_total must be positive and at least one step")
        if not 0 <= self.ramp_duration <= self.t_total:
            raise InvalidArgumentError("ramp_duration must lie in [0, t_total]")

    @classmethod
    def experiment(cls, M: float = 1.0, units: PhysicalUnits | None = None, **overrides) -> "DriveParams":
        """Parameters of the reference experiment: 20 us window, 444 ns ramp."""
        units = units or PhysicalUnits()
        kwargs = dict(
            eta=1.0,
            omega1=EXPERIMENT_OMEGA1,
            omega2=EXPERIMENT_OMEGA1 * GOLDEN_RATIO,
            M=M,
            t_total=float(units.to_dimensionless(WINDOW_SECONDS)),
            ramp_duration=float(units.to_dimensionless(RAMP_SECONDS)),
        )
        kwargs.update(overrides)
        return cls(**kwargs)

    @property
    def step(self) -> float:
        """Largest allowed propagation step; ``dt`` or the default bound."""
        if self.dt is not None:
            return self.dt
        return min(default_dt(self.eta, self.M), self.t_total)

    def replace(self, **changes) -> "DriveParams":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def _check_times(p: DriveParams, t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    slack = 1e-9 * max(1.0, p.t_total)
    if np.any(~np.isfinite(t)) or np.any(t < -slack) or np.any(t > p.t_total + slack):
        raise InvalidArgumentError(f"time outside [0, {p.t_total}]")
    return np.clip(t, 0.0, p.t_total)


def _phase(omega, phi, ramp, t):
    if ramp == 0:
        return phi + omega * t
    return phi + np.where(t < ramp, omega * t * t / (2 * ramp), omega * (t - ramp / 2))


def instantaneous_phases(p: DriveParams, t):
    """Accumulated tone phases ``theta_i(t) = phi_i + int_0^t omega_i(s) ds``.

    During the ramp the instantaneous frequency grows linearly from zero.
    """
    t = _check_times(p, t)
    return (
        _phase(p.omega1, p.phi1, p.ramp_duration, t),
        _phase(p.omega2, p.phi2, p.ramp_duration, t),
    )


def instantaneous_frequencies(p: DriveParams, t):
    t = _check_times(p, t)
    if p.ramp_duration == 0:
        scale = np.ones_like(t)
    else:
        scale = np.minimum(t / p.ramp_duration, 1.0)
    return p.omega1 * scale, p.omega2 * scale


def field_from_phases(eta, M, theta1, theta2) -> np.ndarray:
    theta1 = np.asarray(theta1, dtype=float)
    theta2 = np.asarray(theta2, dtype=float)
    return eta * np.stack(
        [np.sin(theta1), np.sin(theta2), M - np.cos(theta1) - np.cos(theta2)], axis=-1
    )


def field_at(p: DriveParams, t) -> np.ndarray:
    """Field ``h(t) = eta (sin th1, sin th2, M - cos th1 - cos th2)``; shape ``t.shape + (3,)``."""
    th1, th2 = instantaneous_phases(p, t)
    return field_from_phases(p.eta, p.M, th1, th2)


def _cos_integral(omega, phi, ramp, t):
    """``int_0^t cos(theta(s)) ds`` and the matching sine integral, closed form."""
    t = np.asarray(t, dtype=float)
    if ramp == 0:
        th = phi + omega * t
        return (np.sin(th) - np.sin(phi)) / omega, (np.cos(phi) - np.cos(th)) / omega

    # theta = phi + a s^2 on the ramp; Fresnel integrals give int cos(a s^2) ds
    a = omega / (2 * ramp)
    scale = np.sqrt(np.pi / (2 * a))

    def ramp_part(tau):
        S, C = fresnel(tau / scale)
        ic, is_ = scale * C, scale * S
        return np.cos(phi) * ic - np.sin(phi) * is_, np.sin(phi) * ic + np.cos(phi) * is_

    t_in = np.minimum(t, ramp)
    c_in, s_in = ramp_part(t_in)
    th_knee = phi + omega * ramp / 2
    th = phi + omega * (np.maximum(t, ramp) - ramp / 2)
    c_out = (np.sin(th) - np.sin(th_knee)) / omega
    s_out = (np.cos(th_knee) - np.cos(th)) / omega
    return c_in + c_out, s_in + s_out


def integrated_hz(p: DriveParams, t):
    """``int_0^t h_z(s) ds`` in closed form (Fresnel integrals on the ramp)."""
    t = _check_times(p, t)
    c1, _ = _cos_integral(p.omega1, p.phi1, p.ramp_duration, t)
    c2, _ = _cos_integral(p.omega2, p.phi2, p.ramp_duration, t)
    return p.eta * (p.M * t - c1 - c2)


def virtual_z_phase(p: DriveParams, t):
    """Frame phase ``phi(t) = -2 int_0^t h_z(t') dt'``."""
    return -2.0 * integrated_hz(p, t)


def lab_frame_field(p: DriveParams, t) -> np.ndarray:
    """Transverse field seen before the virtual-Z frame change.

    The lab-frame Hamiltonian is ``h_+ e^{i phi} sigma_- + h.c.``, i.e. the
    transverse part of ``h`` rotated about z by ``phi(t)`` with no z component.
    """
    h = field_at(p, t)
    d = (h[..., 0] + 1j * h[..., 1]) * np.exp(1j * virtual_z_phase(p, t))
    return np.stack([d.real, d.imag, np.zeros_like(d.real)], axis=-1)


@dataclass
class Envelope:
    """Hardware drive samples ``d(t_k)`` with a clipping report."""

    times: np.ndarray
    samples: np.ndarray
    detuning: float = 0.0
    clipped: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))

    @property
    def peak(self) -> float:
        return float(np.max(np.abs(self.samples))) if self.samples.size else 0.0

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t_seconds", "re_d", "im_d"])
            for t, d in zip(self.times, self.samples):
                w.writerow([repr(float(t)), repr(float(d.real)), repr(float(d.imag))])


def envelope_from_field(h_transverse, phase, times_seconds, units: PhysicalUnits) -> Envelope:
    """Build ``d = (h_x + i h_y)/Omega_max * exp(i phi)`` from sampled dimensionless values."""
    h_transverse = np.asarray(h_transverse, dtype=float)
    d = units.eta_fraction * (h_transverse[..., 0] + 1j * h_transverse[..., 1]) * np.exp(1j * np.asarray(phase))
    clipped = np.flatnonzero(np.abs(d) > 1 + 1e-12)
    return Envelope(times=np.asarray(times_seconds, dtype=float), samples=d, clipped=clipped)


def synthesize_envelope(p: DriveParams, units: PhysicalUnits | None = None) -> Envelope:
    """Sample-and-hold drive envelope on the hardware grid.

    Samples with ``|d| > 1`` are listed in ``Envelope.clipped`` but left unchanged.
    """
    units = units or PhysicalUnits()
    t_end = float(units.to_seconds(p.t_total))
    n = int(np.floor(t_end / units.dt_hardware + 1e-9))
    times = np.arange(n) * units.dt_hardware
    tau = np.minimum(units.to_dimensionless(times), p.t_total)
    h = field_at(p, tau)
    return envelope_from_field(h, virtual_z_phase(p, tau), times, units)
