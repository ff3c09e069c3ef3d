"""Static half-BHZ Chern insulator ``h(k) = (sin kx, sin ky, B (M - cos kx - cos ky))``.

Orientation convention: with the connection ``A = i <u|d u>`` the curvature
``F_xy = h . (d_kx h x d_ky h) / (2 |h|^3)`` belongs to the lower band
(``<sigma> = -h_hat``); the upper band carries ``-F_xy``. The lower band then
has ``C = -1`` for ``0 < M < 2`` and ``C = +1`` for ``-2 < M < 0``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import GapClosedError, InvalidArgumentError

GAP_TOL = 1e-9


@dataclass(frozen=True)
class BhzParams:
    M: float
    B: float = 1.0

    def __post_init__(self):
        if not (np.isfinite(self.M) and np.isfinite(self.B)):
            raise InvalidArgumentError("M and B must be finite")


def h_of_k(p: BhzParams, kx, ky) -> np.ndarray:
    kx = np.asarray(kx, dtype=float)
    ky = np.asarray(ky, dtype=float)
    return np.stack(
        np.broadcast_arrays(np.sin(kx), np.sin(ky), p.B * (p.M - np.cos(kx) - np.cos(ky))), axis=-1
    )


def dh_dk(p: BhzParams, kx, ky):
    kx = np.asarray(kx, dtype=float)
    ky = np.asarray(ky, dtype=float)
    zero = np.zeros(np.broadcast(kx, ky).shape)
    dx = np.stack([np.cos(kx) + zero, zero, p.B * np.sin(kx) + zero], axis=-1)
    dy = np.stack([zero, np.cos(ky) + zero, p.B * np.sin(ky) + zero], axis=-1)
    return dx, dy


def bands(p: BhzParams, kx, ky):
    """``(lambda_-, lambda_+) = (-|h|, +|h|)``."""
    e = np.linalg.norm(h_of_k(p, kx, ky), axis=-1)
    return -e, e


def _eigenstate(h, sign):
    h = np.asarray(h, dtype=float)
    norm = np.linalg.norm(h, axis=-1)
    if np.any(norm < GAP_TOL):
        raise GapClosedError("|h(k)| vanishes; eigenstates undefined")
    hx, hy, hz = np.moveaxis(h, -1, 0)
    hp = hx + 1j * hy
    # psi_s ~ (|h| + s h_z, s (h_x + i h_y)), singular where |h| + s h_z -> 0;
    # there the other column of the projector, (s (h_x - i h_y), |h| - s h_z), is used
    regular = (norm + sign * hz) >= GAP_TOL * norm
    a = np.where(regular, norm + sign * hz, sign * np.conj(hp))
    b = np.where(regular, sign * hp, norm - sign * hz)
    vec = np.stack([a, b], axis=-1).astype(complex)
    return vec / np.linalg.norm(vec, axis=-1, keepdims=True)


def eigenstate_from_field(h, band: str = "lower") -> np.ndarray:
    if band == "lower":
        return _eigenstate(h, -1)
    if band == "upper":
        return _eigenstate(h, +1)
    raise InvalidArgumentError(f"band must be 'lower' or 'upper', got {band!r}")


def eigenstate_lower(p: BhzParams, kx, ky) -> np.ndarray:
    """Lower-band spinor ``(|h| - h_z, -(h_x + i h_y)) / sqrt(2|h|(|h| - h_z))``.

    Where ``|h| - h_z < 1e-9 |h|`` the alternate gauge
    ``(-h_x + i h_y, |h| + h_z) / sqrt(2|h|(|h| + h_z))`` is used instead.
    """
    return _eigenstate(h_of_k(p, kx, ky), -1)


def eigenstate_upper(p: BhzParams, kx, ky) -> np.ndarray:
    return _eigenstate(h_of_k(p, kx, ky), +1)


def berry_curvature(p: BhzParams, kx, ky):
    """Analytic ``F_xy = h . (d_kx h x d_ky h) / (2 |h|^3)``."""
    h = h_of_k(p, kx, ky)
    norm = np.linalg.norm(h, axis=-1)
    if np.any(norm < GAP_TOL):
        raise GapClosedError("Berry curvature diverges where the gap closes")
    dx, dy = dh_dk(p, kx, ky)
    return np.einsum("...i,...i->...", h, np.cross(dx, dy)) / (2 * norm**3)


def bz_grid(n: int):
    k = 2 * np.pi * np.arange(n) / n
    return np.meshgrid(k, k, indexing="ij")


def link_chern(states: np.ndarray) -> float:
    """Gauge-invariant plaquette sum for a periodic ``(n, n, 2)`` grid of band states.

    Each plaquette contributes minus the argument of the product of normalised
    overlaps around it (the Berry phase for ``A = i <u|d u>``); the total is an
    integer multiple of ``2 pi``.
    """
    u1 = np.sum(states.conj() * np.roll(states, -1, axis=0), axis=-1)
    u2 = np.sum(states.conj() * np.roll(states, -1, axis=1), axis=-1)
    u1 = u1 / np.abs(u1)
    u2 = u2 / np.abs(u2)
    flux = -np.angle(u1 * np.roll(u2, -1, axis=0) * np.conj(np.roll(u1, -1, axis=1)) * np.conj(u2))
    return float(flux.sum() / (2 * np.pi))


def chern_number(p: BhzParams, grid_n: int = 32, band: str = "lower") -> int:
    """Integer Chern number of one band on a ``grid_n x grid_n`` Brillouin-zone grid.

    The lower band matches the curvature integral of :func:`berry_curvature`.
    """
    if grid_n < 4:
        raise InvalidArgumentError("grid_n must be at least 4")
    kx, ky = bz_grid(grid_n)
    h = h_of_k(p, kx, ky)
    if np.min(np.linalg.norm(h, axis=-1)) < GAP_TOL:
        raise GapClosedError(f"gap closes on the grid at M = {p.M}")
    c = link_chern(eigenstate_from_field(h, band))
    return int(round(c))


def curvature_integral(p: BhzParams, grid_n: int = 256) -> float:
    """Riemann sum ``(1/2pi) sum F_xy dk^2`` over the Brillouin zone."""
    kx, ky = bz_grid(grid_n)
    dk = 2 * np.pi / grid_n
    return float(berry_curvature(p, kx, ky).sum() * dk * dk / (2 * np.pi))


def min_gap(p: BhzParams, grid_n: int = 64) -> float:
    kx, ky = bz_grid(grid_n)
    lo, hi = bands(p, kx, ky)
    return float(np.min(hi - lo))


@dataclass(frozen=True)
class WindingDiagnostic:
    zmin: float
    zmax: float
    origin_enclosed: bool | None
    degree: int | None


def winding_diagnostic(p: BhzParams, grid_n: int = 64) -> WindingDiagnostic:
    """Range of ``h_z`` over the image surface and whether it encloses the origin.

    Enclosure is decided by counting signed crossings of the ray ``{(0, 0, z), z > 0}``
    with the surface. The ray meets it only where ``sin kx = sin ky = 0``; each
    crossing counts with the sign of ``d(h_x, h_y)/d(k_x, k_y) = cos kx cos ky``.
    ``origin_enclosed`` is ``None`` when a crossing sits on the origin.
    """
    kx, ky = bz_grid(grid_n)
    hz = h_of_k(p, kx, ky)[..., 2]
    zmin, zmax = float(hz.min()), float(hz.max())
    degree = 0
    for ax in (0.0, np.pi):
        for ay in (0.0, np.pi):
            z = p.B * (p.M - np.cos(ax) - np.cos(ay))
            if abs(z) < GAP_TOL:
                return WindingDiagnostic(zmin, zmax, None, None)
            if z > 0:
                degree += int(np.sign(np.cos(ax) * np.cos(ay)))
    return WindingDiagnostic(zmin, zmax, degree != 0, degree)


def curvature_to_csv(p: BhzParams, path, grid_n: int = 64) -> None:
    kx, ky = bz_grid(grid_n)
    F = berry_curvature(p, kx, ky)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["kx", "ky", "F_xy"])
        for a, b, f in zip(kx.ravel(), ky.ravel(), F.ravel()):
            w.writerow([repr(float(a)), repr(float(b)), repr(float(f))])
