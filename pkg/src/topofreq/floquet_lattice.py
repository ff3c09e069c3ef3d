"""Two-dimensional Floquet-lattice dual of the two-tone drive.

With ``|Psi(t)> = e^{-iEt} sum_n psi_n e^{-i n.omega t}`` the Schroedinger
equation becomes ``E psi_n = sum_p h_p psi_{n-p} - (n . omega) psi_n``, where
``h(t) = sum_p h_p e^{-i p . omega t}`` are the Fourier blocks of the field
(tone phases absorbed into ``h_p``). Sites ``n = (n1, n2)`` count photons of
each tone; the tilt ``-n . omega`` acts as a static electric field.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import bhz
from .drive import DriveParams, instantaneous_phases
from .errors import InvalidArgumentError
from .propagator import evolve
from .spin import SIGMA_X, SIGMA_Y, SIGMA_Z

MAX_DENSE_RADIUS = 12


def fourier_hoppings(p: DriveParams) -> dict[tuple[int, int], np.ndarray]:
    """Fourier blocks ``h_p`` of the field, keyed by ``p = (p1, p2)``.

    ``sin th sigma = sigma/(2i) e^{i th} - sigma/(2i) e^{-i th}`` and
    ``-cos th sigma_z = -sigma_z/2 (e^{i th} + e^{-i th})``, so e.g.
    ``h_(-1,0) = eta (sigma_x/(2i) - sigma_z/2) e^{i phi1}``.
    """
    eta = p.eta
    e1 = np.exp(1j * p.phi1)
    e2 = np.exp(1j * p.phi2)
    hop1 = eta * (SIGMA_X / 2j - SIGMA_Z / 2) * e1
    hop2 = eta * (SIGMA_Y / 2j - SIGMA_Z / 2) * e2
    return {
        (0, 0): eta * p.M * SIGMA_Z,
        (-1, 0): hop1,
        (1, 0): hop1.conj().T,
        (0, -1): hop2,
        (0, 1): hop2.conj().T,
    }


def reconstruct(hoppings, angles) -> np.ndarray:
    """``sum_p h_p exp(-i p . angles)`` as a 2x2 matrix."""
    a1, a2 = angles
    out = np.zeros((2, 2), dtype=complex)
    for (p1, p2), block in hoppings.items():
        out += block * np.exp(-1j * (p1 * a1 + p2 * a2))
    return out


@dataclass(frozen=True)
class Truncation:
    radius: int
    boundary: str = "open"

    def __post_init__(self):
        if self.radius < 1:
            raise InvalidArgumentError("truncation radius must be at least 1")
        if self.boundary != "open":
            raise InvalidArgumentError("only open boundaries are supported (the tilt is unbounded)")

    @property
    def width(self) -> int:
        return 2 * self.radius + 1

    @property
    def dimension(self) -> int:
        return 2 * self.width**2

    def site_index(self, n1, n2):
        N = self.radius
        return (np.asarray(n1) + N) * self.width + (np.asarray(n2) + N)


@dataclass
class QuasienergyOperator:
    matrix: sp.csr_matrix
    hoppings: dict
    omega: tuple[float, float]
    phases: tuple[float, float]
    truncation: Truncation
    include_tilt: bool

    def hermiticity_residual(self) -> float:
        diff = self.matrix - self.matrix.conj().T
        return float(abs(diff).max()) if diff.nnz else 0.0

    def spectrum(self) -> np.ndarray:
        if self.truncation.radius > MAX_DENSE_RADIUS:
            raise InvalidArgumentError(f"dense eigensolve limited to radius <= {MAX_DENSE_RADIUS}")
        return np.linalg.eigvalsh(self.matrix.toarray())


def build_operator(p: DriveParams, tr: Truncation, include_tilt: bool = True) -> QuasienergyOperator:
    """Open-boundary lattice operator over the ``(site, orbital)`` basis."""
    hops = fourier_hoppings(p)
    N = tr.radius
    n1, n2 = np.meshgrid(np.arange(-N, N + 1), np.arange(-N, N + 1), indexing="ij")
    n1 = n1.ravel()
    n2 = n2.ravel()
    rows, cols, vals = [], [], []
    for (p1, p2), block in hops.items():
        # <n| K |n - p> = h_p
        m1, m2 = n1 - p1, n2 - p2
        ok = (np.abs(m1) <= N) & (np.abs(m2) <= N)
        src = tr.site_index(n1[ok], n2[ok])
        dst = tr.site_index(m1[ok], m2[ok])
        for a in range(2):
            for b in range(2):
                if block[a, b] != 0:
                    rows.append(2 * src + a)
                    cols.append(2 * dst + b)
                    vals.append(np.full(src.size, block[a, b]))
    if include_tilt:
        tilt = -(n1 * p.omega1 + n2 * p.omega2)
        idx = tr.site_index(n1, n2)
        for a in range(2):
            rows.append(2 * idx + a)
            cols.append(2 * idx + a)
            vals.append(tilt.astype(complex))
    mat = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(tr.dimension, tr.dimension),
    ).tocsr()
    mat.sum_duplicates()
    return QuasienergyOperator(mat, hops, (p.omega1, p.omega2), (p.phi1, p.phi2), tr, include_tilt)


def bloch_hamiltonian(hoppings, kx, ky) -> np.ndarray:
    """Untilted lattice Bloch matrix ``sum_p h_p e^{-i k . p}`` for plane waves ``psi_n = e^{ik.n} u``."""
    return reconstruct(hoppings, (kx, ky))


def zero_field_bands(p: DriveParams, kx: float, ky: float):
    """Bands of the untilted lattice at momentum ``k``; equal BHZ bands at ``k + (phi1, phi2)``."""
    evals = np.linalg.eigvalsh(bloch_hamiltonian(fourier_hoppings(p), kx, ky))
    return float(evals[0]), float(evals[1])


def adiabatic_consistency(p: DriveParams, n_samples: int = 400, band: str = "upper") -> float:
    """Largest Bloch distance between the driven state and the BHZ eigenstate at ``k0 + omega t``.

    ``k0 = (phi1, phi2)``; during a frequency ramp the swept momentum follows
    the accumulated tone phases instead of ``omega t``.
    """
    traj = evolve(p, n_samples=n_samples, band=band)
    k1, k2 = instantaneous_phases(p, traj.times)
    h = p.eta * bhz.h_of_k(bhz.BhzParams(p.M), k1, k2)
    ref = h / np.linalg.norm(h, axis=-1, keepdims=True)
    if band == "lower":
        ref = -ref
    return float(np.max(np.linalg.norm(traj.states - ref, axis=1)))


def central_window_mismatch(p: DriveParams, radius: int, grow: int = 2, fraction: float = 1 / 3) -> float:
    """Largest distance from each eigenvalue in the central part of the radius-``N``
    tilted spectrum to the nearest eigenvalue of the radius-``N + grow`` spectrum.

    "Central" keeps eigenvalues within ``fraction / 2`` of the spectral width around
    the spectral centre.
    """
    small = build_operator(p, Truncation(radius)).spectrum()
    large = build_operator(p, Truncation(radius + grow)).spectrum()
    centre = 0.5 * (small[0] + small[-1])
    half = 0.5 * fraction * (small[-1] - small[0])
    window = small[np.abs(small - centre) <= half]
    pos = np.searchsorted(large, window)
    lo = np.abs(window - large[np.clip(pos - 1, 0, large.size - 1)])
    hi = np.abs(window - large[np.clip(pos, 0, large.size - 1)])
    return float(np.max(np.minimum(lo, hi)))


def spectrum_to_csv(evals, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "quasienergy"])
        for i, e in enumerate(evals):
            w.writerow([i, repr(float(e))])
