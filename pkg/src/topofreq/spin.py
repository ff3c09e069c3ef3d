"""Exact 2x2 linear algebra for a spin-1/2.

Conventions: spinors are complex arrays ``(c0, c1)`` in the sigma_z basis with
``sigma_z |0> = +|0>``; Bloch vectors and fields are real arrays of shape (3,).
Global phase is not tracked; it is fixed (c0 real, non-negative) only when
converting a Bloch vector back to a spinor.
"""

from __future__ import annotations

import numpy as np

from .errors import InvalidArgumentError

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
IDENTITY = np.eye(2, dtype=complex)
PAULI = np.stack([SIGMA_X, SIGMA_Y, SIGMA_Z])

_SMALL_ANGLE = 1e-12


def _as_finite_vector(v, name, size=3):
    arr = np.asarray(v, dtype=float)
    if arr.shape != (size,):
        raise InvalidArgumentError(f"{name} must have shape ({size},), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidArgumentError(f"{name} must be finite, got {arr}")
    return arr


def field_matrix(h) -> np.ndarray:
    """Return the 2x2 matrix ``h . sigma``."""
    hx, hy, hz = _as_finite_vector(h, "h")
    return np.array([[hz, hx - 1j * hy], [hx + 1j * hy, -hz]], dtype=complex)


def pauli_components(m) -> np.ndarray:
    """Decompose a 2x2 matrix as ``a0 * 1 + a . sigma``; returns ``(a0, ax, ay, az)``."""
    m = np.asarray(m, dtype=complex)
    a0 = np.trace(m) / 2
    rest = np.einsum("kij,ji->k", PAULI, m) / 2
    return np.concatenate([[a0], rest])


def pauli_exp(h, dt: float) -> np.ndarray:
    """Closed-form ``exp(-i (h . sigma) dt)``.

    Uses ``cos(|h| dt) 1 - i sin(|h| dt) (h_hat . sigma)``. A vanishing rotation
    angle returns the identity to second order instead of normalising ``h``.
    """
    h = _as_finite_vector(h, "h")
    if not np.isfinite(dt) or dt < 0:
        raise InvalidArgumentError(f"dt must be finite and non-negative, got {dt}")
    scale = float(np.max(np.abs(h)))
    if scale == 0.0:
        return IDENTITY.copy()
    unit = h / scale
    norm = scale * float(np.linalg.norm(unit))
    angle = norm * dt
    if angle < _SMALL_ANGLE:
        # sin(|h|dt) h_hat -> h dt, cos -> 1 - angle^2/2
        c = 1.0 - 0.5 * angle * angle
        sx, sy, sz = h * dt
    else:
        c = np.cos(angle)
        sx, sy, sz = np.sin(angle) * unit / np.linalg.norm(unit)
    return np.array(
        [
            [c - 1j * sz, -1j * (sx - 1j * sy)],
            [-1j * (sx + 1j * sy), c + 1j * sz],
        ]
    )


def normalize_spinor(s) -> np.ndarray:
    s = np.asarray(s, dtype=complex)
    norm = np.linalg.norm(s)
    if s.shape != (2,) or norm == 0 or not np.isfinite(norm):
        raise InvalidArgumentError(f"cannot normalise spinor {s}")
    return s / norm


def bloch_of(s) -> np.ndarray:
    """Pauli expectation values ``(<sx>, <sy>, <sz>)`` of a spinor."""
    s = np.asarray(s, dtype=complex)
    if s.shape != (2,):
        raise InvalidArgumentError(f"spinor must have shape (2,), got {s.shape}")
    norm2 = float(np.vdot(s, s).real)
    if norm2 == 0 or not np.isfinite(norm2):
        raise InvalidArgumentError("zero or non-finite spinor has no Bloch vector")
    c0, c1 = s
    cross = np.conj(c0) * c1
    return np.array([2 * cross.real, 2 * cross.imag, abs(c0) ** 2 - abs(c1) ** 2]) / norm2


def bloch_of_many(states) -> np.ndarray:
    """Vectorised :func:`bloch_of` for an ``(n, 2)`` array of normalised spinors."""
    states = np.asarray(states, dtype=complex)
    cross = np.conj(states[:, 0]) * states[:, 1]
    return np.stack(
        [2 * cross.real, 2 * cross.imag, np.abs(states[:, 0]) ** 2 - np.abs(states[:, 1]) ** 2],
        axis=1,
    )


def spinor_of(b, tol: float = 1e-9) -> np.ndarray:
    """Spinor with Bloch vector ``b``, gauge fixed so that ``c0`` is real and >= 0.

    At the south pole the convention ``(0, 1)`` applies.
    """
    b = _as_finite_vector(b, "Bloch vector")
    norm = np.linalg.norm(b)
    if abs(norm - 1) > tol:
        raise InvalidArgumentError(f"Bloch vector must be unit length, |b| = {norm}")
    x, y, z = b / norm
    w = complex(x, y)
    # use the larger amplitude as the pivot so both stay accurate near either pole
    if z >= 0:
        c0 = np.sqrt((1 + z) / 2)
        return normalize_spinor(np.array([c0, w / (2 * c0)]))
    mag1 = np.sqrt((1 - z) / 2)
    if abs(w) < 1e-300:
        return np.array([0.0, 1.0], dtype=complex)
    c0 = abs(w) / (2 * mag1)
    return normalize_spinor(np.array([c0, mag1 * w / abs(w)]))


def project_to_sphere(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v, axis=-1, keepdims=True)
