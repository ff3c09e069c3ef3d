"""Effective Hamiltonians of driven qubit arrays and a dense evolution harness.

Two couplings are supported. Tunable couplers give ``g_ij (XX + YY)`` edges.
Cross-resonance gives ``g~x Z_i X_j + g~y Z_i Y_j`` edges, with the complex
coupling ``g~ = (g~x - i g~y)/2``. Single-site fields are arbitrary Pauli vectors.
Operators are assembled as sparse Kronecker products. Evolution diagonalises
the midpoint Hamiltonian of each step, so it is limited to 12 qubits.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import CapabilityError, ConfigError, InvalidArgumentError
from .spin import IDENTITY, SIGMA_X, SIGMA_Y, SIGMA_Z

MAX_QUBITS = 12
STEP_NORM_BOUND = 0.1
PAULIS = {"I": IDENTITY, "X": SIGMA_X, "Y": SIGMA_Y, "Z": SIGMA_Z}
CR_KINDS = ("ZX", "ZY", "XZ", "YZ")

# exp(-i pi/4 sigma_y): Z -> X and X -> -Z under R . R^dagger
SUBLATTICE_ROTATION = (IDENTITY - 1j * SIGMA_Y) / math.sqrt(2)


@dataclass(frozen=True)
class LatticeSpec:
    n_qubits: int
    edges: tuple[tuple[int, int], ...] = ()
    sublattice: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.n_qubits < 1:
            raise InvalidArgumentError("n_qubits must be positive")
        object.__setattr__(self, "edges", tuple((int(i), int(j)) for i, j in self.edges))
        seen = set()
        for i, j in self.edges:
            if not (0 <= i < self.n_qubits and 0 <= j < self.n_qubits):
                raise InvalidArgumentError(f"edge ({i}, {j}) refers to a missing site")
            if i == j:
                raise InvalidArgumentError(f"self-loop at site {i}")
            key = frozenset((i, j))
            if key in seen:
                raise InvalidArgumentError(f"duplicate edge ({i}, {j})")
            seen.add(key)
        if self.sublattice is not None:
            labels = tuple(int(s) for s in self.sublattice)
            object.__setattr__(self, "sublattice", labels)
            if len(labels) != self.n_qubits or any(s not in (0, 1) for s in labels):
                raise InvalidArgumentError("sublattice must give a 0/1 label per site")
            for i, j in self.edges:
                if labels[i] == labels[j]:
                    raise InvalidArgumentError(f"edge ({i}, {j}) joins sites of the same sublattice")

    @property
    def dimension(self) -> int:
        return 2**self.n_qubits


def pauli_string(n: int, ops: dict[int, str]) -> sp.csr_matrix:
    """Sparse ``P_0 x P_1 x ... x P_{n-1}`` with site 0 the most significant factor."""
    out = sp.identity(1, dtype=complex, format="csr")
    for k in range(n):
        out = sp.kron(out, sp.csr_matrix(PAULIS[ops.get(k, "I")]), format="csr")
    return out


Coefficient = Callable[[float], float]


def as_coefficient(c) -> Coefficient:
    if callable(c):
        return c
    value = float(c)
    return lambda t: value


@dataclass
class Term:
    coefficient: Coefficient
    operator: sp.csr_matrix
    label: str = ""


@dataclass
class ArrayHamiltonian:
    """``H(t) = sum_k c_k(t) O_k`` with Hermitian operators ``O_k``."""

    spec: LatticeSpec
    terms: list[Term] = field(default_factory=list)

    def coefficients(self, t: float) -> np.ndarray:
        return np.array([float(term.coefficient(t)) for term in self.terms])

    def from_coefficients(self, coeffs) -> np.ndarray:
        dim = self.spec.dimension
        out = sp.csr_matrix((dim, dim), dtype=complex)
        for c, term in zip(coeffs, self.terms):
            if c != 0:
                out = out + c * term.operator
        return out.toarray()

    def __call__(self, t: float) -> np.ndarray:
        return self.from_coefficients(self.coefficients(t))

    def conjugated(self, U: sp.spmatrix) -> "ArrayHamiltonian":
        Ud = U.conj().T
        terms = [Term(tm.coefficient, sp.csr_matrix(U @ tm.operator @ Ud), tm.label) for tm in self.terms]
        return ArrayHamiltonian(self.spec, terms)


def _site_field_terms(spec, fields, detunings) -> list[Term]:
    n = spec.n_qubits
    if fields is None:
        fields = [(0.0, 0.0, 0.0)] * n
    if len(fields) != n:
        raise InvalidArgumentError(f"expected {n} site fields, got {len(fields)}")
    if detunings is None:
        detunings = [0.0] * n
    if len(detunings) != n:
        raise InvalidArgumentError(f"expected {n} detunings, got {len(detunings)}")
    terms = []
    for i, (h, delta) in enumerate(zip(fields, detunings)):
        if callable(h):
            comps = [(lambda t, f=h, a=a: float(f(t)[a])) for a in range(3)]
        else:
            if len(h) != 3:
                raise InvalidArgumentError(f"site {i} field must have three components")
            comps = [as_coefficient(c) for c in h]
        hz = comps[2]
        d = float(delta)
        comps[2] = hz if d == 0 else (lambda t, f=hz, d=d: f(t) + d)
        for a, name in enumerate("XYZ"):
            terms.append(Term(comps[a], pauli_string(n, {i: name}), f"{name}{i}"))
    return terms


def build_tunable_xy(
    spec: LatticeSpec,
    fields: Sequence | None = None,
    detunings: Sequence[float] | None = None,
    couplings: dict | None = None,
) -> ArrayHamiltonian:
    """``sum_i h^(i) . sigma_i + delta_i Z_i + sum_<ij> g_ij (X_i X_j + Y_i Y_j)``.

    ``fields`` holds one entry per site: a 3-sequence of constants/callables or
    a callable returning a 3-vector. ``couplings`` maps edges to a constant or
    a callable ``g_ij(t)``; edges missing from it get ``g = 0``.
    """
    n = spec.n_qubits
    terms = _site_field_terms(spec, fields, detunings)
    couplings = _edge_map(spec, couplings or {})
    for (i, j), g in couplings.items():
        xy = pauli_string(n, {i: "X", j: "X"}) + pauli_string(n, {i: "Y", j: "Y"})
        terms.append(Term(as_coefficient(g), sp.csr_matrix(xy), f"XY{i}{j}"))
    return ArrayHamiltonian(spec, terms)


def _edge_map(spec, couplings) -> dict:
    known = set(spec.edges)
    out = {}
    for key, g in couplings.items():
        i, j = key
        if (i, j) not in known and (j, i) not in known:
            raise InvalidArgumentError(f"coupling on ({i}, {j}) which is not an edge of the lattice")
        out[(i, j)] = g
    return out


def build_cross_resonance(
    spec: LatticeSpec,
    drives: Sequence | None = None,
    couplings: dict | None = None,
) -> ArrayHamiltonian:
    """``sum_i h^(i) . sigma_i + sum_<ij> (g~x Z_i X_j + g~y Z_i Y_j)``.

    ``couplings[(i, j)] = (gx, gy)`` makes ``i`` the control (the ``Z`` side);
    XZ and YZ couplings are the same entries keyed ``(j, i)``.
    """
    n = spec.n_qubits
    terms = _site_field_terms(spec, drives, None)
    for (i, j), (gx, gy) in _edge_map(spec, couplings or {}).items():
        terms.append(Term(as_coefficient(gx), pauli_string(n, {i: "Z", j: "X"}), f"ZX{i}{j}"))
        terms.append(Term(as_coefficient(gy), pauli_string(n, {i: "Z", j: "Y"}), f"ZY{i}{j}"))
    return ArrayHamiltonian(spec, terms)


def tilde_g(gx, gy):
    """Complex cross-resonance coupling ``(g~x - i g~y)/2``."""
    return 0.5 * (np.asarray(gx) - 1j * np.asarray(gy))


def components_from_tilde_g(g):
    """Inverse of :func:`tilde_g`: ``(g~x, g~y) = (2 Re g, -2 Im g)``."""
    g = np.asarray(g, dtype=complex)
    return 2 * g.real, -2 * g.imag


def sublattice_unitary(spec: LatticeSpec) -> sp.csr_matrix:
    if spec.sublattice is None:
        raise InvalidArgumentError("bipartite rotation needs a sublattice labelling")
    out = sp.identity(1, dtype=complex, format="csr")
    for label in spec.sublattice:
        out = sp.kron(out, sp.csr_matrix(SUBLATTICE_ROTATION if label == 1 else IDENTITY), format="csr")
    return out


def bipartite_rotate(spec: LatticeSpec, H):
    """Conjugate by ``exp(-i pi/4 Y)`` on every site of sublattice 1 (B).

    On B this maps ``Z -> X`` and ``X -> -Z``, so ``Z_A X_B -> -Z_A Z_B`` and
    ``X_A Z_B -> X_A X_B``. ``H`` may be a matrix or an :class:`ArrayHamiltonian`.
    """
    U = sublattice_unitary(spec)
    if isinstance(H, ArrayHamiltonian):
        return H.conjugated(U)
    Ud = U.conj().T
    if sp.issparse(H):
        return sp.csr_matrix(U @ H @ Ud)
    return U @ np.asarray(H) @ Ud.toarray()


@dataclass
class ArrayTrajectory:
    times: np.ndarray
    states: np.ndarray
    meta: dict = field(default_factory=dict)

    def expectation(self, op) -> np.ndarray:
        op = op.toarray() if sp.issparse(op) else np.asarray(op)
        return np.real(np.einsum("ti,ij,tj->t", self.states.conj(), op, self.states))


def evolve_array(
    H: ArrayHamiltonian,
    psi0,
    t_total: float,
    dt: float,
    n_samples: int | None = None,
    cache_tol: float | None = None,
) -> ArrayTrajectory:
    """Midpoint piecewise-constant evolution with dense Hermitian eigendecompositions.

    The step is ``t_total / ceil(t_total / dt)``. With ``cache_tol`` set, a
    step reuses the last eigendecomposition until some coefficient has moved
    by more than ``cache_tol`` from its value there.
    """
    n = H.spec.n_qubits
    if n > MAX_QUBITS:
        raise CapabilityError(f"dense evolution supports at most {MAX_QUBITS} qubits, got {n}")
    psi = np.asarray(psi0, dtype=complex).copy()
    if psi.shape != (H.spec.dimension,):
        raise InvalidArgumentError(f"psi0 must have length {H.spec.dimension}")
    if abs(np.linalg.norm(psi) - 1) > 1e-10:
        raise InvalidArgumentError("psi0 must be normalised")
    if not (t_total > 0 and dt > 0):
        raise InvalidArgumentError("t_total and dt must be positive")
    n_steps = max(1, math.ceil(t_total / dt - 1e-9))
    if n_samples is None:
        stride = 1
    else:
        if n_samples < 2:
            raise InvalidArgumentError("n_samples must be at least 2")
        stride = max(1, math.ceil(n_steps / (n_samples - 1) - 1e-9))
        n_steps = stride * (n_samples - 1)
    h = t_total / n_steps

    states = [psi.copy()]
    cached = None
    evals = evecs = None
    rebuilds = 0
    for k in range(n_steps):
        c = H.coefficients((k + 0.5) * h)
        if cached is None or cache_tol is None or np.max(np.abs(c - cached)) > cache_tol:
            evals, evecs = np.linalg.eigh(H.from_coefficients(c))
            if h * np.max(np.abs(evals)) > STEP_NORM_BOUND + 1e-12:
                raise InvalidArgumentError(
                    f"dt * ||H|| = {h * np.max(np.abs(evals)):.3g} exceeds {STEP_NORM_BOUND}; reduce dt"
                )
            cached = c
            rebuilds += 1
        psi = evecs @ (np.exp(-1j * evals * h) * (evecs.conj().T @ psi))
        if (k + 1) % stride == 0:
            states.append(psi.copy())
    times = np.arange(len(states)) * (stride * h)
    times[-1] = t_total
    return ArrayTrajectory(times, np.array(states), {"dt": h, "n_steps": n_steps, "eig_rebuilds": rebuilds})


def total_z(n: int) -> sp.csr_matrix:
    out = sp.csr_matrix((2**n, 2**n), dtype=complex)
    for i in range(n):
        out = out + pauli_string(n, {i: "Z"})
    return out


def crowding_report(tones: dict[str, float], spacing: float) -> list[tuple[str, str, float]]:
    """Pairs of drive tones closer than ``spacing`` (absolute frequency difference)."""
    if spacing < 0:
        raise InvalidArgumentError("spacing must be non-negative")
    names = sorted(tones)
    out = []
    for a_i, a in enumerate(names):
        for b in names[a_i + 1:]:
            gap = abs(float(tones[a]) - float(tones[b]))
            if gap < spacing:
                out.append((a, b, gap))
    return out


# JSON lattice descriptions

def waveform(desc) -> Coefficient:
    """Named waveform from a JSON value.

    A number is a constant. Objects take ``type`` in ``constant`` (``value``),
    ``cos`` / ``sin`` (``amplitude``, ``omega``, ``phase``, ``offset``) or
    ``sampled`` (``times``, ``values``, linear interpolation, held at the ends).
    """
    if isinstance(desc, (int, float)) and not isinstance(desc, bool):
        return as_coefficient(desc)
    if not isinstance(desc, dict) or "type" not in desc:
        raise ConfigError(f"invalid waveform {desc!r}")
    kind = desc["type"]
    if kind == "constant":
        return as_coefficient(desc.get("value", 0.0))
    if kind in ("cos", "sin"):
        amp = float(desc.get("amplitude", 1.0))
        omega = float(desc.get("omega", 0.0))
        phase = float(desc.get("phase", 0.0))
        offset = float(desc.get("offset", 0.0))
        fn = math.cos if kind == "cos" else math.sin
        return lambda t: offset + amp * fn(omega * t + phase)
    if kind == "sampled":
        ts = np.asarray(desc.get("times", []), dtype=float)
        vs = np.asarray(desc.get("values", []), dtype=float)
        if ts.size < 2 or ts.shape != vs.shape or np.any(np.diff(ts) <= 0):
            raise ConfigError("sampled waveform needs matching increasing times and values")
        return lambda t: float(np.interp(t, ts, vs))
    raise ConfigError(f"unknown waveform type {kind!r}")


def hamiltonian_from_dict(desc: dict) -> ArrayHamiltonian:
    """Build a lattice Hamiltonian from a parsed JSON description.

    Keys: ``n_qubits``, ``model`` (``tunable_xy`` or ``cross_resonance``),
    ``sublattice`` (optional), ``sites`` (list of ``{"h": [wx, wy, wz],
    "delta": d}``) and ``edges`` (list of ``{"i", "j", "g"}`` or
    ``{"i", "j", "gx", "gy"}``).
    """
    try:
        n = int(desc["n_qubits"])
        model = desc.get("model", "tunable_xy")
        edges_desc = desc.get("edges", [])
        spec = LatticeSpec(n, tuple((e["i"], e["j"]) for e in edges_desc), desc.get("sublattice"))
        sites = desc.get("sites", [{}] * n)
        fields = [[waveform(w) for w in s.get("h", [0.0, 0.0, 0.0])] for s in sites]
        if model == "tunable_xy":
            deltas = [float(s.get("delta", 0.0)) for s in sites]
            couplings = {(e["i"], e["j"]): waveform(e.get("g", 0.0)) for e in edges_desc}
            return build_tunable_xy(spec, fields, deltas, couplings)
        if model == "cross_resonance":
            couplings = {
                (e["i"], e["j"]): (waveform(e.get("gx", 0.0)), waveform(e.get("gy", 0.0))) for e in edges_desc
            }
            return build_cross_resonance(spec, fields, couplings)
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"malformed lattice description: {exc}") from exc
    raise ConfigError(f"unknown model {model!r}")


def load_lattice(path) -> ArrayHamiltonian:
    with open(path) as fh:
        return hamiltonian_from_dict(json.load(fh))
