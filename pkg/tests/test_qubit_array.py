import json
from functools import reduce

import numpy as np
import pytest
from scipy.linalg import expm

from topofreq import qubit_array as qa
from topofreq.drive import DriveParams, field_at
from topofreq.errors import CapabilityError, ConfigError, InvalidArgumentError
from topofreq.propagator import evolve, initial_state
from topofreq.spin import IDENTITY, SIGMA_X, SIGMA_Y, SIGMA_Z, bloch_of_many

P = {"I": IDENTITY, "X": SIGMA_X, "Y": SIGMA_Y, "Z": SIGMA_Z}


def dense_string(n, ops):
    return reduce(np.kron, [P[ops.get(k, "I")] for k in range(n)])


def random_spec(rng, n):
    edges = [(i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < 0.5]
    return qa.LatticeSpec(n, tuple(edges))


def test_pauli_string_matches_kron():
    for ops in ({0: "X"}, {1: "Y", 2: "Z"}, {0: "Z", 2: "X"}):
        assert np.array_equal(qa.pauli_string(3, ops).toarray(), dense_string(3, ops))


def test_tunable_xy_oracle(rng):
    for _ in range(50):
        n = int(rng.integers(1, 6))
        spec = random_spec(rng, n)
        amps = rng.normal(size=(n, 3))
        freqs = rng.uniform(0, 2, size=(n, 3))
        deltas = rng.normal(size=n)
        fields = [[(lambda t, a=amps[i, c], w=freqs[i, c]: a * np.cos(w * t)) for c in range(3)] for i in range(n)]
        gs = {e: rng.normal() for e in spec.edges}
        couplings = {e: (lambda t, g=g: g * np.sin(0.3 * t + 1)) for e, g in gs.items()}
        H = qa.build_tunable_xy(spec, fields, deltas, couplings)
        t = rng.uniform(0, 10)
        ref = np.zeros((2**n, 2**n), dtype=complex)
        for i in range(n):
            h = amps[i] * np.cos(freqs[i] * t)
            ref += h[0] * dense_string(n, {i: "X"}) + h[1] * dense_string(n, {i: "Y"})
            ref += (h[2] + deltas[i]) * dense_string(n, {i: "Z"})
        for (i, j), g in gs.items():
            ref += g * np.sin(0.3 * t + 1) * (dense_string(n, {i: "X", j: "X"}) + dense_string(n, {i: "Y", j: "Y"}))
        got = H(t)
        assert np.max(np.abs(got - ref)) <= 1e-12
        assert np.max(np.abs(got - got.conj().T)) <= 1e-12


def test_cross_resonance_oracle(rng):
    for _ in range(50):
        n = int(rng.integers(2, 6))
        spec = random_spec(rng, n)
        drives = [tuple(rng.normal(size=3)) for _ in range(n)]
        cp = {}
        for i, j in spec.edges:
            key = (i, j) if rng.random() < 0.5 else (j, i)
            cp[key] = tuple(rng.normal(size=2))
        H = qa.build_cross_resonance(spec, drives, cp)
        ref = np.zeros((2**n, 2**n), dtype=complex)
        for i, h in enumerate(drives):
            for c, name in enumerate("XYZ"):
                ref += h[c] * dense_string(n, {i: name})
        for (i, j), (gx, gy) in cp.items():
            ref += gx * dense_string(n, {i: "Z", j: "X"}) + gy * dense_string(n, {i: "Z", j: "Y"})
        assert np.max(np.abs(H(0.0) - ref)) <= 1e-12


def test_xy_pair_spectrum():
    H = qa.build_tunable_xy(qa.LatticeSpec(2, ((0, 1),)), couplings={(0, 1): 0.37})
    assert np.allclose(np.linalg.eigvalsh(H(0.0)), [-0.74, 0, 0, 0.74], atol=1e-14)


def test_single_qubit_reduces_to_propagator():
    p = DriveParams(M=1.0, t_total=30.0)
    H = qa.build_tunable_xy(qa.LatticeSpec(1), [lambda t: field_at(p, t)])
    tr = evolve(p)
    arr = qa.evolve_array(H, initial_state(p), p.t_total, p.step)
    assert np.max(np.abs(bloch_of_many(arr.states) - tr.states)) <= 1e-12


def test_zx_edge_spectrum_and_evolution():
    spec = qa.LatticeSpec(2, ((0, 1),))
    g = 0.3
    H = qa.build_cross_resonance(spec, couplings={(0, 1): (g, 0.0)})
    assert np.allclose(np.linalg.eigvalsh(H(0.0)), [-g, -g, g, g])
    psi0 = np.array([0.6, 0.0, 0.0, 0.8j])
    tr = qa.evolve_array(H, psi0, 5.0, 0.05)
    zx = dense_string(2, {0: "Z", 1: "X"})
    exact = (np.cos(g * 5.0) * np.eye(4) - 1j * np.sin(g * 5.0) * zx) @ psi0
    assert np.max(np.abs(tr.states[-1] - exact)) <= 1e-12


def test_tilde_g_round_trip(rng):
    g = rng.normal(size=10) + 1j * rng.normal(size=10)
    gx, gy = qa.components_from_tilde_g(g)
    assert np.allclose(qa.tilde_g(gx, gy), g)
    assert qa.tilde_g(2.0, 0.0) == 1.0
    assert qa.tilde_g(0.0, 2.0) == -1j


def test_bipartite_ising():
    spec = qa.LatticeSpec(2, ((0, 1),), (0, 1))
    # control on sublattice B: Z_B X_A -> X_B X_A
    H = qa.build_cross_resonance(spec, couplings={(1, 0): (1.0, 0.0)})
    assert np.allclose(qa.bipartite_rotate(spec, H)(0.0), dense_string(2, {0: "X", 1: "X"}))
    # control on sublattice A: Z_A X_B -> -Z_A Z_B
    H = qa.build_cross_resonance(spec, couplings={(0, 1): (1.0, 0.0)})
    assert np.allclose(qa.bipartite_rotate(spec, H(0.0)), -dense_string(2, {0: "Z", 1: "Z"}))


def test_bipartite_xy_form():
    spec = qa.LatticeSpec(2, ((0, 1),), (0, 1))
    zx_xz = dense_string(2, {0: "Z", 1: "X"}) + dense_string(2, {0: "X", 1: "Z"})
    out = qa.bipartite_rotate(spec, zx_xz)
    xx, zz = dense_string(2, {0: "X", 1: "X"}), dense_string(2, {0: "Z", 1: "Z"})
    assert np.allclose(out, xx - zz)
    # equal strengths: the two couplings carry the same magnitude
    assert abs(np.trace(out @ xx)) == pytest.approx(abs(np.trace(out @ zz)))


def test_bipartite_isometry(rng):
    spec = qa.LatticeSpec(4, ((0, 1), (1, 2), (2, 3)), (0, 1, 0, 1))
    cp = {e: tuple(rng.normal(size=2)) for e in spec.edges}
    H = qa.build_cross_resonance(spec, [tuple(rng.normal(size=3)) for _ in range(4)], cp)
    a = H(0.0)
    b = qa.bipartite_rotate(spec, H)(0.0)
    assert np.max(np.abs(np.linalg.eigvalsh(a) - np.linalg.eigvalsh(b))) <= 1e-12
    assert np.linalg.norm(a, 2) == pytest.approx(np.linalg.norm(b, 2), abs=1e-12)
    assert np.allclose(qa.bipartite_rotate(spec, qa.pauli_string(4, {1: "Z"})).toarray(), dense_string(4, {1: "X"}))


def test_bipartite_requires_coloring():
    with pytest.raises(InvalidArgumentError):
        qa.bipartite_rotate(qa.LatticeSpec(2, ((0, 1),)), np.eye(4))
    with pytest.raises(InvalidArgumentError):
        qa.LatticeSpec(3, ((0, 1), (1, 2), (0, 2)), (0, 1, 0))


@pytest.mark.parametrize("edges", [((0, 0),), ((0, 1), (1, 0)), ((0, 5),)])
def test_spec_rejects_bad_graphs(edges):
    with pytest.raises(InvalidArgumentError):
        qa.LatticeSpec(3, edges)


def test_mismatched_sites():
    spec = qa.LatticeSpec(3, ((0, 1),))
    with pytest.raises(InvalidArgumentError):
        qa.build_tunable_xy(spec, [(0, 0, 1)] * 2)
    with pytest.raises(InvalidArgumentError):
        qa.build_tunable_xy(spec, detunings=[0.0])
    with pytest.raises(InvalidArgumentError):
        qa.build_tunable_xy(spec, couplings={(1, 2): 0.1})


def test_static_evolution_matches_expm(rng):
    spec = qa.LatticeSpec(3, ((0, 1), (1, 2)))
    H = qa.build_tunable_xy(spec, [tuple(rng.normal(size=3)) for _ in range(3)], couplings={(0, 1): 0.4, (1, 2): -0.2})
    psi0 = rng.normal(size=8) + 1j * rng.normal(size=8)
    psi0 /= np.linalg.norm(psi0)
    tr = qa.evolve_array(H, psi0, 3.0, 0.01)
    assert np.max(np.abs(tr.states[-1] - expm(-3j * H(0.0)) @ psi0)) <= 1e-10


def test_xy_conserves_total_z(rng):
    n = 4
    spec = qa.LatticeSpec(n, ((0, 1), (1, 2), (2, 3), (0, 3)))
    fields = [(0.0, 0.0, (lambda t, w=w: 0.3 * np.cos(w * t))) for w in rng.uniform(0.1, 1, n)]
    H = qa.build_tunable_xy(spec, fields, rng.normal(size=n) * 0.2,
                            {e: (lambda t, a=a: a * (1 + 0.5 * np.sin(t))) for e, a in zip(spec.edges, rng.uniform(0.1, 0.4, 4))})
    psi0 = np.zeros(2**n, dtype=complex)
    psi0[0b0110] = 1 / np.sqrt(2)
    psi0[0b0011] = 1 / np.sqrt(2)
    tr = qa.evolve_array(H, psi0, 40.0, 0.02, n_samples=101)
    z = tr.expectation(qa.total_z(n))
    assert np.max(np.abs(z - z[0])) <= 1e-9


def test_norm_conservation_long_run(rng):
    n = 6
    spec = qa.LatticeSpec(n, tuple((i, i + 1) for i in range(n - 1)))
    H = qa.build_tunable_xy(spec, [(0.2, 0.0, (lambda t: 0.1 * np.cos(t)))] * n, couplings={e: 0.3 for e in spec.edges})
    psi0 = np.zeros(2**n, dtype=complex)
    psi0[5] = 1
    tr = qa.evolve_array(H, psi0, 100.0, 0.01, n_samples=11)
    assert tr.meta["n_steps"] == 10_000
    assert np.max(np.abs(np.linalg.norm(tr.states, axis=1) - 1)) <= 1e-9


def test_cache_reuses_and_invalidates():
    spec = qa.LatticeSpec(2, ((0, 1),))
    H = qa.build_tunable_xy(spec, [(0, 0, lambda t: 0.5 * np.cos(0.01 * t))] * 2, couplings={(0, 1): 0.2})
    psi0 = np.array([0, 1, 0, 0], dtype=complex)
    full = qa.evolve_array(H, psi0, 50.0, 0.05)
    cached = qa.evolve_array(H, psi0, 50.0, 0.05, cache_tol=1e-3)
    assert full.meta["eig_rebuilds"] == full.meta["n_steps"]
    assert 1 < cached.meta["eig_rebuilds"] < full.meta["n_steps"]
    assert np.max(np.abs(full.states[-1] - cached.states[-1])) < 1e-2


def test_capability_and_step_limits():
    big = qa.LatticeSpec(13)
    H = qa.ArrayHamiltonian(big, [])
    with pytest.raises(CapabilityError):
        qa.evolve_array(H, np.zeros(2**13), 1.0, 0.1)
    H2 = qa.build_tunable_xy(qa.LatticeSpec(1), [(0, 0, 10.0)])
    with pytest.raises(InvalidArgumentError):
        qa.evolve_array(H2, np.array([1, 0], dtype=complex), 1.0, 0.05)
    with pytest.raises(InvalidArgumentError):
        qa.evolve_array(H2, np.array([1, 1], dtype=complex), 1.0, 0.001)


def test_crowding_report():
    rep = qa.crowding_report({"q0": 5.00, "q1": 5.03, "q2": 5.5}, 0.05)
    assert [(a, b) for a, b, _ in rep] == [("q0", "q1")]
    assert qa.crowding_report({"a": 1.0, "b": 2.0}, 0.5) == []


def test_waveforms():
    assert qa.waveform(2.5)(7.0) == 2.5
    assert qa.waveform({"type": "cos", "amplitude": 2, "omega": 1, "phase": 0, "offset": 1})(0.0) == 3.0
    assert qa.waveform({"type": "sin", "amplitude": 2, "omega": np.pi / 2})(1.0) == pytest.approx(2.0)
    w = qa.waveform({"type": "sampled", "times": [0, 1, 2], "values": [0, 10, 0]})
    assert w(0.5) == 5.0 and w(5.0) == 0.0
    for bad in ("x", {"type": "square"}, {"type": "sampled", "times": [0, 0], "values": [1, 2]}):
        with pytest.raises(ConfigError):
            qa.waveform(bad)


def test_json_lattice(tmp_path):
    desc = {
        "n_qubits": 2,
        "model": "cross_resonance",
        "sublattice": [0, 1],
        "sites": [{"h": [0.1, 0, 0]}, {"h": [0, 0, {"type": "constant", "value": 0.2}]}],
        "edges": [{"i": 0, "j": 1, "gx": 0.3, "gy": -0.1}],
    }
    path = tmp_path / "lat.json"
    path.write_text(json.dumps(desc))
    H = qa.load_lattice(path)
    ref = (0.1 * dense_string(2, {0: "X"}) + 0.2 * dense_string(2, {1: "Z"})
           + 0.3 * dense_string(2, {0: "Z", 1: "X"}) - 0.1 * dense_string(2, {0: "Z", 1: "Y"}))
    assert np.allclose(H(0.0), ref)
    with pytest.raises(ConfigError):
        qa.hamiltonian_from_dict({"n_qubits": 2, "model": "heisenberg"})
    with pytest.raises(ConfigError):
        qa.hamiltonian_from_dict({"model": "tunable_xy"})
