import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from oracles import dense_fidelity
from qfk import fkernel as fk
from qfk import qsim
from qfk.errors import DataError
from qfk.rng import make_rng


def angle_rows(rows, n_qubits, seed):
    return make_rng(seed).uniform(-math.pi, math.pi, size=(rows, 2 * n_qubits))


def angle_vectors(n_qubits):
    return arrays(np.float64, 2 * n_qubits, elements=st.floats(-math.pi, math.pi, allow_nan=False))


def test_gate_sequence_two_qubits_one_rep():
    spec = fk.FeatureMapSpec(2, repetitions=1)
    c = fk.build_feature_map([0.1, 0.2, 0.3, 0.4], spec)
    assert [g.kind for g in c.gates] == ["RY", "RZ", "RY", "RZ", "CNOT", "RY", "RY"]
    assert c.gates[4].qubits == (0, 1)
    assert [g.theta for g in c.gates if g.kind != "CNOT"] == [0.1, 0.2, 0.3, 0.4, 0.1, 0.3]
    assert spec.gate_count == len(c) == 7


def test_gate_count_eight_qubits():
    spec = fk.FeatureMapSpec(8, 3)
    assert spec.gate_count == 93
    assert len(fk.build_feature_map(np.zeros(16), spec)) == 93


def test_zero_vector_leaves_zero_state():
    spec = fk.FeatureMapSpec(4, 2)
    s = qsim.run_circuit(qsim.zero_state(4), fk.build_feature_map(np.zeros(8), spec))
    assert np.allclose(s.amplitudes, qsim.zero_state(4).amplitudes, atol=1e-15)
    assert fk.fidelity(np.zeros(8), np.zeros(8), spec) == pytest.approx(1.0, abs=1e-15)


def test_angle_and_shape_checks():
    spec = fk.FeatureMapSpec(2, 1)
    with pytest.raises(DataError):
        fk.build_feature_map([0.0, 0.0, 0.0], spec)
    with pytest.raises(DataError):
        fk.build_feature_map([4.0, 0.0, 0.0, 0.0], spec)
    with pytest.raises(DataError):
        fk.train_kernel(np.zeros((3, 5)), spec)
    with pytest.raises(ValueError):
        fk.FeatureMapSpec(0)


@settings(max_examples=60, deadline=None)
@given(angle_vectors(1), angle_vectors(1), st.integers(1, 3))
def test_one_qubit_matches_dense_oracle(x, y, reps):
    spec = fk.FeatureMapSpec(1, reps)
    assert fk.fidelity(x, y, spec) == pytest.approx(dense_fidelity(x, y, 1, reps), abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 3), st.integers(1, 3), st.integers(0, 2**32))
def test_few_qubits_match_dense_oracle(n, reps, seed):
    x, y = angle_rows(2, n, seed)
    spec = fk.FeatureMapSpec(n, reps)
    assert fk.fidelity(x, y, spec) == pytest.approx(dense_fidelity(x, y, n, reps), abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(angle_vectors(4), angle_vectors(4))
def test_fidelity_identities(x, y):
    spec = fk.FeatureMapSpec(4)
    assert fk.fidelity(x, x, spec) == pytest.approx(1.0, abs=1e-10)
    fxy, fyx = fk.fidelity(x, y, spec), fk.fidelity(y, x, spec)
    assert abs(fxy - fyx) <= 1e-10
    assert 0.0 <= fxy <= 1.0 + 1e-12


def test_identical_rows_give_all_ones():
    x = angle_rows(1, 3, 2)
    k = fk.train_kernel(np.vstack([x, x]), fk.FeatureMapSpec(3))
    assert np.allclose(k.values, 1.0, atol=1e-12)


def test_train_kernel_matches_naive_loop_and_circuit_engine():
    spec = fk.FeatureMapSpec(3, 2)
    X = angle_rows(4, 3, 11)
    naive = np.array([[fk.fidelity(a, b, spec) for b in X] for a in X])
    sv = fk.train_kernel(X, spec)
    circ = fk.train_kernel(X, spec, engine="circuit")
    assert np.max(np.abs(sv.values - naive)) < 1e-12
    assert np.max(np.abs(circ.values - naive)) < 1e-12
    assert sv.circuits == circ.circuits == 6


def test_counter_is_triangle():
    spec = fk.FeatureMapSpec(2, 1)
    for m in (1, 2, 5, 100):
        k = fk.train_kernel(angle_rows(m, 2, m), spec)
        assert k.circuits == m * (m - 1) // 2 and k.shots == 0
    shots = fk.train_kernel(angle_rows(5, 2, 0), spec, fk.Mode(16, 1))
    assert shots.circuits == 15 and shots.shots == 15 * 16


def test_cross_kernel_consistency():
    spec = fk.FeatureMapSpec(3)
    X = angle_rows(6, 3, 4)
    assert np.max(np.abs(fk.cross_kernel(X, X, spec).values - fk.train_kernel(X, spec).values)) < 1e-12
    row = fk.cross_kernel(X[2:3], X, spec)
    assert row.values[0, 2] == pytest.approx(1.0, abs=1e-10)
    assert row.circuits == 6
    circ = fk.cross_kernel(X[:2], X, spec, engine="circuit")
    assert np.max(np.abs(circ.values - fk.cross_kernel(X[:2], X, spec).values)) < 1e-12


def test_permutation_equivariance():
    spec = fk.FeatureMapSpec(3)
    X = angle_rows(7, 3, 8)
    perm = make_rng(1).permutation(7)
    K = fk.train_kernel(X, spec).values
    Kp = fk.train_kernel(X[perm], spec).values
    assert np.max(np.abs(Kp - K[np.ix_(perm, perm)])) < 1e-12


def test_kernel_structure_and_exponentiation():
    spec = fk.FeatureMapSpec(3)
    k = fk.train_kernel(angle_rows(50, 3, 21), spec)
    K = k.values
    assert np.max(np.abs(K - K.T)) <= 1e-12
    assert np.all(np.diag(K) == 1.0)
    assert np.linalg.eigvalsh(K).min() >= -1e-8
    e = fk.exponentiate(k)
    assert e.stage == fk.EXP
    assert np.linalg.eigvalsh(e.values).min() >= -1e-8
    assert np.all((e.values >= 1.0) & (e.values <= math.e + 1e-12))
    with pytest.raises(DataError):
        fk.exponentiate(e)


def test_exponentiate_examples():
    k = fk.exponentiate(fk.KernelMatrix(np.array([[0.0, 1.0]])))
    assert k.values[0, 0] == 1.0
    assert k.values[0, 1] == pytest.approx(2.718281828, abs=1e-9)


def test_save_load_round_trip(tmp_path):
    spec = fk.FeatureMapSpec(2)
    k = fk.train_kernel(angle_rows(5, 2, 3), spec, fk.Mode(64, 9))
    fk.save_kernel(k, tmp_path / "k.qfk")
    back = fk.load_kernel(tmp_path / "k.qfk")
    assert np.array_equal(back.values, k.values)
    assert (back.stage, back.mode, back.spec_hash) == (k.stage, k.mode, k.spec_hash)
    assert fk.exponentiate(back).stage == fk.EXP
    header = (tmp_path / "k.qfk").read_text().splitlines()[0]
    assert header == f"qfk-kernel v1 rows=5 cols=5 stage=raw mode=shots:64:9 spec={spec.digest()}"


def test_load_rejects_row_count_mismatch(tmp_path):
    k = fk.train_kernel(angle_rows(3, 2, 3), fk.FeatureMapSpec(2))
    path = tmp_path / "k.qfk"
    fk.save_kernel(k, path)
    lines = path.read_text().splitlines()
    path.write_text("\n".join([lines[0].replace("rows=3", "rows=4")] + lines[1:]) + "\n")
    with pytest.raises(DataError):
        fk.load_kernel(path)
    path.write_text("not a kernel\n1,2\n")
    with pytest.raises(DataError):
        fk.load_kernel(path)


def test_shot_kernel_converges_and_is_schedule_independent():
    spec = fk.FeatureMapSpec(2)
    X = angle_rows(30, 2, 5)
    exact = fk.train_kernel(X, spec).values
    mode = fk.Mode(4096, 7)
    serial = fk.train_kernel(X, spec, mode)
    threaded = fk.train_kernel(X, spec, mode, n_jobs=4)
    assert np.array_equal(serial.values, threaded.values)
    close = np.abs(serial.values - exact) <= 4 * math.sqrt(0.25 / 4096)
    assert close.mean() >= 0.99
    other = fk.train_kernel(X, spec, fk.Mode(4096, 8))
    assert not np.array_equal(other.values, serial.values)


def test_shot_engines_agree():
    spec = fk.FeatureMapSpec(2)
    X = angle_rows(4, 2, 6)
    mode = fk.Mode(256, 3)
    a = fk.cross_kernel(X[:2], X, spec, mode)
    b = fk.cross_kernel(X[:2], X, spec, mode, engine="circuit")
    assert np.array_equal(a.values, b.values)


def test_mode_labels():
    assert fk.Mode().label == "exact"
    assert fk.Mode.parse("shots:100:5") == fk.Mode(100, 5)
    with pytest.raises(DataError):
        fk.Mode.parse("shots:100")
    with pytest.raises(ValueError):
        fk.Mode(0)
