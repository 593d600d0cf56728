"""Acceptance criteria, one function (or parametrised group) per criterion.

Run ``pytest tests/test_acceptance.py`` to get one PASS/FAIL/SKIP line per
criterion in the terminal summary.
"""

import math
import os
import time
from pathlib import Path

import numpy as np
import pytest

from oracles import circuit_matrix, random_psd, reference_ocsvm_dual
from qfk import fkernel as fk
from qfk import ocsvm, pipeline, qsim
from qfk import preprocess as pp
from qfk.config import RunConfig
from qfk.rng import make_rng

# Criterion 7 floors, frozen from runs that solved the same train kernels with
# both the SMO solver and the projected-gradient reference (seeds 0-4).
# Reference macro F1 per seed: 0.5586, 0.4612, 0.5055, 0.5512, 0.6465.
SEPARATION_WORST_REFERENCE_F1 = 0.46
SEPARATION_SEED0_REFERENCE_F1 = 0.5586
SEPARATION_SOLVER_SLACK = 0.01
DEGENERATE_MACRO_F1 = 0.4  # all-normal on 200 + 100: normal F1 0.8, anomaly F1 0


def _random_circuit(rng, n, n_gates):
    gates = []
    for _ in range(n_gates):
        kind = rng.choice(["RY", "RZ", "CNOT"] if n > 1 else ["RY", "RZ"])
        if kind == "CNOT":
            c, t = rng.choice(n, size=2, replace=False)
            gates.append(qsim.cnot(int(c), int(t)))
        else:
            gates.append(qsim.Gate(kind, (int(rng.integers(n)),), float(rng.uniform(-2 * math.pi, 2 * math.pi))))
    return qsim.Circuit(n, gates)


@pytest.mark.criterion(1)
def test_simulator_matches_dense_oracle():
    rng = make_rng(2024)
    worst = 0.0
    for k in range(150):
        n = 1 + k % 3
        c = _random_circuit(rng, n, int(rng.integers(1, 25)))
        v = rng.normal(size=2**n) + 1j * rng.normal(size=2**n)
        s = qsim.StateVector(v / np.linalg.norm(v))
        dense = circuit_matrix([(g.kind, g.qubits, g.theta) for g in c.gates], n) @ s.amplitudes
        worst = max(worst, float(np.max(np.abs(qsim.run_circuit(s, c).amplitudes - dense))))
    assert worst < 1e-10


@pytest.mark.criterion(2)
@pytest.mark.parametrize("n_qubits", [4, 8])
def test_fidelity_identities(n_qubits):
    spec = fk.FeatureMapSpec(n_qubits)
    rng = make_rng(7, n_qubits)
    X = rng.uniform(-math.pi, math.pi, size=(1000, spec.n_features))
    Y = rng.uniform(-math.pi, math.pi, size=(1000, spec.n_features))
    zero = qsim.zero_state(n_qubits)
    t0 = time.perf_counter()
    for x, y in zip(X, Y):
        ux, uy = fk.build_feature_map(x, spec), fk.build_feature_map(y, spec)
        sx = qsim.run_circuit(zero, ux)
        sy = qsim.run_circuit(zero, uy)
        fxx = qsim.prob_zero(qsim.run_circuit(sx, qsim.inverse(ux)))
        fxy = qsim.prob_zero(qsim.run_circuit(sx, qsim.inverse(uy)))
        fyx = qsim.prob_zero(qsim.run_circuit(sy, qsim.inverse(ux)))
        assert abs(fxx - 1.0) <= 1e-10
        assert abs(fxy - fyx) <= 1e-10
        assert 0.0 <= fxy <= 1.0 + 1e-12
    assert time.perf_counter() - t0 < 60


@pytest.mark.criterion(3)
def test_kernel_structure():
    spec = fk.FeatureMapSpec(8)
    X = make_rng(3).uniform(-math.pi, math.pi, size=(100, 16))
    k = fk.train_kernel(X, spec)
    K = k.values
    assert k.circuits == 100 * 99 // 2
    assert np.max(np.abs(K - K.T)) <= 1e-12
    assert np.all(np.diag(K) == 1.0)
    assert np.linalg.eigvalsh(K).min() >= -1e-8
    E = fk.exponentiate(k).values
    assert np.max(np.abs(E - E.T)) <= 1e-12
    assert np.linalg.eigvalsh(E).min() >= -1e-8
    assert E.min() >= 1.0 and E.max() <= math.e


@pytest.mark.criterion(4)
def test_shot_convergence_and_schedule_independence():
    spec = fk.FeatureMapSpec(4)
    X = make_rng(4).uniform(-math.pi, math.pi, size=(40, 8))
    exact = fk.train_kernel(X, spec).values
    mode = fk.Mode(4096, 11)
    serial = fk.train_kernel(X, spec, mode)
    tol = 4 * math.sqrt(0.25 / 4096)
    assert np.mean(np.abs(serial.values - exact) <= tol) >= 0.99
    for jobs in (2, 3, 8):
        assert np.array_equal(fk.train_kernel(X, spec, mode, n_jobs=jobs).values, serial.values)
    cross = fk.cross_kernel(X[:10], X, spec, mode)
    assert np.array_equal(fk.cross_kernel(X[:10], X, spec, mode, n_jobs=4).values, cross.values)


@pytest.mark.criterion(5)
@pytest.mark.parametrize("nu", [0.01, 0.05, 0.1, 0.5])
def test_ocsvm_properties(nu):
    rng = make_rng(5, int(nu * 100))
    for n in (50, 100):
        for kind in ("rbf", "lowrank"):
            for _ in range(5):
                K = random_psd(rng, n, kind)
                m = ocsvm.train_ocsvm(K, nu)
                assert abs(m.alpha.sum() - 1.0) <= 1e-12
                assert m.alpha.min() >= 0.0 and m.alpha.max() <= 1 / (nu * n) + 1e-12
                d = ocsvm.decision_values(m, K)
                assert np.mean(d < 0) <= nu + 2 / n
                assert len(m.support_indices) / n >= nu - 2 / n
    for _ in range(5):
        K = random_psd(rng, 20)
        ours = ocsvm.dual_objective(K, ocsvm.train_ocsvm(K, nu).alpha)
        ref = ocsvm.dual_objective(K, reference_ocsvm_dual(K, nu, iters=3000))
        assert abs(ours - ref) <= 1e-6 * abs(ref)


@pytest.mark.criterion(6)
def test_preprocessing_units():
    assert pp.moving_average([1, 2, 3, 4], 2).tolist() == [1, 1.5, 2.5, 3.5]
    assert pp.moving_average([1, 2, 3, 4], 1).tolist() == [1, 2, 3, 4]
    m = pp.FeatureMatrix(np.array([[1.0], [2.0], [3.0]]), ["a"])
    p = pp.fit_scaler(m)
    assert p.mu[0] == 2.0 and p.sigma[0] == pytest.approx(math.sqrt(2 / 3), abs=1e-15)
    z = pp.apply_scaler(m, p).data
    assert abs(z.mean()) <= 1e-12 and abs(z.std() - 1.0) <= 1e-12
    X = np.array([[0.3, 0.0], [0.9, 1.0], [0.1, 2.0], [0.7, 3.0]])
    t = pp.fit_gini_tree(X, [0, 0, 1, 1])
    assert t.nodes[0].feature == 1 and t.depth == 1
    assert all(leaf.impurity == 0 for leaf in t.leaves())
    tie = pp.fit_gini_tree(np.column_stack([X[:, 1], X[:, 1]]), [0, 0, 1, 1])
    assert tie.nodes[0].feature == 0
    a = pp.scale_to_angles(pp.FeatureMatrix(np.array([[0.0], [0.5], [1.0]]), ["a"]))
    assert a.data.ravel() == pytest.approx([-math.pi, 0.0, math.pi], abs=1e-15)
    bounds = pp.fit_angle_bounds(pp.FeatureMatrix(np.array([[0.0], [1.0]]), ["a"]))
    clipped = pp.scale_to_angles(pp.FeatureMatrix(np.array([[5.0], [-5.0]]), ["a"]), bounds)
    assert clipped.data.ravel().tolist() == [math.pi, -math.pi]


@pytest.fixture(scope="module")
def separation_run(tmp_path_factory):
    root = tmp_path_factory.mktemp("separation")
    cfg = RunConfig(
        train_csv=str(root / "synthetic.csv"),
        artifacts_dir=str(root / "art"),
        synth_features=16,
        synth_shift=2.0,
        train_rows=1000,
        eval_normal=200,
        eval_anomaly=100,
        seed=0,
    ).validate()
    pipeline.cmd_synth(cfg)
    report = pipeline.run_all(cfg)
    return cfg, report


@pytest.mark.criterion(7)
def test_end_to_end_separation(separation_run):
    cfg, report = separation_run
    assert report.extra["kernel"]["train_circuits"] == 1000 * 999 // 2
    assert report.macro["f1"] > DEGENERATE_MACRO_F1
    assert report.macro["f1"] >= SEPARATION_WORST_REFERENCE_F1
    assert report.macro["f1"] >= SEPARATION_SEED0_REFERENCE_F1 - SEPARATION_SOLVER_SLACK
    assert report.extra["mean_decision_anomaly"] < report.extra["mean_decision_normal"]


@pytest.mark.criterion(7)
def test_anomalies_have_lower_fidelity(separation_run):
    cfg, _ = separation_run
    k = fk.load_kernel(cfg.artifacts / pipeline.EVAL_KERNEL)
    labels = pipeline._read_labels(cfg.artifacts / pipeline.EVAL_LABELS)
    mean_fid = np.log(k.values).mean(axis=1)
    assert mean_fid[labels == 1].mean() < mean_fid[labels == 0].mean()


def _hai_files():
    train, test = os.environ.get("QFK_HAI_TRAIN"), os.environ.get("QFK_HAI_TEST")
    if not (train and test and Path(train).is_file() and Path(test).is_file()):
        pytest.skip("set QFK_HAI_TRAIN and QFK_HAI_TEST to HAI 20.07 CSV files to run")
    return train, test


@pytest.mark.criterion(8)
def test_hai_reproduction(tmp_path):
    train, test = _hai_files()
    cfg = RunConfig(
        train_csv=train,
        test_csv=test,
        artifacts_dir=str(tmp_path),
        delimiter=os.environ.get("QFK_HAI_DELIMITER", ";"),
        drop_columns=["attack_P1", "attack_P2", "attack_P3"],
        eval_normal=1000,
        eval_anomaly=500,
    )
    t0 = time.perf_counter()
    rows = pipeline.compare_kernels(cfg, (8, 16, 24))
    elapsed = time.perf_counter() - t0
    print()
    print(pipeline.format_table(rows))
    assert elapsed < 2 * 3600
    by = {(r["kernel"], r["features"]): r for r in rows}
    assert by[("quantum", 16)]["macro_f1"] >= by[("rbf", 16)]["macro_f1"]
