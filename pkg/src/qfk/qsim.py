"""Dense statevector simulator for RY / RZ / CNOT circuits.

Qubit 0 is the least significant bit of the basis-state index, so the
amplitude of ``|q_{n-1} ... q_1 q_0>`` lives at ``sum(q_k << k)``.

Gate kernels work on batches of states shaped ``(batch, 2**n)`` with one
rotation angle per batch row; the single-state API is the batch-of-one case.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from .rng import make_rng

MAX_QUBITS = 20
RY, RZ, CNOT = "RY", "RZ", "CNOT"


@dataclass(frozen=True)
class Gate:
    kind: str
    qubits: tuple[int, ...]
    theta: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "qubits", tuple(int(q) for q in self.qubits))
        if self.kind in (RY, RZ):
            if len(self.qubits) != 1:
                raise ValueError(f"{self.kind} acts on exactly one qubit")
        elif self.kind == CNOT:
            if len(self.qubits) != 2 or self.qubits[0] == self.qubits[1]:
                raise ValueError("CNOT needs distinct control and target")
        else:
            raise ValueError(f"unsupported gate {self.kind!r}")
        if any(q < 0 for q in self.qubits):
            raise ValueError("qubit indices must be nonnegative")

    def inverse(self) -> Gate:
        if self.kind == CNOT:
            return self
        return Gate(self.kind, self.qubits, -self.theta)


def ry(q: int, theta: float) -> Gate:
    return Gate(RY, (q,), float(theta))


def rz(q: int, theta: float) -> Gate:
    return Gate(RZ, (q,), float(theta))


def cnot(control: int, target: int) -> Gate:
    return Gate(CNOT, (control, target))


@dataclass(frozen=True)
class Circuit:
    n_qubits: int
    gates: tuple[Gate, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        _check_n(self.n_qubits)
        for g in self.gates:
            if max(g.qubits) >= self.n_qubits:
                raise ValueError(f"{g} addresses a qubit outside a {self.n_qubits}-qubit register")

    def __len__(self) -> int:
        return len(self.gates)

    def then(self, other: Circuit) -> Circuit:
        if other.n_qubits != self.n_qubits:
            raise ValueError("cannot compose circuits of different widths")
        return Circuit(self.n_qubits, self.gates + other.gates)


def inverse(c: Circuit) -> Circuit:
    return Circuit(c.n_qubits, tuple(g.inverse() for g in reversed(c.gates)))


@dataclass(frozen=True, eq=False)
class StateVector:
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=np.complex128)
        n = int(round(np.log2(len(amps)))) if len(amps) else 0
        if amps.ndim != 1 or len(amps) != 2**n:
            raise ValueError("amplitude count must be a power of two")
        _check_n(n)
        object.__setattr__(self, "amplitudes", amps)

    @property
    def n_qubits(self) -> int:
        return len(self.amplitudes).bit_length() - 1

    def norm(self) -> float:
        return float(np.sum(np.abs(self.amplitudes) ** 2))


def _check_n(n: int) -> None:
    if not 1 <= n <= MAX_QUBITS:
        raise ValueError(f"qubit count must be in 1..{MAX_QUBITS}, got {n}")


def zero_state(n: int) -> StateVector:
    _check_n(n)
    amps = np.zeros(2**n, dtype=np.complex128)
    amps[0] = 1.0
    return StateVector(amps)


def zero_batch(n: int, batch: int) -> np.ndarray:
    _check_n(n)
    amps = np.zeros((batch, 2**n), dtype=np.complex128)
    amps[:, 0] = 1.0
    return amps


# --- batched gate kernels ---------------------------------------------------


def rotate_batch(amps: np.ndarray, n: int, kind: str, q: int, thetas) -> np.ndarray:
    """Apply RY or RZ on qubit ``q`` with one angle per batch row; returns a new array."""
    if not 0 <= q < n:
        raise ValueError(f"qubit {q} out of range for {n} qubits")
    b = amps.shape[0]
    thetas = np.broadcast_to(np.asarray(thetas, dtype=float), (b,))
    view = amps.reshape(b, 2 ** (n - 1 - q), 2, 2**q)
    a0, a1 = view[:, :, 0, :], view[:, :, 1, :]
    out = np.empty_like(view)
    half = (thetas / 2.0)[:, None, None]
    if kind == RY:
        c, s = np.cos(half), np.sin(half)
        out[:, :, 0, :] = c * a0 - s * a1
        out[:, :, 1, :] = s * a0 + c * a1
    elif kind == RZ:
        phase = np.exp(-1j * half)
        out[:, :, 0, :] = phase * a0
        out[:, :, 1, :] = np.conj(phase) * a1
    else:
        raise ValueError(f"{kind} is not a rotation")
    return out.reshape(b, 2**n)


@lru_cache(maxsize=256)
def _cnot_permutation(n: int, control: int, target: int) -> np.ndarray:
    idx = np.arange(2**n)
    return np.where((idx >> control) & 1, idx ^ (1 << target), idx)


def cnot_batch(amps: np.ndarray, n: int, control: int, target: int) -> np.ndarray:
    if not (0 <= control < n and 0 <= target < n) or control == target:
        raise ValueError(f"invalid CNOT({control}->{target}) on {n} qubits")
    return amps[:, _cnot_permutation(n, control, target)]


def apply_gate_batch(amps: np.ndarray, n: int, g: Gate, thetas=None) -> np.ndarray:
    """Apply ``g`` to every state in the batch; ``thetas`` overrides ``g.theta`` per row."""
    if g.kind == CNOT:
        return cnot_batch(amps, n, *g.qubits)
    return rotate_batch(amps, n, g.kind, g.qubits[0], g.theta if thetas is None else thetas)


# --- single-state API ------------------------------------------------------


def apply_gate(s: StateVector, g: Gate) -> StateVector:
    return StateVector(apply_gate_batch(s.amplitudes[None, :], s.n_qubits, g)[0])


def run_circuit(s: StateVector, c: Circuit) -> StateVector:
    if c.n_qubits != s.n_qubits:
        raise ValueError(f"circuit has {c.n_qubits} qubits, state has {s.n_qubits}")
    amps = s.amplitudes[None, :]
    for g in c.gates:
        amps = apply_gate_batch(amps, c.n_qubits, g)
    return StateVector(amps[0].copy())


def prob_zero(s: StateVector) -> float:
    return float(abs(s.amplitudes[0]) ** 2)


def sample_outcomes(s: StateVector, shots: int, rng: np.random.Generator) -> np.ndarray:
    """Full-register measurements by inverse-CDF lookup of uniform draws."""
    if shots < 1:
        raise ValueError("shots must be at least 1")
    cdf = np.cumsum(np.abs(s.amplitudes) ** 2)
    u = rng.random(shots)
    return np.minimum(np.searchsorted(cdf, u, side="right"), len(cdf) - 1)


def zero_count_from_uniforms(p0: float, u: np.ndarray) -> int:
    """Number of all-zeros outcomes the inverse-CDF sampler yields for draws ``u``."""
    return int(np.count_nonzero(u < p0))


def sample_zero_frequency(s: StateVector, shots: int, seed: int) -> float:
    outcomes = sample_outcomes(s, shots, make_rng(seed))
    return np.count_nonzero(outcomes == 0) / shots


def dump_amplitudes(s: StateVector, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("index,re,im\n")
        for i, a in enumerate(s.amplitudes):
            fh.write(f"{i},{float(a.real)!r},{float(a.imag)!r}\n")
