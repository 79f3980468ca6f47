"""Parameterized circuits, statevector simulation and the product fast path.

Circuits are flat gate lists over {RX, RY, RZ, EulerZYZ, CX}. An EulerZYZ
gate consumes three angles (a, b, c) and applies RZ(c), then RY(b), then
RZ(a), i.e. the matrix RZ(a) @ RY(b) @ RZ(c).  Amplitude indexing follows the
library-wide convention: qubit 0 is the most-significant bit of the
statevector index and the leftmost character of a bitstring.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .distributions import Distribution, ProductDistribution, SampleSet, codes_to_bits
from .errors import BudgetExceededError
from .rng import generator

MAX_STATEVECTOR_QUBITS = 25
# born_distribution enumerates product states densely only up to this size
_DENSE_ENUMERATION_QUBITS = 20

ANSATZ_KINDS = ("HEA_LINE", "HEA_ALLPAIR", "PRODUCT_RY", "PRODUCT_HAAR")

# (name, qubits, number of consumed angles)
Op = tuple[str, tuple[int, ...], int]


@dataclass(frozen=True)
class ParameterizedCircuit:
    """Gate program with a fixed parameter layout.

    Parameters are consumed by the ops in program order; ``n_params`` is a
    pure function of (ansatz_kind, n_qubits, depth).
    """

    n_qubits: int
    ops: tuple[Op, ...]
    ansatz_kind: str
    depth: int

    def __post_init__(self) -> None:
        for name, qubits, _ in self.ops:
            for q in qubits:
                if not 0 <= q < self.n_qubits:
                    raise ValueError(f"gate {name} addresses qubit {q} outside [0, {self.n_qubits})")

    @property
    def n_params(self) -> int:
        return sum(k for _, _, k in self.ops)

    @property
    def is_product(self) -> bool:
        return self.ansatz_kind.startswith("PRODUCT")


def expected_param_count(kind: str, n_qubits: int, depth: int) -> int:
    if kind == "HEA_LINE":
        return 3 * n_qubits + depth * (3 * n_qubits + (n_qubits - 1))
    if kind == "HEA_ALLPAIR":
        return 3 * n_qubits * (depth + 1)
    if kind == "PRODUCT_RY":
        return n_qubits
    if kind == "PRODUCT_HAAR":
        return 3 * n_qubits
    raise ValueError(f"unknown ansatz kind {kind!r}")


def build_ansatz(kind: str, n_qubits: int, depth: int = 0) -> ParameterizedCircuit:
    """Hardware-efficient and tensor-product circuit families.

    HEA_LINE applies an EulerZYZ layer, then ``depth`` repetitions of a
    nearest-neighbour entangler (CX(i,i+1) RY_i CX(i,i+1) for each i)
    followed by another EulerZYZ layer.  HEA_ALLPAIR replaces the entangler
    with the parameter-free all-pair CX cascade.  PRODUCT kinds are a single
    layer of one-qubit rotations and ignore ``depth``.
    """
    kind = kind.upper()
    if kind not in ANSATZ_KINDS:
        raise ValueError(f"unknown ansatz kind {kind!r}; choose from {ANSATZ_KINDS}")
    if n_qubits < 1:
        raise ValueError("n_qubits must be positive")
    if depth < 0:
        raise ValueError("depth must be nonnegative")
    ops: list[Op] = []

    def euler_layer() -> None:
        for q in range(n_qubits):
            ops.append(("euler", (q,), 3))

    if kind == "PRODUCT_RY":
        for q in range(n_qubits):
            ops.append(("ry", (q,), 1))
        depth = 0
    elif kind == "PRODUCT_HAAR":
        euler_layer()
        depth = 0
    else:
        euler_layer()
        for _ in range(depth):
            if kind == "HEA_LINE":
                for i in range(n_qubits - 1):
                    ops.append(("cx", (i, i + 1), 0))
                    ops.append(("ry", (i,), 1))
                    ops.append(("cx", (i, i + 1), 0))
            else:
                for i in range(n_qubits - 1):
                    for j in range(i + 1, n_qubits):
                        ops.append(("cx", (i, j), 0))
            euler_layer()
    circuit = ParameterizedCircuit(n_qubits, tuple(ops), kind, depth)
    assert circuit.n_params == expected_param_count(kind, n_qubits, depth)
    return circuit


# ---------------------------------------------------------------------------
# states

@dataclass(frozen=True)
class StateVector:
    """Full 2^n amplitude vector; unit norm within 1e-10."""

    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self) -> None:
        amps = np.ascontiguousarray(np.asarray(self.amplitudes, dtype=np.complex128))
        if amps.shape != (1 << self.n_qubits,):
            raise ValueError("amplitude vector has wrong length")
        norm = float(np.vdot(amps, amps).real)
        if abs(norm - 1.0) > 1e-10:
            raise ValueError(f"state norm^2 = {norm}, not 1")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2


@dataclass(frozen=True)
class ProductState:
    """Factorized n-qubit state: one unit-norm 2-vector per qubit."""

    n_qubits: int
    qubit_states: np.ndarray  # (n, 2) complex

    def __post_init__(self) -> None:
        qs = np.ascontiguousarray(np.asarray(self.qubit_states, dtype=np.complex128))
        if qs.shape != (self.n_qubits, 2):
            raise ValueError("qubit state array has wrong shape")
        norms = np.abs(qs[:, 0]) ** 2 + np.abs(qs[:, 1]) ** 2
        if np.any(np.abs(norms - 1.0) > 1e-12):
            raise ValueError("per-qubit states must have unit norm")
        qs.setflags(write=False)
        object.__setattr__(self, "qubit_states", qs)

    def p_one(self) -> np.ndarray:
        return np.abs(self.qubit_states[:, 1]) ** 2


# ---------------------------------------------------------------------------
# gate kernels

def _rx(t: float) -> np.ndarray:
    c, s = math.cos(t / 2), math.sin(t / 2)
    return np.array([[c, -1j * s], [-1j * s, c]], dtype=np.complex128)


def _ry(t: float) -> np.ndarray:
    c, s = math.cos(t / 2), math.sin(t / 2)
    return np.array([[c, -s], [s, c]], dtype=np.complex128)


def _rz(t: float) -> np.ndarray:
    e = np.exp(-0.5j * t)
    return np.array([[e, 0], [0, e.conjugate()]], dtype=np.complex128)


def _euler_zyz(a: float, b: float, c: float) -> np.ndarray:
    return _rz(a) @ _ry(b) @ _rz(c)


_GATE_MATRICES = {
    "rx": lambda angles: _rx(angles[0]),
    "ry": lambda angles: _ry(angles[0]),
    "rz": lambda angles: _rz(angles[0]),
    "euler": lambda angles: _euler_zyz(*angles),
}


def _apply_1q(amps: np.ndarray, u: np.ndarray, q: int, n: int) -> None:
    view = amps.reshape(1 << q, 2, -1)
    a0 = view[:, 0, :]
    a1 = view[:, 1, :]
    new0 = u[0, 0] * a0 + u[0, 1] * a1
    new1 = u[1, 0] * a0 + u[1, 1] * a1
    view[:, 0, :] = new0
    view[:, 1, :] = new1


def _apply_cx(amps: np.ndarray, control: int, target: int, n: int) -> None:
    view = np.moveaxis(amps.reshape((2,) * n), (control, target), (0, 1))
    tmp = view[1, 0].copy()
    view[1, 0] = view[1, 1]
    view[1, 1] = tmp


def _check_params(circuit: ParameterizedCircuit, params: np.ndarray) -> np.ndarray:
    params = np.asarray(params, dtype=np.float64).reshape(-1)
    if params.shape[0] != circuit.n_params:
        raise ValueError(
            f"circuit expects {circuit.n_params} parameters, got {params.shape[0]}"
        )
    return params


def apply_circuit(circuit: ParameterizedCircuit, params: Iterable[float]) -> StateVector:
    """Prepare the circuit state from |0...0>; refuses n > 25 (memory guard)."""
    if circuit.n_qubits > MAX_STATEVECTOR_QUBITS:
        raise BudgetExceededError(
            f"full statevector simulation capped at {MAX_STATEVECTOR_QUBITS} qubits"
        )
    params = _check_params(circuit, params)
    n = circuit.n_qubits
    amps = np.zeros(1 << n, dtype=np.complex128)
    amps[0] = 1.0
    _run_ops(circuit.ops, params, amps, n, inverse=False)
    return StateVector(n, amps)


def apply_circuit_to(
    circuit: ParameterizedCircuit,
    params: Iterable[float],
    state: StateVector,
    inverse: bool = False,
) -> StateVector:
    """Apply U (or its inverse) to an arbitrary input state."""
    if state.n_qubits != circuit.n_qubits:
        raise ValueError("state size does not match circuit")
    params = _check_params(circuit, params)
    amps = state.amplitudes.copy()
    _run_ops(circuit.ops, params, amps, circuit.n_qubits, inverse=inverse)
    return StateVector(circuit.n_qubits, amps)


def _run_ops(
    ops: tuple[Op, ...], params: np.ndarray, amps: np.ndarray, n: int, inverse: bool
) -> None:
    # precompute parameter offsets in program order
    offsets = []
    pos = 0
    for _, _, k in ops:
        offsets.append(pos)
        pos += k
    sequence = range(len(ops) - 1, -1, -1) if inverse else range(len(ops))
    for i in sequence:
        name, qubits, k = ops[i]
        angles = params[offsets[i]: offsets[i] + k]
        if name == "cx":
            _apply_cx(amps, qubits[0], qubits[1], n)
            continue
        u = _GATE_MATRICES[name](angles)
        if inverse:
            u = u.conj().T
        _apply_1q(amps, u, qubits[0], n)


def apply_product_circuit(
    circuit: ParameterizedCircuit, params: Iterable[float]
) -> ProductState:
    """O(n) state preparation for tensor-product circuits."""
    if not circuit.is_product:
        raise ValueError("apply_product_circuit requires a PRODUCT_* circuit")
    params = _check_params(circuit, params)
    qs = np.zeros((circuit.n_qubits, 2), dtype=np.complex128)
    qs[:, 0] = 1.0
    pos = 0
    for name, (q,), k in circuit.ops:
        angles = params[pos: pos + k]
        pos += k
        qs[q] = _GATE_MATRICES[name](angles) @ qs[q]
    return ProductState(circuit.n_qubits, qs)


# ---------------------------------------------------------------------------
# Born distributions, sampling, expectations

def born_distribution(
    state: StateVector | ProductState,
) -> Distribution | ProductDistribution:
    """Measurement distribution of a state.

    Product states with more than 20 qubits return a lazy probability-on-demand
    view rather than an enumerated table.
    """
    if isinstance(state, StateVector):
        return Distribution.from_dense(state.probabilities(), state.n_qubits)
    if state.n_qubits > _DENSE_ENUMERATION_QUBITS:
        return ProductDistribution(state.p_one())
    per_bit = np.abs(state.qubit_states) ** 2
    dense = np.array([1.0])
    for q in range(state.n_qubits):
        dense = np.kron(dense, per_bit[q])
    return Distribution.from_dense(dense, state.n_qubits)


def sample_bitstrings(
    source: StateVector | ProductState | Distribution | ProductDistribution,
    shots: int,
    seed: int,
) -> SampleSet:
    """Draw ``shots`` bitstrings; deterministic given the seed.

    Product states sample each bit as an independent Bernoulli draw, so the
    cost is O(shots * n) at any width.
    """
    if shots < 1:
        raise ValueError("shots must be >= 1")
    rng = generator(seed)
    if isinstance(source, (ProductState, ProductDistribution)):
        p_one = source.p_one() if isinstance(source, ProductState) else source.p_one
        bits = (rng.random((shots, len(p_one))) < p_one).astype(np.uint8)
        return SampleSet(len(p_one), bits, shots, seed)
    if isinstance(source, StateVector):
        probs = source.probabilities()
        probs = probs / probs.sum()
        codes = rng.choice(len(probs), size=shots, p=probs)
        return SampleSet(source.n_qubits, codes_to_bits(codes, source.n_qubits), shots, seed)
    idx = rng.choice(source.support_size, size=shots, p=source.probs)
    return SampleSet(source.n_bits, source.bits[idx], shots, seed)


def expectation_z_string(
    state: StateVector | ProductState, subset: Iterable[int]
) -> float:
    """Expectation of the Z-string on ``subset``: sum_x q(x) (-1)^(parity of x on A)."""
    subset = tuple(sorted(set(int(i) for i in subset)))
    if subset and not (0 <= subset[0] and subset[-1] < state.n_qubits):
        raise ValueError("subset index out of range")
    if not subset:
        return 1.0
    if isinstance(state, ProductState):
        per_bit = np.abs(state.qubit_states) ** 2
        z = per_bit[:, 0] - per_bit[:, 1]
        return float(np.prod(z[list(subset)]))
    n = state.n_qubits
    mask = 0
    for i in subset:
        mask |= 1 << (n - 1 - i)
    codes = np.arange(1 << n, dtype=np.uint64)
    parity = (np.bitwise_count(codes & np.uint64(mask)) & 1).astype(np.float64)
    return float(np.dot(1.0 - 2.0 * parity, state.probabilities()))


# ---------------------------------------------------------------------------
# parameter sampling

def random_params(circuit: ParameterizedCircuit, seed: int) -> np.ndarray:
    """Angles drawn uniformly from [0, 2*pi) — the random-initialization regime."""
    return generator(seed).uniform(0.0, 2.0 * math.pi, circuit.n_params)


def haar_product_params(n_qubits: int, seed: int) -> np.ndarray:
    """EulerZYZ angles whose per-qubit unitaries are Haar random.

    The two Z angles are uniform phases; the middle Y angle is drawn so that
    |<0|U|0>|^2 is uniform on [0, 1], which is the Haar measure for states.
    """
    rng = generator(seed)
    phases = rng.uniform(0.0, 2.0 * math.pi, (n_qubits, 2))
    polar = 2.0 * np.arccos(np.sqrt(rng.random(n_qubits)))
    params = np.empty((n_qubits, 3))
    params[:, 0] = phases[:, 0]
    params[:, 1] = polar
    params[:, 2] = phases[:, 1]
    return params.reshape(-1)


def draw_params(circuit: ParameterizedCircuit, seed: int) -> np.ndarray:
    """Random parameters in the measure matching the ansatz family."""
    if circuit.ansatz_kind == "PRODUCT_HAAR":
        return haar_product_params(circuit.n_qubits, seed)
    return random_params(circuit, seed)
