"""Every training loss: explicit divergences, MMD variants, quantum fidelities.

Explicit losses compare two probability tables entrywise with zero model (or
target) probabilities clipped to a small epsilon before logs and ratios.  The
MMD is implemented in three mutually checking routes: the kernel double sum,
the plug-in V-statistic over samples, and the parity (Z-string) expansion
whose truncation at k bodies drops all interactions above 2k qubits.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import Iterable

import numpy as np

from .distributions import (
    Distribution,
    SampleSet,
    all_parities,
    average_parity,
    bits_to_codes,
    empirical_distribution,
)
from .errors import BudgetExceededError
from .rng import child_seed, generator
from .simulator import (
    ParameterizedCircuit,
    ProductState,
    StateVector,
    apply_circuit_to,
)

EXPLICIT_KINDS = (
    "KLD",
    "REV_KLD",
    "JSD_PAPER",
    "JSD_STANDARD",
    "TVD",
    "CLASSICAL_FIDELITY",
    "RENYI",
)

# epsilon defaults: training runs clip at 1e-6, concentration demos at 1e-14
TRAINING_EPSILON = 1e-6
CONCENTRATION_EPSILON = 1e-14

_SPARSE_PAIR_BUDGET = 40_000_000
_SUBSET_BUDGET = 1 << 21


@dataclass(frozen=True)
class ExplicitLossSpec:
    """Pairwise explicit loss choice with its clipping parameter."""

    kind: str
    clip_epsilon: float = TRAINING_EPSILON
    alpha: float | None = None  # RENYI order

    def __post_init__(self) -> None:
        if self.kind not in EXPLICIT_KINDS:
            raise ValueError(f"unknown explicit loss {self.kind!r}")
        if not 0.0 < self.clip_epsilon < 1.0:
            raise ValueError("clip_epsilon must lie in (0, 1)")
        if self.kind == "RENYI":
            if self.alpha is None or self.alpha <= 0 or self.alpha == 1.0:
                raise ValueError("RENYI requires alpha > 0, alpha != 1")


@dataclass(frozen=True)
class KernelSpec:
    """Gaussian kernel mixture over bandwidths, or the Kronecker delta kernel."""

    bandwidths: tuple[float, ...] = ()
    delta_kernel: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "bandwidths", tuple(float(s) for s in self.bandwidths))
        if self.delta_kernel:
            if self.bandwidths:
                raise ValueError("delta kernel excludes bandwidths")
        else:
            if not self.bandwidths:
                raise ValueError("need at least one bandwidth")
            if any(s <= 0 for s in self.bandwidths):
                raise ValueError("bandwidths must be positive")

    @classmethod
    def single(cls, sigma: float) -> "KernelSpec":
        return cls(bandwidths=(sigma,))

    @classmethod
    def delta(cls) -> "KernelSpec":
        return cls(delta_kernel=True)


@dataclass(frozen=True)
class MMDLossSpec:
    """MMD loss against a kernel; used by the training and sweep drivers."""

    kernel: KernelSpec


@dataclass(frozen=True)
class LocalFidelitySpec:
    """Local quantum fidelity loss (quantum measurement strategy)."""


@dataclass(frozen=True)
class GlobalFidelitySpec:
    """Global quantum fidelity loss 1 - |<phi|psi>|^2."""


LossSpec = ExplicitLossSpec | MMDLossSpec | LocalFidelitySpec | GlobalFidelitySpec


# ---------------------------------------------------------------------------
# explicit losses

def _aligned_tables(p: Distribution, q: Distribution) -> tuple[np.ndarray, np.ndarray]:
    """Probabilities of p and q on the union support (zeros where absent)."""
    if p.n_bits != q.n_bits:
        raise ValueError("distributions have different lengths")
    all_bits = np.concatenate([p.bits, q.bits])
    rows, inverse = np.unique(all_bits, axis=0, return_inverse=True)
    pv = np.zeros(len(rows))
    qv = np.zeros(len(rows))
    np.add.at(pv, inverse[: p.support_size], p.probs)
    np.add.at(qv, inverse[p.support_size:], q.probs)
    return pv, qv


def _clip_zeros(v: np.ndarray, eps: float) -> np.ndarray:
    return np.where(v > 0.0, v, eps)


def explicit_loss(spec: ExplicitLossSpec, p: Distribution, q: Distribution) -> float:
    """Pairwise explicit loss of the model q against the target p.

    Zero model probabilities (and zero target probabilities where the formula
    divides by them) are replaced by ``spec.clip_epsilon``.
    """
    pv, qv = _aligned_tables(p, q)
    eps = spec.clip_epsilon
    kind = spec.kind
    if kind == "KLD":
        mask = pv > 0
        return float(np.sum(pv[mask] * np.log(pv[mask] / _clip_zeros(qv[mask], eps))))
    if kind == "REV_KLD":
        mask = qv > 0
        return float(np.sum(qv[mask] * np.log(qv[mask] / _clip_zeros(pv[mask], eps))))
    if kind == "JSD_PAPER":
        # literal two-term form with denominator p + q; minimum -2 ln 2 at p = q
        total = 0.0
        mask = pv > 0
        total += np.sum(pv[mask] * np.log(pv[mask] / (pv[mask] + qv[mask])))
        mask = qv > 0
        total += np.sum(qv[mask] * np.log(qv[mask] / (pv[mask] + qv[mask])))
        return float(total)
    if kind == "JSD_STANDARD":
        total = 0.0
        mask = pv > 0
        total += 0.5 * np.sum(pv[mask] * np.log(2 * pv[mask] / (pv[mask] + qv[mask])))
        mask = qv > 0
        total += 0.5 * np.sum(qv[mask] * np.log(2 * qv[mask] / (pv[mask] + qv[mask])))
        return float(total)
    if kind == "TVD":
        return float(np.abs(pv - qv).sum())
    if kind == "CLASSICAL_FIDELITY":
        return float(1.0 - np.sqrt(pv * qv).sum())
    # RENYI
    alpha = float(spec.alpha)  # type: ignore[arg-type]
    mask = pv > 0
    s = np.sum(pv[mask] ** alpha * _clip_zeros(qv[mask], eps) ** (1.0 - alpha))
    return float(np.log(s) / (alpha - 1.0))


def explicit_loss_grad_q(
    spec: ExplicitLossSpec, p_at: np.ndarray, q_at: np.ndarray
) -> np.ndarray:
    """d(loss)/d(q(x)) evaluated entrywise at the given probability tables.

    Matches ``explicit_loss`` wherever that function is differentiable; used
    by the parameter-shift chain rule.
    """
    eps = spec.clip_epsilon
    kind = spec.kind
    p_at = np.asarray(p_at, dtype=np.float64)
    q_c = _clip_zeros(np.asarray(q_at, dtype=np.float64), eps)
    if kind == "KLD":
        return np.where(p_at > 0, -p_at / q_c, 0.0)
    if kind == "REV_KLD":
        p_c = _clip_zeros(p_at, eps)
        return np.log(q_c / p_c) + 1.0
    if kind == "JSD_PAPER":
        return np.log(q_c / (p_at + q_c))
    if kind == "JSD_STANDARD":
        return 0.5 * np.log(2 * q_c / (p_at + q_c))
    if kind == "TVD":
        return np.sign(q_at - p_at)
    if kind == "CLASSICAL_FIDELITY":
        return np.where(p_at > 0, -0.5 * np.sqrt(p_at / q_c), 0.0)
    alpha = float(spec.alpha)  # type: ignore[arg-type]
    terms = np.where(p_at > 0, p_at ** alpha * q_c ** (1.0 - alpha), 0.0)
    s = terms.sum()
    return np.where(p_at > 0, -((p_at / q_c) ** alpha) / s, 0.0)


def loss_fixed_point(
    spec: ExplicitLossSpec, p: Distribution, q: Distribution
) -> float:
    """Loss value on disjoint supports: sum f(p, 0) + sum f(0, q), clipped.

    This is where a finite-shot estimate concentrates once model samples no
    longer overlap the training set.
    """
    eps = spec.clip_epsilon
    kind = spec.kind
    pv, qv = p.probs, q.probs
    if kind == "KLD":
        return float(np.sum(pv * np.log(pv / eps)))
    if kind == "REV_KLD":
        return float(np.sum(qv * np.log(qv / eps)))
    if kind == "JSD_PAPER":
        return 0.0
    if kind == "JSD_STANDARD":
        return float(np.log(2.0))
    if kind == "TVD":
        return 2.0
    if kind == "CLASSICAL_FIDELITY":
        return 1.0
    alpha = float(spec.alpha)  # type: ignore[arg-type]
    return float(np.log(np.sum(pv ** alpha) * eps ** (1.0 - alpha)) / (alpha - 1.0))


# ---------------------------------------------------------------------------
# kernels and MMD

def gaussian_kernel(x: str | np.ndarray, y: str | np.ndarray, spec: KernelSpec) -> float:
    """Kernel value for two bitstrings.

    On bits the squared Euclidean distance equals the Hamming distance, so
    each bandwidth contributes exp(-d_H / (2 sigma)); mixtures average with
    uniform weights.  The delta kernel is 1 iff x == y.
    """
    xb = np.asarray([int(c) for c in x] if isinstance(x, str) else x, dtype=np.int64)
    yb = np.asarray([int(c) for c in y] if isinstance(y, str) else y, dtype=np.int64)
    if xb.shape != yb.shape:
        raise ValueError("bitstrings have different lengths")
    d = int(np.sum(xb != yb))
    if spec.delta_kernel:
        return 1.0 if d == 0 else 0.0
    return float(np.mean([math.exp(-d / (2.0 * s)) for s in spec.bandwidths]))


def _kernel_matrix(
    xb: np.ndarray, yb: np.ndarray, spec: KernelSpec
) -> np.ndarray:
    """Kernel Gram matrix between two bit matrices."""
    x = xb.astype(np.float64)
    y = yb.astype(np.float64)
    d = x.sum(axis=1)[:, None] + y.sum(axis=1)[None, :] - 2.0 * (x @ y.T)
    if spec.delta_kernel:
        return (d < 0.5).astype(np.float64)
    k = np.zeros_like(d)
    for s in spec.bandwidths:
        k += np.exp(-d / (2.0 * s))
    return k / len(spec.bandwidths)


def _kernel_apply_dense(v: np.ndarray, n: int, sigma: float) -> np.ndarray:
    """Multiply a dense length-2^n vector by the Gaussian kernel matrix.

    The Gram matrix factorizes as the n-fold tensor power of [[1, a], [a, 1]]
    with a = exp(-1/(2 sigma)), so the product costs O(n 2^n).
    """
    a = math.exp(-1.0 / (2.0 * sigma))
    out = v.copy()
    for q in range(n):
        view = out.reshape(1 << q, 2, -1)
        v0 = view[:, 0, :].copy()
        view[:, 0, :] += a * view[:, 1, :]
        view[:, 1, :] += a * v0
    return out


def mmd_exact(p: Distribution, q: Distribution, spec: KernelSpec) -> float:
    """Kernel-form MMD: double sum of (q - p) against the kernel.

    Dense O(n 2^n) evaluation for n <= 20; above that a sparse double sum over
    the union support, guarded by a pair budget.
    """
    if p.n_bits != q.n_bits:
        raise ValueError("distributions have different lengths")
    n = p.n_bits
    if spec.delta_kernel:
        pv, qv = _aligned_tables(p, q)
        return float(np.sum((qv - pv) ** 2))
    if n <= 20:
        diff = q.to_dense() - p.to_dense()
        total = 0.0
        for s in spec.bandwidths:
            total += float(diff @ _kernel_apply_dense(diff, n, s))
        return total / len(spec.bandwidths)
    all_bits = np.concatenate([p.bits, q.bits])
    rows, inverse = np.unique(all_bits, axis=0, return_inverse=True)
    if len(rows) ** 2 > _SPARSE_PAIR_BUDGET:
        raise BudgetExceededError(
            f"MMD support product {len(rows)}^2 exceeds the pair budget"
        )
    diff = np.zeros(len(rows))
    np.add.at(diff, inverse[p.support_size:], q.probs)
    np.add.at(diff, inverse[: p.support_size], -p.probs)
    k = _kernel_matrix(rows, rows, spec)
    return float(diff @ k @ diff)


def mmd_sampled(samples_q: SampleSet, samples_p: SampleSet, spec: KernelSpec) -> float:
    """V-statistic MMD: the plug-in of empirical distributions into the kernel form.

    Coincident pairs are included, so this equals ``mmd_exact`` applied to the
    two empirical distributions exactly.
    """
    if samples_q.shots < 1 or samples_p.shots < 1:
        raise ValueError("sample sets must be nonempty")
    return mmd_exact(
        empirical_distribution(samples_p), empirical_distribution(samples_q), spec
    )


def mmd_product_exact(
    state: ProductState, data: Distribution, spec: KernelSpec
) -> float:
    """Exact MMD between a product-state model and sparse data in O(n |supp|^2).

    Uses the per-qubit factorization of both the model probabilities and the
    Gaussian kernel; the model-model and model-data terms cost O(n) and
    O(n |supp|) per bandwidth.
    """
    if data.n_bits != state.n_qubits:
        raise ValueError("data length does not match the state")
    p1 = state.p_one()
    p0 = 1.0 - p1
    bits = data.bits
    q_match = np.where(bits == 1, p1, p0)   # model prob of the data bit value
    q_flip = np.where(bits == 1, p0, p1)
    if spec.delta_kernel:
        qq = float(np.prod(p0**2 + p1**2))
        qp = float(np.dot(data.probs, np.prod(q_match, axis=1)))
        pp = float(np.sum(data.probs**2))
        return qq - 2.0 * qp + pp
    total = 0.0
    x = bits.astype(np.float64)
    d_pp = x.sum(axis=1)[:, None] + x.sum(axis=1)[None, :] - 2.0 * (x @ x.T)
    for s in spec.bandwidths:
        a = math.exp(-1.0 / (2.0 * s))
        qq = float(np.prod(p0**2 + p1**2 + 2.0 * a * p0 * p1))
        qp = float(np.dot(data.probs, np.prod(q_match + a * q_flip, axis=1)))
        pp = float(data.probs @ np.exp(-d_pp / (2.0 * s)) @ data.probs)
        total += qq - 2.0 * qp + pp
    return total / len(spec.bandwidths)


def p_sigma_weight(sigma: float) -> float:
    """Per-qubit Z-pair probability (1 - exp(-1/(2 sigma))) / 2 in (0, 1/2).

    Uses expm1 so the huge-bandwidth tail keeps full precision; at the tiny
    end the value saturates to 0.5 once exp(-1/(2 sigma)) underflows double
    precision (sigma below roughly 0.014).
    """
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    return -math.expm1(-1.0 / (2.0 * sigma)) / 2.0


def mmd_truncated(
    q: Distribution, p: Distribution, sigma: float, k: int
) -> float:
    """Parity-form MMD keeping only subsets of size <= k.

    sum over |A| <= k of (1-p_s)^(n-|A|) p_s^|A| (z_A(q) - z_A(p))^2; the
    empty subset contributes nothing since z_{} = 1 for both arguments.
    At k = n this reproduces the kernel-form MMD.
    """
    if q.n_bits != p.n_bits:
        raise ValueError("distributions have different lengths")
    n = q.n_bits
    if not 0 <= k <= n:
        raise ValueError("k must lie in [0, n]")
    ps = p_sigma_weight(sigma)
    if n <= 20:
        dz = all_parities(q) - all_parities(p)
        sizes = np.bitwise_count(np.arange(1 << n, dtype=np.uint64)).astype(np.int64)
        weights = (1.0 - ps) ** (n - sizes) * ps ** sizes
        keep = (sizes >= 1) & (sizes <= k)
        return float(np.sum(weights[keep] * dz[keep] ** 2))
    n_subsets = sum(math.comb(n, size) for size in range(1, k + 1))
    if n_subsets > _SUBSET_BUDGET:
        raise BudgetExceededError(
            f"{n_subsets} subsets exceed the enumeration budget"
        )
    total = 0.0
    for size in range(1, k + 1):
        weight = (1.0 - ps) ** (n - size) * ps ** size
        for subset in combinations(range(n), size):
            dz = average_parity(q, subset) - average_parity(p, subset)
            total += weight * dz * dz
    return total


# ---------------------------------------------------------------------------
# quantum fidelities

def target_state(data: Distribution) -> StateVector:
    """Encode a distribution as the real state sum_x sqrt(p(x)) |x>.

    All relative phases are chosen zero.
    """
    if data.n_bits > 20:
        raise BudgetExceededError("target-state encoding limited to n <= 20")
    amps = np.sqrt(data.to_dense()).astype(np.complex128)
    return StateVector(data.n_bits, amps)


def global_quantum_fidelity(state: StateVector, target: StateVector) -> float:
    """1 - |<phi|psi>|^2 for the zero-phase data state phi."""
    if state.n_qubits != target.n_qubits:
        raise ValueError("state sizes differ")
    overlap = np.vdot(target.amplitudes, state.amplitudes)
    return float(1.0 - abs(overlap) ** 2)


def local_quantum_fidelity(
    circuit: ParameterizedCircuit,
    params: Iterable[float],
    target: StateVector,
) -> float:
    """Localized fidelity 1/2 - (1/2n) sum_i <phi| U Z_i U^dag |phi>.

    Depends on the circuit through the conjugation U Z_i U^dag, not only on
    the prepared state U|0>.  Vanishes exactly when U|0> matches the target
    up to a global phase.
    """
    chi = apply_circuit_to(circuit, params, target, inverse=True)
    n = circuit.n_qubits
    probs = chi.probabilities()
    total = 0.0
    for i in range(n):
        marg = probs.reshape(1 << i, 2, -1).sum(axis=(0, 2))
        total += marg[0] - marg[1]
    return float(0.5 - total / (2.0 * n))


def lqf_hadamard_estimator(
    circuit: ParameterizedCircuit,
    params: Iterable[float],
    data: Distribution,
    shots_per_test: int | None,
    seed: int = 0,
) -> float:
    """Local quantum fidelity via simulated Hadamard tests.

    Each loss term Re <x| U Z_i U^dag |x'> over data pairs (x, x') is
    estimated from ``shots_per_test`` coin flips with head probability
    (1 + Re)/2.  Conjugate pairs are merged: only x <= x' is evaluated
    and off-diagonal real parts are doubled, halving the test count.
    ``shots_per_test=None`` runs in exact mode and equals
    ``local_quantum_fidelity`` up to float roundoff.
    """
    n = circuit.n_qubits
    if data.n_bits != n:
        raise ValueError("data length does not match the circuit")
    n_pairs = data.support_size * (data.support_size + 1) // 2
    if shots_per_test is not None and n * n_pairs > 1_000_000:
        raise BudgetExceededError(
            f"{n * n_pairs} Hadamard tests exceed the test budget"
        )
    params = np.asarray(params, dtype=np.float64)
    codes = bits_to_codes(data.bits)
    amp_roots = np.sqrt(data.probs)
    total = 0.0
    test_index = 0
    for col, (code_xp, w_xp) in enumerate(zip(codes, amp_roots)):
        # one inverse evolution per data column, then n conjugated Z's
        basis = np.zeros(1 << n, dtype=np.complex128)
        basis[code_xp] = 1.0
        chi = apply_circuit_to(circuit, params, StateVector(n, basis), inverse=True)
        for i in range(n):
            z_amps = chi.amplitudes.copy()
            view = z_amps.reshape(1 << i, 2, -1)
            view[:, 1, :] *= -1.0
            evolved = apply_circuit_to(circuit, params, StateVector(n, z_amps))
            overlaps = evolved.amplitudes[codes[: col + 1]]
            for row in range(col + 1):
                re = float(overlaps[row].real)
                if shots_per_test is None:
                    estimate = re
                else:
                    rng = generator(child_seed(seed, test_index))
                    heads = rng.binomial(shots_per_test, (1.0 + re) / 2.0)
                    estimate = 2.0 * heads / shots_per_test - 1.0
                test_index += 1
                weight = amp_roots[row] * w_xp
                if row != col:
                    weight *= 2.0
                total += weight * estimate
    return float(0.5 - total / (2.0 * n))
