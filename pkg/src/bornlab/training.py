"""Gradient and gradient-free optimization of Born machines.

Gradients use the parameter-shift rule: every parameterized gate is a
half-turn generator, so shifted model distributions at theta_j +- pi/2 give
the exact probability derivative (q+ - q-)/2, which is chained through the
loss.  State-linear losses (local/global quantum fidelity) reduce to
(L+ - L-)/2 directly; distribution losses (explicit family and MMD) use the
chain rule with the analytic d loss/d q, which for the MMD's quadratic term
is *not* the same as (L+ - L-)/2.

The gradient-free route is a separable (mu/mu, lambda) evolution strategy
with per-coordinate step sizes (diagonal-covariance CMA flavour); the
incumbent mean joins every selection pool, so with mu = 1 and a noise-free
loss the per-generation best is monotone.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from .distributions import (
    Distribution,
    ProductDistribution,
    empirical_distribution,
    total_variation,
)
from .errors import BudgetExceededError, ConfigError, NumericError
from .losses import (
    ExplicitLossSpec,
    GlobalFidelitySpec,
    LocalFidelitySpec,
    LossSpec,
    MMDLossSpec,
    _kernel_apply_dense,
    _kernel_matrix,
    explicit_loss,
    explicit_loss_grad_q,
    global_quantum_fidelity,
    local_quantum_fidelity,
    lqf_hadamard_estimator,
    mmd_exact,
    mmd_product_exact,
    target_state,
)
from .rng import child_seed, generator
from .simulator import (
    MAX_STATEVECTOR_QUBITS,
    ParameterizedCircuit,
    apply_circuit,
    apply_product_circuit,
    born_distribution,
    random_params,
    sample_bitstrings,
)


@dataclass(frozen=True)
class OptimizerSpec:
    """Optimizer choice and hyperparameters.

    ADAM follows the decaying schedule lr(t) = max(lr0 exp(-decay t), lr_min).
    ES population defaults to 4 + floor(3 ln d) with mu = lambda // 2.
    """

    kind: str = "ADAM"
    lr0: float = 0.01
    lr_decay: float = 0.005
    lr_min: float = 1e-5
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    population: int | None = None
    parents: int | None = None
    step_size: float = 0.5
    # ES relative tie threshold: losses differing by less than
    # rank_epsilon * |pool median| count as equal rank. Rank selection is
    # scale-invariant, so without a resolution floor it exploits relative
    # differences far below anything a finite-shot estimate distinguishes;
    # 0 disables the guard.
    rank_epsilon: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in ("ADAM", "ES"):
            raise ValueError(f"unknown optimizer kind {self.kind!r}")
        if self.step_size <= 0:
            raise ValueError("step_size must be positive")
        if self.rank_epsilon < 0:
            raise ValueError("rank_epsilon must be nonnegative")
        if self.population is not None and self.parents is not None:
            if not self.population >= 2 * self.parents >= 2:
                raise ValueError("need population >= 2 * parents >= 2")

    def learning_rate(self, t: int) -> float:
        return max(self.lr0 * math.exp(-self.lr_decay * t), self.lr_min)


@dataclass(frozen=True)
class TrainConfig:
    """Everything one training run depends on; immutable and hashable-ish."""

    circuit: ParameterizedCircuit
    loss: LossSpec
    data: Distribution
    max_iterations: int
    master_seed: int
    optimizer: OptimizerSpec = OptimizerSpec()
    shots: int | None = None
    k_batch: int = 1
    grad_clip: float | None = None
    init_params: tuple[float, ...] | None = None
    near_identity_init: bool = False

    def __post_init__(self) -> None:
        if self.shots is not None and self.shots < 1:
            raise ValueError("shots must be >= 1 or None for exact evaluation")
        if self.k_batch < 1:
            raise ValueError("k_batch must be >= 1")
        if self.grad_clip is not None and self.grad_clip <= 0:
            raise ValueError("gradient clip threshold must be positive")
        if self.init_params is not None and len(self.init_params) != self.circuit.n_params:
            raise ValueError("init_params length does not match the circuit")


@dataclass
class TrainRecord:
    """Per-iteration trace of a training run plus the final parameters."""

    iters: np.ndarray
    loss_estimates: np.ndarray
    tvd_exact: np.ndarray  # NaN where the exact TVD is unavailable
    lr: np.ndarray         # NaN on the final (no-update) row
    grad_norm: np.ndarray
    final_params: np.ndarray
    wall_clock_s: float

    CSV_HEADER = "iter,loss_estimate,tvd_exact,lr,grad_norm"

    def csv_lines(self) -> list[str]:
        lines = [self.CSV_HEADER]
        for i in range(len(self.iters)):
            cells = [str(int(self.iters[i]))]
            for arr in (self.loss_estimates, self.tvd_exact, self.lr, self.grad_norm):
                v = arr[i]
                cells.append("" if np.isnan(v) else repr(float(v)))
            lines.append(",".join(cells))
        return lines

    def write_csv(self, path: str | Path) -> None:
        Path(path).write_text("\n".join(self.csv_lines()) + "\n", encoding="ascii")


# ---------------------------------------------------------------------------
# loss evaluation

def _model_distribution(
    circuit: ParameterizedCircuit,
    params: np.ndarray,
    shots: int | None,
    seed: int,
) -> Distribution:
    """Exact or empirical model distribution at the given parameters."""
    if circuit.is_product:
        state = apply_product_circuit(circuit, params)
        if shots is None:
            dist = born_distribution(state)
            if isinstance(dist, ProductDistribution):
                raise BudgetExceededError(
                    "exact distributions of wide product circuits are not enumerable"
                )
            return dist
        return empirical_distribution(sample_bitstrings(state, shots, seed))
    state = apply_circuit(circuit, params)
    if shots is None:
        return born_distribution(state)
    return empirical_distribution(sample_bitstrings(state, shots, seed))


def evaluate_loss(
    circuit: ParameterizedCircuit,
    params: np.ndarray,
    loss: LossSpec,
    data: Distribution,
    shots: int | None,
    seed: int,
) -> float:
    """One loss evaluation, exact (shots=None) or finite-shot."""
    params = np.asarray(params, dtype=np.float64)
    if isinstance(loss, MMDLossSpec):
        if shots is None and circuit.is_product:
            return mmd_product_exact(apply_product_circuit(circuit, params), data, loss.kernel)
        q = _model_distribution(circuit, params, shots, seed)
        return mmd_exact(data, q, loss.kernel)
    if isinstance(loss, ExplicitLossSpec):
        q = _model_distribution(circuit, params, shots, seed)
        return explicit_loss(loss, data, q)
    if isinstance(loss, LocalFidelitySpec):
        if shots is None:
            return local_quantum_fidelity(circuit, params, target_state(data))
        return lqf_hadamard_estimator(circuit, params, data, shots, seed)
    if isinstance(loss, GlobalFidelitySpec):
        value = global_quantum_fidelity(apply_circuit(circuit, params), target_state(data))
        if shots is None:
            return value
        heads = generator(seed).binomial(shots, 1.0 - value)
        return 1.0 - heads / shots
    raise TypeError(f"unsupported loss spec {loss!r}")


def make_loss_evaluator(loss: LossSpec):
    """Adapter with the (circuit, params, data, shots, seed) evaluator signature."""

    def evaluator(circuit, params, data, shots, seed):
        return evaluate_loss(circuit, params, loss, data, shots, seed)

    return evaluator


# ---------------------------------------------------------------------------
# parameter-shift gradients

def _grad_field_dense(
    loss: LossSpec, data: Distribution, q_fwd: Distribution, n: int
) -> np.ndarray:
    """d loss / d q(x) on the full 2^n grid, at the forward distribution."""
    p_dense = data.to_dense()
    q_dense = q_fwd.to_dense()
    if isinstance(loss, ExplicitLossSpec):
        return explicit_loss_grad_q(loss, p_dense, q_dense)
    kernel = loss.kernel
    diff = q_dense - p_dense
    if kernel.delta_kernel:
        return 2.0 * diff
    acc = np.zeros_like(diff)
    for s in kernel.bandwidths:
        acc += _kernel_apply_dense(diff, n, s)
    return 2.0 * acc / len(kernel.bandwidths)


def _grad_field_sparse(
    loss: LossSpec,
    data: Distribution,
    q_fwd: Distribution,
    rows: np.ndarray,
) -> np.ndarray:
    """d loss / d q(x) on the given bit rows only."""
    if isinstance(loss, ExplicitLossSpec):
        return explicit_loss_grad_q(loss, data.probs_of(rows), q_fwd.probs_of(rows))
    kernel = loss.kernel
    if kernel.delta_kernel:
        return 2.0 * (q_fwd.probs_of(rows) - data.probs_of(rows))
    kq = _kernel_matrix(rows, q_fwd.bits, kernel) @ q_fwd.probs
    kp = _kernel_matrix(rows, data.bits, kernel) @ data.probs
    return 2.0 * (kq - kp)


def parameter_shift_gradient(
    config: TrainConfig, params: Iterable[float], seed: int
) -> np.ndarray:
    """Exact-chain-rule gradient from parameter-shifted evaluations.

    Distribution losses use grad_j = sum_x dL/dq(x) * (q+(x) - q-(x))/2 with
    dL/dq evaluated at the forward-pass distribution; fidelity losses use the
    direct (L+ - L-)/2 shift identity.
    """
    circuit, loss = config.circuit, config.loss
    params = np.asarray(params, dtype=np.float64)
    d = circuit.n_params
    grad = np.zeros(d)
    if isinstance(loss, (LocalFidelitySpec, GlobalFidelitySpec)):
        for j in range(d):
            shifted = params.copy()
            shifted[j] += math.pi / 2
            up = evaluate_loss(circuit, shifted, loss, config.data, config.shots,
                               child_seed(seed, j, 0))
            shifted[j] -= math.pi
            down = evaluate_loss(circuit, shifted, loss, config.data, config.shots,
                                 child_seed(seed, j, 1))
            grad[j] = (up - down) / 2.0
        return grad

    q_fwd = _model_distribution(circuit, params, config.shots, child_seed(seed, d, 2))
    n = circuit.n_qubits
    dense = config.shots is None and n <= 16
    g_dense = _grad_field_dense(loss, config.data, q_fwd, n) if dense else None
    for j in range(d):
        shifted = params.copy()
        shifted[j] += math.pi / 2
        q_plus = _model_distribution(circuit, shifted, config.shots, child_seed(seed, j, 0))
        shifted[j] -= math.pi
        q_minus = _model_distribution(circuit, shifted, config.shots, child_seed(seed, j, 1))
        if dense:
            dq = (q_plus.to_dense() - q_minus.to_dense()) / 2.0
            grad[j] = float(g_dense @ dq)
        else:
            rows = np.unique(np.concatenate([q_plus.bits, q_minus.bits]), axis=0)
            dq = (q_plus.probs_of(rows) - q_minus.probs_of(rows)) / 2.0
            g = _grad_field_sparse(loss, config.data, q_fwd, rows)
            grad[j] = float(g @ dq)
    return grad


# ---------------------------------------------------------------------------
# exact TVD progress metric

def evaluate_tvd_exact(
    circuit: ParameterizedCircuit, params: Iterable[float], target: Distribution
) -> float:
    """Exact total variation between the model and the target.

    Product circuits are evaluated over the target support plus the leftover
    model mass, so the cost stays O(n |supp|) at any width; other circuits
    need a full statevector.
    """
    params = np.asarray(params, dtype=np.float64)
    if circuit.is_product:
        state = apply_product_circuit(circuit, params)
        q_supp = ProductDistribution(state.p_one()).probs_of(target.bits)
        return float(np.abs(q_supp - target.probs).sum() + (1.0 - q_supp.sum()))
    if circuit.n_qubits > MAX_STATEVECTOR_QUBITS:
        raise BudgetExceededError("exact TVD needs a product circuit above the statevector cap")
    model = born_distribution(apply_circuit(circuit, params))
    return total_variation(model, target)


def _tvd_if_possible(
    circuit: ParameterizedCircuit, params: np.ndarray, target: Distribution
) -> float:
    try:
        return evaluate_tvd_exact(circuit, params, target)
    except BudgetExceededError:
        return float("nan")


def _initial_params(config: TrainConfig) -> np.ndarray:
    if config.init_params is not None:
        return np.asarray(config.init_params, dtype=np.float64)
    if config.near_identity_init:
        rng = generator(child_seed(config.master_seed, 0))
        return rng.uniform(-0.01, 0.01, config.circuit.n_params)
    return random_params(config.circuit, child_seed(config.master_seed, 0))


# ---------------------------------------------------------------------------
# Adam

def adam_train(config: TrainConfig) -> TrainRecord:
    """Adam with the decaying learning-rate schedule and parameter-shift gradients.

    Gradients are optionally averaged over the last k_batch estimates and
    clipped elementwise at the configured threshold.  Deterministic given the
    master seed.
    """
    if config.optimizer.kind != "ADAM":
        raise ConfigError("adam_train requires an ADAM optimizer spec")
    start = time.perf_counter()
    opt = config.optimizer
    params = _initial_params(config)
    d = config.circuit.n_params
    m = np.zeros(d)
    v = np.zeros(d)
    window: list[np.ndarray] = []
    iters, losses, tvds, lrs, gnorms = [], [], [], [], []
    for t in range(config.max_iterations):
        loss_t = evaluate_loss(
            config.circuit, params, config.loss, config.data, config.shots,
            child_seed(config.master_seed, 10, t),
        )
        if math.isnan(loss_t):
            raise NumericError(f"NaN loss at iteration {t}")
        grad = parameter_shift_gradient(config, params, child_seed(config.master_seed, 20, t))
        window.append(grad)
        if len(window) > config.k_batch:
            window.pop(0)
        g_used = np.mean(window, axis=0)
        if config.grad_clip is not None:
            g_used = np.clip(g_used, -config.grad_clip, config.grad_clip)
        lr = opt.learning_rate(t)
        iters.append(t)
        losses.append(loss_t)
        tvds.append(_tvd_if_possible(config.circuit, params, config.data))
        lrs.append(lr)
        gnorms.append(float(np.linalg.norm(g_used)))
        m = opt.beta1 * m + (1.0 - opt.beta1) * g_used
        v = opt.beta2 * v + (1.0 - opt.beta2) * g_used**2
        m_hat = m / (1.0 - opt.beta1 ** (t + 1))
        v_hat = v / (1.0 - opt.beta2 ** (t + 1))
        params = params - lr * m_hat / (np.sqrt(v_hat) + opt.adam_eps)
    final_loss = evaluate_loss(
        config.circuit, params, config.loss, config.data, config.shots,
        child_seed(config.master_seed, 10, config.max_iterations),
    )
    iters.append(config.max_iterations)
    losses.append(final_loss)
    tvds.append(_tvd_if_possible(config.circuit, params, config.data))
    lrs.append(float("nan"))
    gnorms.append(float("nan"))
    return TrainRecord(
        np.array(iters), np.array(losses), np.array(tvds), np.array(lrs),
        np.array(gnorms), params, time.perf_counter() - start,
    )


# ---------------------------------------------------------------------------
# separable evolution strategy

def es_train(config: TrainConfig) -> TrainRecord:
    """(mu/mu, lambda) evolution strategy with per-coordinate step sizes.

    Diagonal-covariance CMA recipe: rank-based weighted recombination,
    cumulative step-size adaptation for the global step, and a diagonal
    covariance update providing the per-coordinate scales.  The incumbent
    mean is re-evaluated every generation and joins the selection pool.
    """
    if config.optimizer.kind != "ES":
        raise ConfigError("es_train requires an ES optimizer spec")
    start = time.perf_counter()
    opt = config.optimizer
    d = config.circuit.n_params
    lam = opt.population or (4 + int(3 * math.log(d)))
    mu = opt.parents or max(1, lam // 2)
    if not lam >= 2 * mu >= 2:
        raise ConfigError("need population >= 2 * parents >= 2")
    raw = np.log(mu + 0.5) - np.log(np.arange(1, mu + 1))
    weights = raw / raw.sum()
    mu_eff = 1.0 / np.sum(weights**2)
    c_sig = (mu_eff + 2.0) / (d + mu_eff + 5.0)
    d_sig = 1.0 + 2.0 * max(0.0, math.sqrt((mu_eff - 1.0) / (d + 1.0)) - 1.0) + c_sig
    c_c = (4.0 + mu_eff / d) / (d + 4.0 + 2.0 * mu_eff / d)
    sep_boost = (d + 2.0) / 3.0
    c_1 = min(1.0, sep_boost * 2.0 / ((d + 1.3) ** 2 + mu_eff))
    c_mu = min(
        1.0 - c_1,
        sep_boost * 2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((d + 2.0) ** 2 + mu_eff),
    )
    chi_d = math.sqrt(d) * (1.0 - 1.0 / (4.0 * d) + 1.0 / (21.0 * d * d))

    mean = _initial_params(config)
    sigma_g = opt.step_size
    c_diag = np.ones(d)
    p_sig = np.zeros(d)
    p_c = np.zeros(d)
    seed = config.master_seed

    def evaluate(x: np.ndarray, gen: int, k: int) -> float:
        value = evaluate_loss(
            config.circuit, x, config.loss, config.data, config.shots,
            child_seed(seed, 30, gen, k),
        )
        if math.isnan(value):
            raise NumericError(f"NaN loss in generation {gen}")
        return value

    iters, losses, tvds, lrs, gnorms = [0], [evaluate(mean, 0, 0)], [
        _tvd_if_possible(config.circuit, mean, config.data)
    ], [sigma_g], [float("nan")]

    for gen in range(1, config.max_iterations + 1):
        rng = generator(child_seed(seed, 40, gen))
        z = rng.standard_normal((lam, d))
        scale = sigma_g * np.sqrt(c_diag)
        candidates = mean[None, :] + z * scale[None, :]
        values = np.array([evaluate(candidates[k], gen, k) for k in range(lam)])
        incumbent_value = evaluate(mean, gen, lam)
        # selection pool: offspring plus the incumbent (z = 0 contribution)
        pool_z = np.vstack([z, np.zeros(d)])
        pool_x = np.vstack([candidates, mean])
        pool_v = np.append(values, incumbent_value)
        if opt.rank_epsilon > 0.0:
            scale = max(float(np.abs(np.median(pool_v))), 1e-300)
            rank_keys = np.round(pool_v / (opt.rank_epsilon * scale))
        else:
            rank_keys = pool_v
        order = np.argsort(rank_keys, kind="stable")[:mu]
        z_sel = pool_z[order]
        z_bar = weights @ z_sel
        y_bar = np.sqrt(c_diag) * z_bar
        mean = weights @ pool_x[order]
        p_sig = (1.0 - c_sig) * p_sig + math.sqrt(c_sig * (2.0 - c_sig) * mu_eff) * z_bar
        sigma_g *= math.exp((c_sig / d_sig) * (np.linalg.norm(p_sig) / chi_d - 1.0))
        h_sig = float(
            np.linalg.norm(p_sig) / math.sqrt(1.0 - (1.0 - c_sig) ** (2 * gen))
            < (1.4 + 2.0 / (d + 1.0)) * chi_d
        )
        p_c = (1.0 - c_c) * p_c + h_sig * math.sqrt(c_c * (2.0 - c_c) * mu_eff) * y_bar
        y_sel = np.sqrt(c_diag)[None, :] * z_sel
        rank_mu = weights @ (y_sel**2)
        c_diag = (
            (1.0 - c_1 - c_mu) * c_diag
            + c_1 * (p_c**2 + (1.0 - h_sig) * c_c * (2.0 - c_c) * c_diag)
            + c_mu * rank_mu
        )
        c_diag = np.maximum(c_diag, 1e-20)
        iters.append(gen)
        losses.append(float(pool_v.min()))
        tvds.append(_tvd_if_possible(config.circuit, mean, config.data))
        lrs.append(sigma_g)
        gnorms.append(float("nan"))
    return TrainRecord(
        np.array(iters), np.array(losses), np.array(tvds), np.array(lrs),
        np.array(gnorms), mean, time.perf_counter() - start,
    )


def train(config: TrainConfig) -> TrainRecord:
    """Dispatch on the optimizer kind."""
    if config.optimizer.kind == "ADAM":
        return adam_train(config)
    return es_train(config)
