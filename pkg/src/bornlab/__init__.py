"""bornlab: quantum-circuit Born machines and loss-concentration analysis."""

from .concentration import (
    CONCENTRATION_CSV_HEADER,
    VarianceReport,
    WeightProfile,
    b_sigma,
    c_sigma,
    empirical_loss_variance,
    kld_concentration_sweep,
    no_overlap_probability_bound,
    p_sigma,
    theoretical_mmd_variance,
    truncation_error_bound,
    weight_profile,
)
from .distributions import (
    Distribution,
    ProductDistribution,
    SampleSet,
    SubsetMask,
    average_parity,
    empirical_distribution,
    ingest_image_dataset,
    make_dataset,
    marginal,
    total_variation,
)
from .errors import BudgetExceededError, ConfigError, NumericError
from .losses import (
    ExplicitLossSpec,
    GlobalFidelitySpec,
    KernelSpec,
    LocalFidelitySpec,
    MMDLossSpec,
    explicit_loss,
    gaussian_kernel,
    global_quantum_fidelity,
    local_quantum_fidelity,
    loss_fixed_point,
    lqf_hadamard_estimator,
    mmd_exact,
    mmd_product_exact,
    mmd_sampled,
    mmd_truncated,
    target_state,
)
from .rng import child_seed, generator
from .simulator import (
    ParameterizedCircuit,
    ProductState,
    StateVector,
    apply_circuit,
    apply_product_circuit,
    born_distribution,
    build_ansatz,
    expectation_z_string,
    haar_product_params,
    random_params,
    sample_bitstrings,
)
from .training import (
    OptimizerSpec,
    TrainConfig,
    TrainRecord,
    adam_train,
    es_train,
    evaluate_loss,
    evaluate_tvd_exact,
    make_loss_evaluator,
    parameter_shift_gradient,
    train,
)

__all__ = [name for name in dir() if not name.startswith("_")]
