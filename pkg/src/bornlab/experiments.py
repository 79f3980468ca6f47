"""Config-driven experiment runners behind the CLI.

Every runner consumes a flat config dict, writes CSV artifacts plus a
``summary.json`` manifest into the output directory, and is byte-reproducible
given the same config and seed.  Sweep grids fan out to a thread pool; rows
are always written in deterministic grid order.
"""
from __future__ import annotations

import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from importlib.metadata import version as _pkg_version
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import concentration as conc
from .config import ConfigDict, as_list, load_config, require
from .distributions import Distribution, ingest_image_dataset, make_dataset
from .errors import ConfigError
from .losses import (
    CONCENTRATION_EPSILON,
    ExplicitLossSpec,
    GlobalFidelitySpec,
    KernelSpec,
    LocalFidelitySpec,
    MMDLossSpec,
    TRAINING_EPSILON,
    mmd_exact,
    mmd_truncated,
)
from .rng import child_seed
from .simulator import build_ansatz
from .training import OptimizerSpec, TrainConfig, train


def _version() -> str:
    try:
        return _pkg_version("bornlab")
    except Exception:
        return "unknown"


def resolve_scale(token: object, n: int) -> float:
    """Bandwidth tokens: plain numbers, 'n', 'n/4', '0.25n'."""
    if isinstance(token, (int, float)):
        return float(token)
    text = str(token).strip().lower().replace(" ", "")
    if text == "n":
        return float(n)
    if text.startswith("n/"):
        return n / float(text[2:])
    if text.endswith("n"):
        return float(text[:-1] or 1.0) * n
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"cannot interpret scale token {token!r}")


def resolve_depth(token: object, n: int) -> int:
    """Depth tokens: plain integers, 'n', 'log2n' (= ceil(log2 n))."""
    if isinstance(token, int):
        return token
    text = str(token).strip().lower()
    if text == "n":
        return n
    if text in ("log2n", "log2"):
        return max(1, math.ceil(math.log2(n)))
    try:
        return int(text)
    except ValueError:
        raise ConfigError(f"cannot interpret depth token {token!r}")


def _dataset_from_config(config: ConfigDict, n: int, seed: int) -> Distribution:
    kind = str(config.get("dataset", "point_zero"))
    if kind == "file":
        path = config.get("dataset_file")
        if not path:
            raise ConfigError("dataset = file requires dataset_file")
        threshold = float(config.get("threshold_factor", 0.1))
        return ingest_image_dataset(str(path), threshold)
    k = config.get("dataset_k")
    return make_dataset(kind, n, k=int(k) if k is not None else None, seed=seed)


def _loss_from_config(config: ConfigDict, n: int):
    name = str(config.get("loss", "mmd")).lower()
    if name == "mmd":
        sigmas = tuple(resolve_scale(t, n) for t in as_list(config.get("sigma", [1.0])))
        return MMDLossSpec(KernelSpec(bandwidths=sigmas))
    if name == "mmd_delta":
        return MMDLossSpec(KernelSpec.delta())
    if name == "lqf":
        return LocalFidelitySpec()
    if name == "gqf":
        return GlobalFidelitySpec()
    kind = {
        "kld": "KLD",
        "rev_kld": "REV_KLD",
        "jsd": "JSD_PAPER",
        "jsd_standard": "JSD_STANDARD",
        "tvd": "TVD",
        "cf": "CLASSICAL_FIDELITY",
        "renyi": "RENYI",
    }.get(name)
    if kind is None:
        raise ConfigError(f"unknown loss {name!r}")
    eps = float(config.get("epsilon", TRAINING_EPSILON))
    alpha = config.get("alpha")
    return ExplicitLossSpec(kind, eps, float(alpha) if alpha is not None else None)


def _shots_from_config(config: ConfigDict) -> int | None:
    shots = config.get("shots", "exact")
    if isinstance(shots, str):
        if shots.lower() in ("exact", "inf", "none"):
            return None
        raise ConfigError(f"bad shots value {shots!r}")
    return int(shots)


def _write_manifest(
    out_dir: Path, experiment: str, seed: int, config: ConfigDict,
    outputs: Sequence[str], started: float, extra: dict | None = None,
) -> None:
    manifest = {
        "experiment": experiment,
        "seed": seed,
        "version": _version(),
        "wall_clock_s": time.perf_counter() - started,
        "config": {k: v for k, v in sorted(config.items())},
        "outputs": list(outputs),
    }
    if extra:
        manifest.update(extra)
    (out_dir / "summary.json").write_text(json.dumps(manifest, indent=2) + "\n")


def _parallel(fn: Callable, tasks: Sequence, threads: int) -> list:
    if threads <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, tasks))


# ---------------------------------------------------------------------------
# runners

def run_dataset_gen(config: ConfigDict, out_dir: Path, threads: int, seed: int) -> list[str]:
    started = time.perf_counter()
    n = int(require(config, "n"))
    dist = _dataset_from_config(config, n, seed)
    out = out_dir / "dataset.csv"
    dist.write_csv(out)
    _write_manifest(out_dir, "dataset-gen", seed, config, [out.name], started,
                    {"support_size": dist.support_size})
    return [out.name]


def run_kld_concentration(config: ConfigDict, out_dir: Path, threads: int, seed: int) -> list[str]:
    started = time.perf_counter()
    n_values = [int(v) for v in as_list(require(config, "n"))]
    shots_values = [int(v) for v in as_list(require(config, "shots"))]
    epsilon = float(config.get("epsilon", CONCENTRATION_EPSILON))
    draws = int(config.get("draws", 200))
    rows = conc.kld_concentration_sweep(n_values, shots_values, epsilon, draws, seed)
    out = out_dir / "kld_concentration.csv"
    lines = [conc.CONCENTRATION_CSV_HEADER]
    for r in rows:
        lines.append(
            f"{r.n},,0,PRODUCT_HAAR,{r.shots},,,{r.fixed_point!r},"
            f"{r.mean!r},{r.variance!r},{r.var_stderr!r},{r.draws},{r.seed}"
        )
    out.write_text("\n".join(lines) + "\n")
    _write_manifest(out_dir, "kld-concentration", seed, config, [out.name], started,
                    {"epsilon": epsilon})
    return [out.name]


def run_variance_sweep(config: ConfigDict, out_dir: Path, threads: int, seed: int) -> list[str]:
    started = time.perf_counter()
    n_values = [int(v) for v in as_list(require(config, "n"))]
    sigma_tokens = as_list(config.get("sigma", [1.0]))
    depth_tokens = as_list(config.get("depth", [0]))
    ansatz = str(config.get("ansatz", "PRODUCT_HAAR")).upper()
    draws = int(config.get("draws", 500))
    shots = _shots_from_config(config)
    grid = [
        (n, sig_tok, dep_tok)
        for n in n_values
        for sig_tok in sigma_tokens
        for dep_tok in depth_tokens
    ]

    def cell(task):
        index, (n, sig_tok, dep_tok) = task
        sigma = resolve_scale(sig_tok, n)
        depth = resolve_depth(dep_tok, n)
        data = _dataset_from_config(config, n, child_seed(seed, 7, index))
        circuit = build_ansatz(ansatz, n, depth)
        from .training import make_loss_evaluator

        evaluator = make_loss_evaluator(MMDLossSpec(KernelSpec.single(sigma)))
        report = conc.empirical_loss_variance(
            evaluator, circuit, data, draws, shots, child_seed(seed, 11, index)
        )
        theory_b = theory_c = None
        if ansatz == "PRODUCT_HAAR" and n <= 20:
            theory_b = conc.b_sigma(n, sigma)
            theory_c = conc.c_sigma(data, n, sigma)
        return conc.VarianceReport(
            n=n, sigma=sigma, depth=depth, ansatz_kind=ansatz,
            theory_B=theory_b, theory_C=theory_c,
            empirical_mean=report.empirical_mean,
            empirical_var=report.empirical_var,
            empirical_stderr=report.empirical_stderr,
            samples_used=report.samples_used, shots=shots, seed=report.seed,
        )

    reports = _parallel(cell, list(enumerate(grid)), threads)
    out = out_dir / "variance_sweep.csv"
    lines = [conc.CONCENTRATION_CSV_HEADER] + [r.csv_row() for r in reports]
    out.write_text("\n".join(lines) + "\n")
    data0 = _dataset_from_config(config, n_values[0], child_seed(seed, 7, 0))
    parity_mass = (
        conc.truncated_parity_mass(data0, 4) if data0.n_bits <= 20 else None
    )
    _write_manifest(out_dir, "variance-sweep", seed, config, [out.name], started,
                    {"parity_mass_k4_first_cell": parity_mass})
    return [out.name]


def run_truncation_demo(config: ConfigDict, out_dir: Path, threads: int, seed: int) -> list[str]:
    started = time.perf_counter()
    sigma = resolve_scale(config.get("sigma", 1.0), 3)
    parity = make_dataset("PARITY3", 3)
    uniform = Distribution.from_dense(np.full(8, 1 / 8), 3)
    exact = mmd_exact(parity, uniform, KernelSpec.single(sigma))
    out = out_dir / "truncation_demo.csv"
    lines = ["n,sigma,k,mmd_truncated,mmd_exact"]
    for k in range(4):
        trunc = mmd_truncated(uniform, parity, sigma, k)
        lines.append(f"3,{sigma!r},{k},{trunc!r},{exact!r}")
    out.write_text("\n".join(lines) + "\n")
    _write_manifest(
        out_dir, "truncation-demo", seed, config, [out.name], started,
        {
            "mmd_truncated_k2": mmd_truncated(uniform, parity, sigma, 2),
            "mmd_exact": exact,
        },
    )
    return [out.name]


def run_mmd_profile(config: ConfigDict, out_dir: Path, threads: int, seed: int) -> list[str]:
    started = time.perf_counter()
    n_values = [int(v) for v in as_list(require(config, "n"))]
    sigma_tokens = as_list(require(config, "sigma"))
    out = out_dir / "mmd_profile.csv"
    lines = ["n,sigma,l,weight"]
    stats = []
    for n in n_values:
        for tok in sigma_tokens:
            sigma = resolve_scale(tok, n)
            profile = conc.weight_profile(n, sigma)
            for level, w in enumerate(profile.weights):
                lines.append(f"{n},{sigma!r},{level},{float(w)!r}")
            stats.append(
                {
                    "n": n,
                    "sigma": sigma,
                    "mean_bodyness": profile.mean_bodyness,
                    "var_bodyness": profile.var_bodyness,
                }
            )
    out.write_text("\n".join(lines) + "\n")
    _write_manifest(out_dir, "mmd-profile", seed, config, [out.name], started,
                    {"bodyness": stats})
    return [out.name]


def run_train(config: ConfigDict, out_dir: Path, threads: int, seed: int) -> list[str]:
    started = time.perf_counter()
    n = int(require(config, "n"))
    depth = resolve_depth(config.get("depth", 0), n)
    circuit = build_ansatz(str(config.get("ansatz", "HEA_LINE")), n, depth)
    data = _dataset_from_config(config, n, child_seed(seed, 3))
    loss = _loss_from_config(config, n)
    opt_kind = str(config.get("optimizer", "adam")).upper()
    opt = OptimizerSpec(
        kind=opt_kind,
        population=int(config["population"]) if "population" in config else None,
        parents=int(config["parents"]) if "parents" in config else None,
        step_size=float(config.get("step_size", 0.5)),
        rank_epsilon=float(config.get("rank_epsilon", 0.0)),
        lr_decay=float(config.get("lr_decay", 0.005)),
    )
    train_config = TrainConfig(
        circuit=circuit,
        loss=loss,
        data=data,
        max_iterations=int(require(config, "iterations")),
        master_seed=seed,
        optimizer=opt,
        shots=_shots_from_config(config),
        k_batch=int(config.get("k_batch", 1)),
        grad_clip=float(config["grad_clip"]) if "grad_clip" in config else None,
        near_identity_init=bool(config.get("near_identity_init", False)),
    )
    record = train(train_config)
    out = out_dir / "train.csv"
    record.write_csv(out)
    finite_tvd = record.tvd_exact[np.isfinite(record.tvd_exact)]
    _write_manifest(
        out_dir, "train", seed, config, [out.name], started,
        {
            "final_tvd": float(record.tvd_exact[-1]) if np.isfinite(record.tvd_exact[-1]) else None,
            "min_tvd": float(finite_tvd.min()) if len(finite_tvd) else None,
            "final_loss": float(record.loss_estimates[-1]),
        },
    )
    return [out.name]


RUNNERS = {
    "dataset-gen": run_dataset_gen,
    "kld-concentration": run_kld_concentration,
    "variance-sweep": run_variance_sweep,
    "truncation-demo": run_truncation_demo,
    "mmd-profile": run_mmd_profile,
    "train": run_train,
}


def run_experiment(
    config: ConfigDict, out_dir: str | Path, threads: int = 1,
    seed_override: int | None = None,
) -> list[str]:
    """Dispatch a parsed config to its runner; returns written file names."""
    experiment = str(config.get("experiment", "")).lower()
    if experiment not in RUNNERS:
        raise ConfigError(
            f"unknown experiment {experiment!r}; choose from {sorted(RUNNERS)}"
        )
    seed = int(seed_override if seed_override is not None else config.get("seed", 0))
    out_path = Path(out_dir)
    out_path.mkdir(parents=True, exist_ok=True)
    return RUNNERS[experiment](config, out_path, threads, seed)


def run(config_path: str | Path, out_dir: str | Path, threads: int = 1,
        seed_override: int | None = None) -> list[str]:
    """Load a config file and run it."""
    return run_experiment(load_config(config_path), out_dir, threads, seed_override)
