"""Command-line experiment runner.

Exit codes: 0 success, 1 config error, 2 budget guard, 3 numeric failure.
All randomness flows from a single seed (config key or --seed override).
"""
from __future__ import annotations

import os
import sys
from pathlib import Path

import click

from .config import load_config
from .errors import BudgetExceededError, ConfigError, NumericError
from .experiments import run_experiment

EXIT_CONFIG = 1
EXIT_BUDGET = 2
EXIT_NUMERIC = 3


def _execute(config: dict, out: str, threads: int | None, seed: int | None) -> None:
    threads = threads if threads is not None else (os.cpu_count() or 1)
    try:
        outputs = run_experiment(config, out, threads=threads, seed_override=seed)
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    except BudgetExceededError as exc:
        click.echo(f"budget guard: {exc}", err=True)
        sys.exit(EXIT_BUDGET)
    except (NumericError, FloatingPointError, ZeroDivisionError) as exc:
        click.echo(f"numeric failure: {exc}", err=True)
        sys.exit(EXIT_NUMERIC)
    for name in outputs:
        click.echo(str(Path(out) / name))


def _load(config_path: str | None, overrides: dict) -> dict:
    try:
        config = load_config(config_path) if config_path else {}
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    config.update({k: v for k, v in overrides.items() if v is not None and v != ()})
    return config


out_option = click.option("--out", default="out", show_default=True,
                          help="Output directory for CSVs and summary.json.")
seed_option = click.option("--seed", type=int, default=None,
                           help="Master seed (overrides the config value).")
threads_option = click.option("--threads", type=int, default=None,
                              help="Worker threads for sweep grids [default: machine parallelism].")
config_option = click.option("--config", "config_path", type=str, default=None,
                             help="Flat key = value config file.")


@click.group()
def main() -> None:
    """Born machine training and loss-concentration experiments."""


@main.command("run")
@config_option
@out_option
@seed_option
@threads_option
def run_cmd(config_path: str | None, out: str, seed: int | None, threads: int | None) -> None:
    """Run the experiment named by the config's `experiment` key."""
    if config_path is None:
        click.echo("config error: run requires --config", err=True)
        sys.exit(EXIT_CONFIG)
    _execute(_load(config_path, {}), out, threads, seed)


@main.group("dataset")
def dataset_group() -> None:
    """Dataset utilities."""


@dataset_group.command("gen")
@click.option("--kind", required=True, help="ghz | random_k | cardinality | parity3 | point_zero | file")
@click.option("--n", type=int, required=True)
@click.option("--k", type=int, default=None, help="Support size for random_k.")
@click.option("--dataset-file", type=str, default=None, help="Image grid file for kind=file.")
@out_option
@seed_option
def dataset_gen(kind: str, n: int, k: int | None, dataset_file: str | None,
                out: str, seed: int | None) -> None:
    """Write a benchmark dataset as a bitstring,probability CSV."""
    config = {"experiment": "dataset-gen", "dataset": kind, "n": n}
    if k is not None:
        config["dataset_k"] = k
    if dataset_file is not None:
        config["dataset_file"] = dataset_file
    _execute(config, out, 1, seed)


@main.command("kld-concentration")
@config_option
@out_option
@seed_option
@threads_option
def kld_concentration(config_path, out, seed, threads) -> None:
    """Finite-shot KLD mean/variance sweep over (n, shots)."""
    config = _load(config_path, {})
    config["experiment"] = "kld-concentration"
    _execute(config, out, threads, seed)


@main.command("variance-sweep")
@config_option
@out_option
@seed_option
@threads_option
def variance_sweep(config_path, out, seed, threads) -> None:
    """Empirical (and closed-form, where available) MMD variance over a grid."""
    config = _load(config_path, {})
    config["experiment"] = "variance-sweep"
    _execute(config, out, threads, seed)


@main.command("truncation-demo")
@click.option("--sigma", type=float, default=1.0, show_default=True)
@out_option
@seed_option
def truncation_demo(sigma: float, out: str, seed: int | None) -> None:
    """Unfaithfulness counterexample: truncated vs exact MMD on parity data."""
    _execute({"experiment": "truncation-demo", "sigma": sigma}, out, 1, seed)


@main.command("mmd-profile")
@click.option("--n", "n_values", type=int, multiple=True, required=True)
@click.option("--sigma", "sigma_values", type=str, multiple=True, required=True,
              help="Bandwidth; numbers or tokens like n/4.")
@out_option
@seed_option
def mmd_profile(n_values, sigma_values, out, seed) -> None:
    """Bodyness weight tables of the MMD observable."""
    config = {
        "experiment": "mmd-profile",
        "n": list(n_values),
        "sigma": list(sigma_values),
    }
    _execute(config, out, 1, seed)


@main.command("train")
@config_option
@out_option
@seed_option
@threads_option
def train_cmd(config_path, out, seed, threads) -> None:
    """Train a Born machine per the config; writes the iteration trace CSV."""
    config = _load(config_path, {})
    config["experiment"] = "train"
    _execute(config, out, threads, seed)


if __name__ == "__main__":
    main()
