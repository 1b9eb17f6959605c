"""Command-line front door: campaigns, noise sweeps, ablation suites."""

from __future__ import annotations

import copy
import csv
import dataclasses
import json
import os
import sys
from pathlib import Path

import click
import numpy as np
import yaml

from .campaign import (
    AblationFlags,
    CampaignConfig,
    run_campaign,
    write_outputs,
)
from .errors import ConfigError, ProsperoError
from .landscapes import (
    NkLandscape,
    NoisyOracleEnsemble,
    TableLandscape,
    seed_dataset,
)
from .masking import MaskingConfig
from .metrics import metrics_report
from .priors import ExternalPrior, UniformPrior, fit_profile_prior
from .seqs import ALPHABET, MaskedSequence, parse_sequence
from .smc import SmcConfig
from .surrogate import TrainingConfig

CONFIG_VERSION = 1

DEFAULT_CONFIG = {
    "version": CONFIG_VERSION,
    "seed": 0,
    "output_dir": "runs/out",
    "landscape": {
        "kind": "nk",  # nk | csv
        "length": 50,
        "k_interactions": 2,
        "seed": 0,
        "path": None,
    },
    "initial_dataset": {
        "size": 200,
        "max_mutations": 5,
        "wild_type": None,  # random when null
    },
    "prior": {
        "kind": "profile",  # uniform | profile | external
        "pseudocount": 1.0,
        "command": None,  # external: argv list or shell string
        "host": None,
        "port": None,
    },
    "campaign": {
        "rounds_n": 10,
        "oracle_budget_k": 128,
    },
    "masking": {
        "scans_s": 16,
        "n_min": None,
        "n_max": None,
        "ucb_k": 1.0,
    },
    "smc": {
        "particle_count_b": 256,
        "n_keep": 10,
        "ucb_k": 0.1,
    },
    "surrogate": {
        "learning_rate": 1e-4,
        "l2_penalty": 1e-4,
        "batch_size": 256,
        "max_updates": 3000,
        "validation_fraction": 0.10,
        "patience": 10,
        "hidden_width": 64,
        "ensemble_size": 3,
        "optimizer": "adam",
    },
    "ablation": {
        "use_smc_resampling": True,
        "use_targeted_masking": True,
        "use_raa_constraint": True,
    },
    "noise": {
        "enabled": False,  # replace the surrogate by a noisy-oracle ensemble
        "snr_db": 60.0,
        "members": 3,
    },
}


def _merge_checked(defaults: dict, user: dict, path: str = "") -> dict:
    out = copy.deepcopy(defaults)
    for key, value in user.items():
        here = f"{path}.{key}" if path else key
        if key not in defaults:
            raise ConfigError(f"unknown config key: {here}")
        if isinstance(defaults[key], dict) and defaults[key]:
            if not isinstance(value, dict):
                raise ConfigError(f"{here} must be a mapping")
            out[key] = _merge_checked(defaults[key], value, here)
        else:
            out[key] = value
    return out


def load_config(path: str | None) -> dict:
    user = {}
    if path is not None:
        p = Path(path)
        if not p.exists():
            raise ConfigError(f"config file not found: {path}")
        with open(p) as fh:
            user = yaml.safe_load(fh) or {}
        if not isinstance(user, dict):
            raise ConfigError(f"config root must be a mapping: {path}")
    cfg = _merge_checked(DEFAULT_CONFIG, user)
    if cfg["version"] != CONFIG_VERSION:
        raise ConfigError(f"unsupported config version {cfg['version']}")
    return cfg


def _coerce(current, text: str, key: str):
    if isinstance(current, bool):
        if text.lower() in ("true", "1", "yes"):
            return True
        if text.lower() in ("false", "0", "no"):
            return False
        raise ConfigError(f"{key}: expected a boolean, got {text!r}")
    if isinstance(current, int) and not isinstance(current, bool):
        try:
            return int(text)
        except ValueError as exc:
            raise ConfigError(f"{key}: expected an integer, got {text!r}") from exc
    if isinstance(current, float):
        try:
            return float(text)
        except ValueError as exc:
            raise ConfigError(f"{key}: expected a number, got {text!r}") from exc
    if current is None:
        # untyped slot: parse as YAML scalar
        return yaml.safe_load(text)
    return text


def apply_overrides(cfg: dict, overrides: tuple[str, ...]) -> dict:
    cfg = copy.deepcopy(cfg)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override must look like key=value: {item!r}")
        dotted, text = item.split("=", 1)
        keys = dotted.split(".")
        node = cfg
        for k in keys[:-1]:
            if not isinstance(node, dict) or k not in node:
                raise ConfigError(f"unknown override key: {dotted}")
            node = node[k]
        leaf = keys[-1]
        if not isinstance(node, dict) or leaf not in node:
            raise ConfigError(f"unknown override key: {dotted}")
        node[leaf] = _coerce(node[leaf], text, dotted)
    return cfg


def build_landscape(cfg: dict):
    land = cfg["landscape"]
    if land["kind"] == "nk":
        return NkLandscape(land["length"], land["k_interactions"], land["seed"])
    if land["kind"] == "csv":
        if not land["path"]:
            raise ConfigError("landscape.path required for kind=csv")
        return TableLandscape.from_csv(land["path"])
    raise ConfigError(f"unknown landscape kind {land['kind']!r}")


def build_initial_dataset(cfg: dict, oracle, seed: int):
    init = cfg["initial_dataset"]
    rng = np.random.default_rng([seed, 100])
    if init["wild_type"]:
        x_start = parse_sequence(init["wild_type"])
    else:
        x_start = "".join(
            ALPHABET[i] for i in rng.integers(0, len(ALPHABET), size=oracle.length)
        )
    return seed_dataset(oracle, x_start, init["size"], init["max_mutations"], rng)


def build_prior(cfg: dict, corpus: list[str]):
    pr = cfg["prior"]
    if pr["kind"] == "uniform":
        return UniformPrior()
    if pr["kind"] == "profile":
        return fit_profile_prior(corpus, pr["pseudocount"])
    if pr["kind"] == "external":
        command = pr["command"] or os.environ.get("PROSPERO_PRIOR_CMD")
        if command:
            argv = command if isinstance(command, list) else str(command).split()
            return ExternalPrior(command=argv)
        if pr["host"] and pr["port"]:
            return ExternalPrior(host=pr["host"], port=int(pr["port"]))
        raise ConfigError(
            "external prior needs prior.command, PROSPERO_PRIOR_CMD, or host/port"
        )
    raise ConfigError(f"unknown prior kind {pr['kind']!r}")


def build_campaign_config(cfg: dict) -> CampaignConfig:
    b = cfg["smc"]["particle_count_b"]
    return CampaignConfig(
        rounds_n=cfg["campaign"]["rounds_n"],
        oracle_budget_k=cfg["campaign"]["oracle_budget_k"],
        masking=MaskingConfig(batch_b=b, seed=cfg["seed"], **cfg["masking"]),
        smc=SmcConfig(
            oracle_budget_k=cfg["campaign"]["oracle_budget_k"],
            seed=cfg["seed"],
            **cfg["smc"],
        ),
        surrogate=TrainingConfig(seed=cfg["seed"], **cfg["surrogate"]),
        ablation=AblationFlags(**cfg["ablation"]),
        seed=cfg["seed"],
        output_dir=cfg["output_dir"],
    )


def _scorer_factory_for(cfg: dict, oracle, initial_data):
    if not cfg["noise"]["enabled"]:
        return None
    var0 = float(np.var(initial_data.fitness_array()))
    ensemble = NoisyOracleEnsemble(
        oracle,
        snr_db=cfg["noise"]["snr_db"],
        base_variance=var0,
        seed=cfg["seed"] + 7000,
        members=cfg["noise"]["members"],
    )
    return lambda data, n: ensemble


def _execute_campaign(cfg: dict, output_dir):
    oracle = build_landscape(cfg)
    initial = build_initial_dataset(cfg, oracle, cfg["seed"])
    prior = build_prior(cfg, initial.sequences)
    camp_cfg = build_campaign_config(cfg)
    factory = _scorer_factory_for(cfg, oracle, initial)
    result = run_campaign(camp_cfg, oracle, prior, initial, scorer_factory=factory)
    if output_dir is not None:
        write_outputs(result, camp_cfg, output_dir)
        with open(Path(output_dir) / "config.echo.json", "w") as fh:
            json.dump(cfg, fh, sort_keys=True, indent=2)
            fh.write("\n")
    return result


def _resolved(config_path, seed, out, sets, prior):
    cfg = load_config(config_path)
    cfg = apply_overrides(cfg, tuple(sets))
    if seed is not None:
        cfg["seed"] = seed
    if out is not None:
        cfg["output_dir"] = out
    if prior is not None:
        cfg["prior"]["kind"] = prior
    return cfg


def _common_options(fn):
    fn = click.option("--config", "config_path", default=None, help="YAML config file")(fn)
    fn = click.option("--seed", type=int, default=None)(fn)
    fn = click.option("--out", default=None, help="output directory")(fn)
    fn = click.option("--set", "sets", multiple=True, help="override key=value (repeatable)")(fn)
    fn = click.option(
        "--prior", type=click.Choice(["uniform", "profile", "external"]), default=None
    )(fn)
    return fn


@click.group()
def main():
    """Surrogate-guided sequence design campaigns."""


@main.command()
@_common_options
def run(config_path, seed, out, sets, prior):
    """Run one campaign and write its outputs."""
    try:
        cfg = _resolved(config_path, seed, out, sets, prior)
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(2)
    try:
        result = _execute_campaign(cfg, cfg["output_dir"])
    except ProsperoError as exc:
        click.echo(f"runtime error: {exc}", err=True)
        sys.exit(3)
    click.echo(
        f"done: {result.total_oracle_calls} oracle calls, "
        f"max fitness {result.report['max_fitness']:.6g}"
    )


@main.command("noise-sweep")
@_common_options
@click.option("--snr", "snr_list", default=None, help="comma-separated SNR values in dB")
@click.option("--seeds", "n_seeds", type=int, default=5, help="number of seeds per SNR")
@click.option("--jobs", type=int, default=1, help="reserved; campaigns run sequentially")
def noise_sweep(config_path, seed, out, sets, prior, snr_list, n_seeds, jobs):
    """One campaign per SNR value per seed, surrogate replaced by noisy oracles."""
    try:
        cfg = _resolved(config_path, seed, out, sets, prior)
        if not snr_list:
            raise ConfigError("--snr must list at least one value")
        snrs = [float(s) for s in snr_list.split(",") if s.strip()]
        if not snrs:
            raise ConfigError("--snr must list at least one value")
    except (ConfigError, ValueError) as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(2)
    out_dir = Path(cfg["output_dir"])
    rows = []
    try:
        for snr in snrs:
            for s in range(n_seeds):
                sub = copy.deepcopy(cfg)
                sub["noise"]["enabled"] = True
                sub["noise"]["snr_db"] = snr
                sub["seed"] = cfg["seed"] + s
                result = _execute_campaign(sub, None)
                rows.append((snr, sub["seed"], result.report["max_fitness"]))
    except ProsperoError as exc:
        click.echo(f"runtime error: {exc}", err=True)
        sys.exit(3)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "noise_sweep.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["snr_db", "seed", "max_fitness"])
        writer.writerows(rows)
    click.echo(f"wrote {len(rows)} rows to {out_dir / 'noise_sweep.csv'}")


ABLATION_VARIANTS = {
    "full": AblationFlags(True, True, True),
    "no_smc": AblationFlags(False, True, True),
    "random_mask": AblationFlags(True, False, True),
    "no_smc_random_mask": AblationFlags(False, False, True),
    "no_smc_random_mask_no_raa": AblationFlags(False, False, False),
}


@main.command()
@_common_options
@click.option("--seeds", "n_seeds", type=int, default=5, help="number of seeds per variant")
def ablate(config_path, seed, out, sets, prior, n_seeds):
    """Run the four ablation variants plus the full method over shared seeds."""
    try:
        cfg = _resolved(config_path, seed, out, sets, prior)
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(2)
    out_dir = Path(cfg["output_dir"])
    rows = []
    try:
        for name, flags in ABLATION_VARIANTS.items():
            for s in range(n_seeds):
                sub = copy.deepcopy(cfg)
                sub["seed"] = cfg["seed"] + s
                sub["ablation"] = dataclasses.asdict(flags)
                result = _execute_campaign(sub, None)
                rows.append(
                    (
                        name,
                        sub["seed"],
                        result.report["max_fitness"],
                        flags.use_smc_resampling,
                        flags.use_targeted_masking,
                        flags.use_raa_constraint,
                    )
                )
    except ProsperoError as exc:
        click.echo(f"runtime error: {exc}", err=True)
        sys.exit(3)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "ablation.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["variant", "seed", "max_fitness", "use_smc_resampling",
             "use_targeted_masking", "use_raa_constraint"]
        )
        writer.writerows(rows)
    click.echo(f"wrote {len(rows)} rows to {out_dir / 'ablation.csv'}")


@main.command()
@click.option("--out", required=True, help="existing campaign output directory")
def report(out):
    """Regenerate report.json from a campaign's dataset.csv and trace.jsonl."""
    out_dir = Path(out)
    dataset_path = out_dir / "dataset.csv"
    trace_path = out_dir / "trace.jsonl"
    if not dataset_path.exists() or not trace_path.exists():
        click.echo(f"config error: {out} is not a campaign output directory", err=True)
        sys.exit(2)
    records = []
    with open(dataset_path, newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            records.append((row["sequence"], float(row["fitness"]), int(row["round"])))
    with open(trace_path) as fh:
        first = json.loads(fh.readline())
    x_start = first["x_start"]
    generated = [(s, y) for s, y, r in records if r > 0]
    pool = generated or [(s, y) for s, y, _ in records]
    rep = metrics_report(pool, x_start)
    rep["metrics_over_initial"] = not generated
    rep["total_oracle_calls"] = len(generated)
    with open(out_dir / "report.json", "w") as fh:
        json.dump(rep, fh, sort_keys=True, indent=2)
        fh.write("\n")
    click.echo(f"report regenerated for {out}")


@main.command("protocol-check")
@_common_options
@click.option("--queries", type=int, default=1000, help="number of fuzz queries")
def protocol_check(config_path, seed, out, sets, prior, queries):
    """Fuzz an external prior over the wire protocol and validate responses."""
    try:
        cfg = _resolved(config_path, seed, out, sets, prior)
        cfg["prior"]["kind"] = "external"
        ext = build_prior(cfg, [])
    except (ConfigError, ProsperoError) as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(2)
    length = cfg["landscape"]["length"]
    rng = np.random.default_rng(cfg["seed"])
    try:
        for _ in range(queries):
            n_masked = int(rng.integers(1, max(2, length // 2)))
            positions = rng.choice(length, size=n_masked, replace=False)
            base = "".join(ALPHABET[i] for i in rng.integers(0, len(ALPHABET), size=length))
            masked = MaskedSequence.from_positions(base, tuple(int(p) for p in positions))
            pos = int(positions[int(rng.integers(0, n_masked))])
            ext.conditional_logprobs(masked, pos)  # validator raises on any violation
    except ProsperoError as exc:
        click.echo(f"protocol violation: {exc}", err=True)
        sys.exit(3)
    finally:
        if hasattr(ext, "close"):
            ext.close()
    click.echo(f"{queries} queries validated, zero protocol violations")


if __name__ == "__main__":
    main()
