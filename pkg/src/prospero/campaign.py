"""The outer active-learning loop and its persistence.

Each round: fit (or otherwise obtain) the surrogate, pick the best known
sequence as the starting point, choose mask sets, complete them with
charge-constrained SMC, evaluate up to K fresh candidates with the oracle and
grow the dataset. Ablation flags switch off resampling, targeted masking, or
the charge constraint independently.
"""

from __future__ import annotations

import csv
import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import BudgetExceeded
from .landscapes import FitnessOracle
from .masking import MaskingConfig, random_masking, targeted_masking
from .metrics import metrics_report
from .priors import SequencePrior
from .smc import SmcConfig, constrained_smc
from .surrogate import Dataset, TrainingConfig, fit


@dataclass
class AblationFlags:
    use_smc_resampling: bool = True
    use_targeted_masking: bool = True
    use_raa_constraint: bool = True


@dataclass
class CampaignConfig:
    rounds_n: int = 10
    oracle_budget_k: int = 128
    masking: MaskingConfig = field(default_factory=MaskingConfig)
    smc: SmcConfig = field(default_factory=SmcConfig)
    surrogate: TrainingConfig = field(default_factory=TrainingConfig)
    ablation: AblationFlags = field(default_factory=AblationFlags)
    seed: int = 0
    output_dir: str | None = None

    def __post_init__(self):
        if self.rounds_n < 0 or self.oracle_budget_k < 1:
            raise ValueError("rounds_n >= 0 and oracle_budget_k >= 1 required")
        # the mask batch feeds the particle population one-to-one
        if self.masking.batch_b != self.smc.particle_count_b:
            raise ValueError("masking.batch_b must equal smc.particle_count_b")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass
class RoundTrace:
    round: int
    x_start: str
    x_start_fitness: float
    candidates: list[dict]
    best_so_far: float
    oracle_calls_cumulative: int

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass
class CampaignResult:
    rounds: list[RoundTrace]
    dataset: Dataset
    report: dict
    total_oracle_calls: int


def _derive_seed(*keys: int) -> int:
    return int(np.random.SeedSequence(entropy=list(keys)).generate_state(1)[0])


def run_campaign(
    cfg: CampaignConfig,
    oracle: FitnessOracle,
    prior: SequencePrior,
    initial_data: Dataset,
    scorer_factory=None,
) -> CampaignResult:
    """Run N active-learning rounds under a strict oracle budget.

    ``scorer_factory(dataset, round_index)`` overrides surrogate training;
    the noise-robustness protocol passes a factory returning the
    noisy-oracle ensemble.
    """
    if len(initial_data) == 0:
        raise ValueError("initial dataset must be non-empty")
    data = Dataset(
        sequences=list(initial_data.sequences),
        fitness=list(initial_data.fitness),
        rounds=list(initial_data.rounds),
    )
    start_calls = oracle.query_count
    budget = cfg.rounds_n * cfg.oracle_budget_k
    rounds: list[RoundTrace] = []

    for n in range(1, cfg.rounds_n + 1):
        if scorer_factory is not None:
            scorer = scorer_factory(data, n)
        else:
            train_cfg = dataclasses.replace(
                cfg.surrogate, seed=_derive_seed(cfg.seed, n, 2)
            )
            scorer = fit(data, train_cfg)

        x_start, x_start_fitness = data.best()

        mask_rng = np.random.default_rng([cfg.seed, n, 4])
        if cfg.ablation.use_targeted_masking:
            masks = targeted_masking(x_start, scorer, cfg.masking, mask_rng)
        else:
            masks = random_masking(x_start, cfg.masking, mask_rng)

        smc_cfg = dataclasses.replace(
            cfg.smc,
            oracle_budget_k=cfg.oracle_budget_k,
            seed=_derive_seed(cfg.seed, n, 3),
        )
        result = constrained_smc(
            masks,
            x_start,
            prior,
            scorer,
            smc_cfg,
            constrain=cfg.ablation.use_raa_constraint,
            resample_steps=cfg.ablation.use_smc_resampling,
            exclude=set(data.sequences),
        )

        candidates = result.candidates[: cfg.oracle_budget_k]
        new_seqs = [c.sequence for c in candidates]
        if oracle.query_count - start_calls + len(new_seqs) > budget:
            raise BudgetExceeded("candidate batch would exceed the oracle budget")
        values = oracle.evaluate_batch(new_seqs) if new_seqs else np.zeros(0)
        for cand, y in zip(candidates, values):
            data.add(cand.sequence, float(y), round_added=n)

        rounds.append(
            RoundTrace(
                round=n,
                x_start=x_start,
                x_start_fitness=float(x_start_fitness),
                candidates=[
                    {"sequence": c.sequence, "score": c.score, "fitness": float(y)}
                    for c, y in zip(candidates, values)
                ],
                best_so_far=float(max(data.fitness)),
                oracle_calls_cumulative=oracle.query_count - start_calls,
            )
        )

    total_calls = oracle.query_count - start_calls
    if total_calls > budget:
        raise BudgetExceeded(f"{total_calls} oracle calls exceed budget {budget}")

    x_start0 = initial_data.best()[0]
    generated = [
        (s, y) for s, y, r in zip(data.sequences, data.fitness, data.rounds) if r > 0
    ]
    if generated:
        report = metrics_report(generated, x_start0)
        report["metrics_over_initial"] = False
    else:
        report = metrics_report(list(zip(data.sequences, data.fitness)), x_start0)
        report["metrics_over_initial"] = True
    report["total_oracle_calls"] = total_calls

    return CampaignResult(
        rounds=rounds, dataset=data, report=report, total_oracle_calls=total_calls
    )


def write_outputs(result: CampaignResult, cfg: CampaignConfig, output_dir) -> None:
    """Persist trace.jsonl, dataset.csv, report.json and config.echo.json."""
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "trace.jsonl", "w") as fh:
        for rt in result.rounds:
            fh.write(json.dumps(rt.to_dict(), sort_keys=True) + "\n")
    with open(out / "dataset.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sequence", "fitness", "round"])
        for seq, y, r in zip(
            result.dataset.sequences, result.dataset.fitness, result.dataset.rounds
        ):
            writer.writerow([seq, repr(y), r])
    with open(out / "report.json", "w") as fh:
        json.dump(result.report, fh, sort_keys=True, indent=2)
        fh.write("\n")
    with open(out / "config.echo.json", "w") as fh:
        json.dump(cfg.to_dict(), fh, sort_keys=True, indent=2)
        fh.write("\n")
