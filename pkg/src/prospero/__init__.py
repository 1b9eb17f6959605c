"""Surrogate-guided active-learning design of protein sequences.

The package couples an ensemble surrogate, uncertainty-targeted masking, and
charge-constrained sequential Monte Carlo completion into a budgeted
active-learning loop over black-box fitness oracles.
"""

from .campaign import (
    AblationFlags,
    CampaignConfig,
    CampaignResult,
    run_campaign,
    write_outputs,
)
from .errors import ProsperoError
from .landscapes import (
    FitnessOracle,
    NkLandscape,
    NoisyOracle,
    NoisyOracleConfig,
    NoisyOracleEnsemble,
    TableLandscape,
    seed_dataset,
)
from .masking import MaskingConfig, random_masking, targeted_masking
from .metrics import metrics_report, physicochemical, validity
from .priors import (
    ExternalPrior,
    ProfilePrior,
    SequencePrior,
    UniformPrior,
    fit_profile_prior,
    sequence_perplexity,
)
from .seqs import ALPHABET, MASK, MaskedSequence, hamming, parse_sequence
from .smc import SmcConfig, SmcResult, brute_force_posterior, constrained_smc
from .surrogate import Dataset, SurrogateEnsemble, TrainingConfig, fit, ucb

__version__ = "1.0.0"

__all__ = [
    "ALPHABET",
    "MASK",
    "AblationFlags",
    "CampaignConfig",
    "CampaignResult",
    "Dataset",
    "ExternalPrior",
    "FitnessOracle",
    "MaskedSequence",
    "MaskingConfig",
    "NkLandscape",
    "NoisyOracle",
    "NoisyOracleConfig",
    "NoisyOracleEnsemble",
    "ProfilePrior",
    "ProsperoError",
    "SequencePrior",
    "SmcConfig",
    "SmcResult",
    "SurrogateEnsemble",
    "TableLandscape",
    "TrainingConfig",
    "UniformPrior",
    "brute_force_posterior",
    "constrained_smc",
    "fit",
    "fit_profile_prior",
    "hamming",
    "metrics_report",
    "parse_sequence",
    "physicochemical",
    "random_masking",
    "run_campaign",
    "seed_dataset",
    "sequence_perplexity",
    "targeted_masking",
    "ucb",
    "validity",
    "write_outputs",
]
