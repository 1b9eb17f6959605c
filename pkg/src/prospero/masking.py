"""Choosing which residues of the starting sequence to mask.

Targeted masking runs a batched in-silico alanine scan: random subsets of
positions are substituted with alanine, every variant is scored by the
surrogate's UCB, and the mask sets of the top scorers are kept. Random
masking (the ablation variant) skips the scan entirely.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import LengthMismatch, PositionOutOfRange
from .seqs import MaskedSequence
from .surrogate import ucb


@dataclass
class MaskingConfig:
    batch_b: int = 256
    scans_s: int = 16
    n_min: int | None = None  # resolved per sequence length when None
    n_max: int | None = None
    ucb_k: float = 1.0
    seed: int = 0

    def resolve_bounds(self, length: int) -> tuple[int, int]:
        """Substitution-count bounds: 3-10 for short sequences, 5-15 otherwise."""
        n_min = self.n_min if self.n_min is not None else (3 if length <= 120 else 5)
        n_max = self.n_max if self.n_max is not None else (10 if length <= 120 else 15)
        if not 1 <= n_min <= n_max:
            raise ValueError(f"invalid substitution bounds [{n_min}, {n_max}]")
        if n_max > length:
            raise PositionOutOfRange(f"n_max={n_max} exceeds sequence length {length}")
        return n_min, n_max


def alanine_variant(x_start: str, positions: set[int] | tuple[int, ...]) -> str:
    """Copy of x_start with alanine substituted at the given positions."""
    chars = list(x_start)
    for p in positions:
        if not 0 <= p < len(chars):
            raise PositionOutOfRange(f"position {p} outside 0..{len(chars) - 1}")
        chars[p] = "A"
    return "".join(chars)


def _draw_mask_sets(
    x_start: str, count: int, n_min: int, n_max: int, rng: np.random.Generator
) -> list[tuple[int, ...]]:
    length = len(x_start)
    sets = []
    for _ in range(count):
        n = int(rng.integers(n_min, n_max + 1))
        sets.append(tuple(sorted(rng.choice(length, size=n, replace=False).tolist())))
    return sets


def targeted_masking(
    x_start: str, scorer, cfg: MaskingConfig, rng: np.random.Generator
) -> list[MaskedSequence]:
    """Pick the B most promising mask sets out of B*S scanned variants.

    Ties in UCB score are broken by generation order, so a degenerate scorer
    returns the first B generated mask sets.
    """
    n_min, n_max = cfg.resolve_bounds(len(x_start))
    expected = getattr(scorer, "sequence_length", None)
    if expected is not None and expected != len(x_start):
        raise LengthMismatch(
            f"scorer expects length {expected}, x_start has {len(x_start)}"
        )
    pool = _draw_mask_sets(x_start, cfg.batch_b * cfg.scans_s, n_min, n_max, rng)
    variants = [alanine_variant(x_start, s) for s in pool]
    mu, sigma = scorer.predict_batch(variants)
    scores = ucb(mu, sigma, cfg.ucb_k)
    # stable sort keeps earlier generation index first among equal scores
    top = np.argsort(-scores, kind="stable")[: cfg.batch_b]
    return [MaskedSequence.from_positions(x_start, pool[i]) for i in top]


def random_masking(
    x_start: str, cfg: MaskingConfig, rng: np.random.Generator
) -> list[MaskedSequence]:
    """Ablation variant: B uniformly random mask sets, no surrogate scoring."""
    n_min, n_max = cfg.resolve_bounds(len(x_start))
    pool = _draw_mask_sets(x_start, cfg.batch_b, n_min, n_max, rng)
    return [MaskedSequence.from_positions(x_start, s) for s in pool]
