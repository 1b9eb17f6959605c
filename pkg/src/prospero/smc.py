"""Charge-constrained Sequential Monte Carlo over masked sequences.

A population of particles progressively unmasks its sequences in permutation
order. Each step: incomplete particles propose one residue restricted to the
wild-type charge class, every particle is rolled out to a full sequence,
scored by the surrogate's UCB, weighted by score times inverse perplexity of
the unconstrained prior, and the population is multinomially resampled.
Rollouts from the last ``n_keep`` steps feed the candidate buffer; the top-K
unique sequences by score are returned for oracle evaluation.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import EnumerationTooLarge, LengthMismatch
from .priors import SequencePrior, constrained_probs, log_normalize
from .seqs import (
    ALPHABET,
    AA_INDEX,
    MASK,
    ChargeClass,
    MaskedSequence,
    build_permutation,
    charge_class,
    charge_class_members,
)
from .surrogate import ucb

WEIGHT_FLOOR = 1e-12


@dataclass
class SmcConfig:
    particle_count_b: int = 256
    oracle_budget_k: int = 128
    n_keep: int = 10
    ucb_k: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.particle_count_b < 2 or self.n_keep < 1 or self.oracle_budget_k < 1:
            raise ValueError("need B >= 2, n_keep >= 1, K >= 1")


@dataclass
class Particle:
    """SMC state: partially unmasked slots plus sampling bookkeeping."""

    slots: list[str]
    mask_order: tuple[int, ...]  # masked positions in permutation order
    classes: tuple[ChargeClass, ...]  # wild-type charge class per masked position
    ll: float = 0.0  # accumulated unconstrained log-likelihood
    filled: int = 0
    cached_score: float | None = None  # UCB score once the particle is complete
    cached_invppl: float | None = None

    @property
    def mask_budget(self) -> int:
        return len(self.mask_order)

    @property
    def is_complete(self) -> bool:
        return self.filled >= self.mask_budget

    def clone(self) -> "Particle":
        return Particle(
            slots=list(self.slots),
            mask_order=self.mask_order,
            classes=self.classes,
            ll=self.ll,
            filled=self.filled,
            cached_score=self.cached_score,
            cached_invppl=self.cached_invppl,
        )


@dataclass
class RolloutRecord:
    sequence: str
    score: float
    step: int


@dataclass
class SmcResult:
    candidates: list[RolloutRecord]
    final_population: list[str]
    zero_mass_fallbacks: int = 0


def _child_rng(seed: int, *keys: int) -> np.random.Generator:
    return np.random.default_rng([seed, *keys])


class _PriorTables:
    """Per-position proposal tables; cached for context-free priors."""

    def __init__(self, prior: SequencePrior, constrain: bool):
        self.prior = prior
        self.constrain = constrain
        self._cache: dict[tuple[int, ChargeClass], tuple[str, np.ndarray, np.ndarray]] = {}

    def tables(self, particle: Particle, pos: int, cls: ChargeClass):
        """(support residues, proposal probs over support, base logprob row)."""
        key = (pos, cls)
        if self.prior.context_free and key in self._cache:
            return self._cache[key]
        if self.prior.context_free:
            base = self.prior.logprob_row(pos)
        else:
            masked = MaskedSequence(
                slots="".join(particle.slots),
                mask_set=tuple(i for i, ch in enumerate(particle.slots) if ch == MASK),
            )
            base = self.prior.conditional_logprobs(masked, pos)
        if self.constrain:
            probs, fallback = constrained_probs(base, cls)
            if fallback:
                self.prior.zero_mass_fallbacks += 1
            support = charge_class_members(cls)
        else:
            probs = np.exp(log_normalize(base))
            support = ALPHABET
        out = (support, probs, base)
        if self.prior.context_free:
            self._cache[key] = out
        return out


def _propose(particle: Particle, tables: _PriorTables, rng: np.random.Generator) -> None:
    """Fill the particle's next masked position in place."""
    pos = particle.mask_order[particle.filled]
    cls = particle.classes[particle.filled]
    support, probs, base = tables.tables(particle, pos, cls)
    residue = support[rng.choice(len(support), p=probs)]
    particle.slots[pos] = residue
    particle.ll += float(base[AA_INDEX[residue]])
    particle.filled += 1
    particle.cached_score = None
    particle.cached_invppl = None


def rollout(
    particles: list[Particle],
    prior: SequencePrior,
    rng_for,
    constrain: bool = True,
) -> list[tuple[str, float]]:
    """Speculatively complete each particle's remaining masked positions.

    The originals are not modified. ``rng_for(i)`` supplies the random stream
    for particle i; the log-likelihood increments use the unconstrained prior.
    """
    tables = _PriorTables(prior, constrain)
    out = []
    for i, p in enumerate(particles):
        if p.is_complete:
            out.append(("".join(p.slots), p.ll))
            continue
        spec = p.clone()
        rng = rng_for(i)
        while not spec.is_complete:
            _propose(spec, tables, rng)
        out.append(("".join(spec.slots), spec.ll))
    return out


def smc_weights(
    scores: np.ndarray, lls: np.ndarray, mask_budgets: np.ndarray
) -> np.ndarray:
    """Normalized importance weights: clamped score times inverse perplexity."""
    scores = np.asarray(scores, dtype=float)
    lls = np.asarray(lls, dtype=float)
    budgets = np.asarray(mask_budgets, dtype=float)
    inv_ppl = np.where(budgets > 0, np.exp(lls / np.maximum(budgets, 1.0)), 1.0)
    raw = np.maximum(scores, WEIGHT_FLOOR) * inv_ppl
    total = raw.sum()
    if total <= 0.0 or not np.isfinite(total):
        warnings.warn("all SMC weights vanished; falling back to uniform", stacklevel=2)
        return np.full(len(raw), 1.0 / len(raw))
    return raw / total


def resample(
    particles: list[Particle], weights: np.ndarray, rng: np.random.Generator
) -> list[Particle]:
    """Multinomial resampling; clones carry full ancestor state."""
    idx = rng.choice(len(particles), size=len(particles), p=weights)
    return [particles[j].clone() for j in idx]


def _select_candidates(
    buffer: list[RolloutRecord], k: int, exclude: set[str] | None
) -> list[RolloutRecord]:
    best: dict[str, RolloutRecord] = {}
    for rec in buffer:
        if exclude and rec.sequence in exclude:
            continue
        kept = best.get(rec.sequence)
        if kept is None or rec.score > kept.score:
            best[rec.sequence] = rec
    ranked = sorted(best.values(), key=lambda r: -r.score)
    if len(ranked) < k:
        warnings.warn(
            f"candidate buffer holds {len(ranked)} unique sequences, fewer than K={k}",
            stacklevel=2,
        )
    return ranked[:k]


def constrained_smc(
    batch: list[MaskedSequence],
    wild_type: str,
    prior: SequencePrior,
    scorer,
    cfg: SmcConfig,
    constrain: bool = True,
    resample_steps: bool = True,
    exclude: set[str] | None = None,
    trace_file=None,
) -> SmcResult:
    """Run the full propose / rollout / weight / resample loop.

    ``scorer`` is anything with ``predict_batch``; ``constrain=False`` lifts
    the charge-class restriction and ``resample_steps=False`` omits
    resampling (ablation variants). Returns the top-K unique candidates from
    the rollout buffer plus the final particle population.
    """
    if len(batch) != cfg.particle_count_b:
        raise LengthMismatch(
            f"batch size {len(batch)} != configured particle count {cfg.particle_count_b}"
        )
    particles: list[Particle] = []
    for masked in batch:
        if len(masked) != len(wild_type):
            raise LengthMismatch("masked sequence length differs from wild type")
        perm = build_permutation(masked, wild_type)
        order = perm.masked_order
        classes = tuple(charge_class(wild_type[p]) for p in order)
        particles.append(Particle(slots=list(masked.slots), mask_order=order, classes=classes))

    horizon = max((p.mask_budget for p in particles), default=0)
    fallbacks_before = prior.zero_mass_fallbacks
    buffer: list[RolloutRecord] = []

    if horizon == 0:
        seqs = ["".join(p.slots) for p in particles]
        mu, sigma = scorer.predict_batch(seqs)
        scores = ucb(mu, sigma, cfg.ucb_k)
        buffer = [RolloutRecord(s, float(y), 0) for s, y in zip(seqs, scores)]
        return SmcResult(
            candidates=_select_candidates(buffer, cfg.oracle_budget_k, exclude),
            final_population=seqs,
        )

    tables = _PriorTables(prior, constrain)
    for t in range(1, horizon + 1):
        proposed_now = []
        for i, p in enumerate(particles):
            if not p.is_complete:
                _propose(p, tables, _child_rng(cfg.seed, t, i, 0))
                proposed_now.append(i)
            elif t == 1 and p.mask_budget == 0:
                # complete-from-start particles never propose; make sure their
                # sequence still reaches the buffer
                proposed_now.append(i)

        rollouts = rollout(
            particles,
            prior,
            lambda i, t=t: _child_rng(cfg.seed, t, i, 1),
            constrain=constrain,
        )
        need_scoring = [i for i, p in enumerate(particles) if p.cached_score is None]
        need_set = set(need_scoring)
        if need_scoring:
            mu, sigma = scorer.predict_batch([rollouts[i][0] for i in need_scoring])
            fresh = ucb(mu, sigma, cfg.ucb_k)
        scores = np.empty(len(particles))
        lls = np.empty(len(particles))
        for rank, i in enumerate(need_scoring):
            scores[i] = fresh[rank]
            lls[i] = rollouts[i][1]
            if particles[i].is_complete:
                particles[i].cached_score = float(fresh[rank])
                particles[i].cached_invppl = float(
                    math.exp(lls[i] / particles[i].mask_budget)
                    if particles[i].mask_budget
                    else 1.0
                )
        for i, p in enumerate(particles):
            if i not in need_set:
                scores[i] = p.cached_score
                lls[i] = p.ll

        if horizon - t < cfg.n_keep:
            for i in proposed_now:
                buffer.append(RolloutRecord(rollouts[i][0], float(scores[i]), t))

        budgets = np.array([max(p.mask_budget, 1) for p in particles])
        weights = smc_weights(scores, lls, budgets)
        assert abs(weights.sum() - 1.0) < 1e-9

        if trace_file is not None:
            ess = 1.0 / float(np.sum(weights**2))
            entropy = float(-np.sum(weights * np.log(np.maximum(weights, 1e-300))))
            trace_file.write(
                json.dumps(
                    {
                        "step": t,
                        "ess": ess,
                        "top_score": float(scores.max()),
                        "weight_entropy": entropy,
                    }
                )
                + "\n"
            )

        if resample_steps:
            particles = resample(particles, weights, _child_rng(cfg.seed, t, 1 << 20))

    final_population = ["".join(p.slots) for p in particles]
    return SmcResult(
        candidates=_select_candidates(buffer, cfg.oracle_budget_k, exclude),
        final_population=final_population,
        zero_mass_fallbacks=prior.zero_mass_fallbacks - fallbacks_before,
    )


def brute_force_posterior(
    score_fn,
    prior: SequencePrior,
    masked: MaskedSequence,
    wild_type: str,
    constrain: bool = True,
    max_enumeration: int = 1_000_000,
) -> tuple[dict[str, float], float]:
    """Exact target distribution over charge-admissible completions.

    Enumerates every completion, weighing each by score times the product of
    constrained conditionals along the sampling permutation. Returns the
    normalized distribution and the normalizer Z.
    """
    perm = build_permutation(masked, wild_type)
    order = perm.masked_order
    supports = []
    total = 1
    for pos in order:
        cls = charge_class(wild_type[pos])
        supports.append(charge_class_members(cls) if constrain else ALPHABET)
        total *= len(supports[-1])
        if total > max_enumeration:
            raise EnumerationTooLarge(f"completion space exceeds {max_enumeration}")

    dist: dict[str, float] = {}

    def recurse(state: MaskedSequence, depth: int, log_p: float):
        if depth == len(order):
            seq = state.to_sequence()
            dist[seq] = dist.get(seq, 0.0) + float(score_fn(seq)) * math.exp(log_p)
            return
        pos = order[depth]
        base = prior.conditional_logprobs(state, pos)
        cls = charge_class(wild_type[pos])
        if constrain:
            probs, _ = constrained_probs(base, cls)
        else:
            probs = np.exp(log_normalize(base))
        for residue, p in zip(supports[depth], probs):
            if p == 0.0:
                continue
            recurse(state.fill(pos, residue), depth + 1, log_p + math.log(p))

    recurse(masked, 0, 0.0)
    z = sum(dist.values())
    if z <= 0.0:
        raise ValueError("normalizer is zero; score function must be positive somewhere")
    return {s: v / z for s, v in dist.items()}, z
