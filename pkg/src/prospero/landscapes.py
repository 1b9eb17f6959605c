"""Ground-truth fitness oracles with query accounting.

Synthetic NK landscapes (k=0 reduces to a purely additive landscape),
exact-lookup table landscapes read from CSV, the SNR-parameterized noisy
wrapper used in robustness studies, and initial-dataset generation.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    ExhaustedSpace,
    InvalidK,
    NegativeVariance,
    ParseError,
    UnknownSequence,
)
from .seqs import ALPHABET, ALPHABET_SIZE, encode_indices, parse_sequence
from .surrogate import Dataset

_MAX_TABLE_CELLS = 50_000_000


class FitnessOracle:
    """Black-box scorer; every evaluate call increments the query counter."""

    def __init__(self, length: int):
        self.length = length
        self.query_count = 0

    def raw_fitness(self, seq: str) -> float:  # pragma: no cover - abstract
        raise NotImplementedError

    def raw_batch(self, seqs: list[str]) -> np.ndarray:
        return np.array([self.raw_fitness(s) for s in seqs])

    def evaluate(self, seq: str) -> float:
        self.query_count += 1
        return self.raw_fitness(seq)

    def evaluate_batch(self, seqs: list[str]) -> np.ndarray:
        self.query_count += len(seqs)
        return self.raw_batch(seqs)


class NkLandscape(FitnessOracle):
    """Rugged synthetic landscape: each site's contribution depends on the
    site itself plus k random neighbor sites; fitness is the mean contribution."""

    def __init__(self, length: int, k_interactions: int, seed: int):
        if not 0 <= k_interactions < length:
            raise InvalidK(f"k must satisfy 0 <= k < L, got k={k_interactions}, L={length}")
        if length * ALPHABET_SIZE ** (k_interactions + 1) > _MAX_TABLE_CELLS:
            raise InvalidK("contribution tables would exceed the memory guard")
        super().__init__(length)
        self.k_interactions = k_interactions
        self.seed = seed
        rng = np.random.default_rng(seed)
        # per-site neighborhood: the site itself plus k others, no replacement
        self.neighbors = np.empty((length, k_interactions + 1), dtype=np.int64)
        for site in range(length):
            others = np.delete(np.arange(length), site)
            picked = rng.choice(others, size=k_interactions, replace=False)
            self.neighbors[site] = np.concatenate(([site], picked))
        self.tables = rng.random((length, ALPHABET_SIZE ** (k_interactions + 1)))
        self._powers = ALPHABET_SIZE ** np.arange(k_interactions + 1)

    def raw_fitness(self, seq: str) -> float:
        return float(self.raw_batch([seq])[0])

    def raw_batch(self, seqs: list[str]) -> np.ndarray:
        codes = np.stack([encode_indices(s) for s in seqs])  # (n, L)
        acc = np.zeros(codes.shape[0])
        for site in range(self.length):
            idx = codes[:, self.neighbors[site]] @ self._powers
            acc += self.tables[site, idx]
        return acc / self.length

    def optimum(self) -> tuple[str, float]:
        """Exact global optimum; only tractable for the additive case k=0."""
        if self.k_interactions != 0:
            raise InvalidK("exact optimum is only computed for k=0")
        best_idx = self.tables.argmax(axis=1)
        seq = "".join(ALPHABET[i] for i in best_idx)
        return seq, float(self.tables.max(axis=1).mean())

    def to_json(self) -> dict:
        return {
            "kind": "nk",
            "length": self.length,
            "k_interactions": self.k_interactions,
            "seed": self.seed,
        }

    @classmethod
    def from_json(cls, d: dict) -> "NkLandscape":
        return cls(d["length"], d["k_interactions"], d["seed"])


class TableLandscape(FitnessOracle):
    """Exact lookup oracle; unknown sequences are an error, never zero."""

    def __init__(self, table: dict[str, float]):
        if not table:
            raise ParseError("empty landscape table")
        lengths = {len(s) for s in table}
        if len(lengths) != 1:
            raise ParseError("table sequences must share one length")
        super().__init__(lengths.pop())
        self.table = table

    @classmethod
    def from_csv(cls, path) -> "TableLandscape":
        table: dict[str, float] = {}
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or [h.strip() for h in header[:2]] != ["sequence", "fitness"]:
                raise ParseError(f"{path}: expected header 'sequence,fitness'")
            for lineno, row in enumerate(reader, start=2):
                if not row:
                    continue
                if len(row) < 2:
                    raise ParseError(f"{path}:{lineno}: need sequence and fitness columns")
                seq = parse_sequence(row[0].strip())
                try:
                    y = float(row[1])
                except ValueError as exc:
                    raise ParseError(f"{path}:{lineno}: bad fitness {row[1]!r}") from exc
                if seq in table and table[seq] != y:
                    raise ParseError(f"{path}:{lineno}: duplicate sequence with conflicting fitness")
                table[seq] = y
        return cls(table)

    def raw_fitness(self, seq: str) -> float:
        try:
            return self.table[seq]
        except KeyError:
            raise UnknownSequence(seq) from None


@dataclass
class NoisyOracleConfig:
    snr_db: float
    base_variance: float
    seed: int = 0

    @property
    def sigma(self) -> float:
        if self.base_variance < 0:
            raise NegativeVariance(f"variance {self.base_variance} < 0")
        return math.sqrt(self.base_variance * 10 ** (-self.snr_db / 10.0))


class NoisyOracle(FitnessOracle):
    """Gaussian-perturbed view of a deterministic base oracle, truncated at 0.

    Noise is drawn from a seeded stream in query order; base oracle queries
    made through this wrapper do not touch the base oracle's own counter.
    """

    def __init__(self, base: FitnessOracle, cfg: NoisyOracleConfig):
        super().__init__(base.length)
        self.base = base
        self.cfg = cfg
        self.sigma = cfg.sigma
        self._rng = np.random.default_rng(cfg.seed)

    def raw_fitness(self, seq: str) -> float:
        return float(self.raw_batch([seq])[0])

    def raw_batch(self, seqs: list[str]) -> np.ndarray:
        clean = self.base.raw_batch(seqs)
        noisy = clean + self._rng.normal(0.0, self.sigma, size=len(seqs))
        return np.maximum(noisy, 0.0)


def noisy_oracle(base: FitnessOracle, cfg: NoisyOracleConfig) -> NoisyOracle:
    return NoisyOracle(base, cfg)


class NoisyOracleEnsemble:
    """Surrogate stand-in built from independently-noised oracle copies.

    Implements the same ``predict_batch`` contract as the trained ensemble:
    mean and population std across members. Used when studying robustness to
    surrogate misspecification; its queries never consume campaign budget.
    """

    def __init__(self, base: FitnessOracle, snr_db: float, base_variance: float, seed: int, members: int = 3):
        self.members = [
            NoisyOracle(base, NoisyOracleConfig(snr_db, base_variance, seed=seed + j))
            for j in range(members)
        ]
        self.sequence_length = base.length

    def predict_batch(self, seqs: list[str]) -> tuple[np.ndarray, np.ndarray]:
        if not seqs:
            return np.zeros(0), np.zeros(0)
        preds = np.stack([m.raw_batch(seqs) for m in self.members])
        return preds.mean(axis=0), preds.std(axis=0)

    def predict(self, seq: str) -> tuple[float, float]:
        mu, sigma = self.predict_batch([seq])
        return float(mu[0]), float(sigma[0])


def seed_dataset(
    oracle: FitnessOracle,
    x_start: str,
    size_m: int,
    max_mutations: int,
    rng: np.random.Generator,
) -> Dataset:
    """x_start plus size_m - 1 distinct random mutants, labelled by the oracle.

    These oracle calls model the pre-existing dataset and are excluded from
    campaign budget accounting (the campaign measures the counter delta from
    its own start).
    """
    if size_m < 1:
        raise ValueError("size_m must be >= 1")
    length = len(x_start)
    seqs = [x_start]
    seen = {x_start}
    attempts = 0
    while len(seqs) < size_m:
        attempts += 1
        if attempts > 200 * size_m:
            raise ExhaustedSpace(f"could not find {size_m} distinct mutants")
        n = int(rng.integers(1, max_mutations + 1))
        positions = rng.choice(length, size=n, replace=False)
        chars = list(x_start)
        for p in positions:
            options = [aa for aa in ALPHABET if aa != chars[p]]
            chars[p] = options[int(rng.integers(0, len(options)))]
        mutant = "".join(chars)
        if mutant not in seen:
            seen.add(mutant)
            seqs.append(mutant)
    values = oracle.evaluate_batch(seqs)
    data = Dataset()
    for seq, y in zip(seqs, values):
        data.add(seq, float(y), round_added=0)
    return data


def landscape_from_json(d: dict) -> FitnessOracle:
    if d.get("kind") == "nk":
        return NkLandscape.from_json(d)
    raise ParseError(f"unknown landscape kind {d.get('kind')!r}")


def landscape_to_json(oracle: FitnessOracle) -> dict:
    if isinstance(oracle, NkLandscape):
        return oracle.to_json()
    raise ParseError("only NK landscapes serialize to JSON")


__all__ = [
    "FitnessOracle",
    "NkLandscape",
    "TableLandscape",
    "NoisyOracle",
    "NoisyOracleConfig",
    "NoisyOracleEnsemble",
    "noisy_oracle",
    "seed_dataset",
    "landscape_from_json",
    "landscape_to_json",
]
