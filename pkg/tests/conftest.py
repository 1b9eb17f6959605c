"""Shared test helpers: lightweight scorers with the ensemble interface."""

from __future__ import annotations

import numpy as np


class TableScorer:
    """Deterministic scorer backed by an explicit sequence -> value table."""

    def __init__(self, table: dict[str, float], default: float | None = None):
        self.table = table
        self.default = default
        lengths = {len(s) for s in table}
        self.sequence_length = lengths.pop() if len(lengths) == 1 else None

    def predict_batch(self, seqs):
        if self.default is None:
            mu = np.array([self.table[s] for s in seqs])
        else:
            mu = np.array([self.table.get(s, self.default) for s in seqs])
        return mu, np.zeros(len(seqs))

    def predict(self, seq):
        mu, sigma = self.predict_batch([seq])
        return float(mu[0]), float(sigma[0])


class FunctionScorer:
    """Scorer wrapping an arbitrary sequence -> float function, sigma = 0."""

    def __init__(self, fn, sequence_length=None):
        self.fn = fn
        self.sequence_length = sequence_length

    def predict_batch(self, seqs):
        return np.array([self.fn(s) for s in seqs]), np.zeros(len(seqs))

    def predict(self, seq):
        return float(self.fn(seq)), 0.0


class ConstantScorer:
    """mu = c, sigma = 0 everywhere."""

    def __init__(self, value: float, sequence_length=None):
        self.value = value
        self.sequence_length = sequence_length

    def predict_batch(self, seqs):
        return np.full(len(seqs), self.value), np.zeros(len(seqs))

    def predict(self, seq):
        return self.value, 0.0
