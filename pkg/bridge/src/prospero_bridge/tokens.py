"""Vocabulary adaptation between engine tokens and backend vocabularies.

The engine speaks a closed alphabet of 20 canonical residues (token ids 0-19
in the order "ACDEFGHIKLMNPQRSTVWY") plus -1 for a masked slot. Backends may
use larger vocabularies with special symbols; this module maps between the
two and renormalizes backend distributions onto the canonical 20.
"""

from __future__ import annotations

import numpy as np

ALPHABET = "ACDEFGHIKLMNPQRSTVWY"
MASK_TOKEN = -1


class UnmappableToken(Exception):
    pass


class TokenMap:
    """Bidirectional map between engine tokens and one backend vocabulary."""

    def __init__(self, backend_vocab: list[str], mask_symbol: str):
        if mask_symbol not in backend_vocab:
            raise UnmappableToken(f"backend vocabulary lacks mask symbol {mask_symbol!r}")
        self.backend_vocab = list(backend_vocab)
        self.mask_backend_id = backend_vocab.index(mask_symbol)
        self._to_backend = {}
        for i, aa in enumerate(ALPHABET):
            if aa not in backend_vocab:
                raise UnmappableToken(f"backend vocabulary lacks residue {aa!r}")
            self._to_backend[i] = backend_vocab.index(aa)
        self._to_engine = {v: k for k, v in self._to_backend.items()}
        # backend ids of the canonical residues, in engine alphabet order
        self.canonical_backend_ids = np.array(
            [self._to_backend[i] for i in range(len(ALPHABET))]
        )

    def engine_to_backend(self, token: int) -> int:
        if token == MASK_TOKEN:
            return self.mask_backend_id
        try:
            return self._to_backend[token]
        except KeyError:
            raise UnmappableToken(f"engine token {token} out of range") from None

    def backend_to_engine(self, backend_id: int) -> int:
        if backend_id == self.mask_backend_id:
            return MASK_TOKEN
        try:
            return self._to_engine[backend_id]
        except KeyError:
            raise UnmappableToken(
                f"backend id {backend_id} has no engine counterpart"
            ) from None

    def map_sequence(self, tokens: list[int]) -> list[int]:
        return [self.engine_to_backend(t) for t in tokens]

    def renormalize(self, backend_logprobs: np.ndarray) -> np.ndarray:
        """Project a backend distribution onto the canonical 20 residues.

        Mass on backend specials or non-canonical symbols is discarded and the
        remainder renormalized, so responses always logsumexp to 0.
        """
        sub = np.asarray(backend_logprobs, dtype=float)[self.canonical_backend_ids]
        m = sub.max()
        z = m + np.log(np.exp(sub - m).sum())
        return sub - z
