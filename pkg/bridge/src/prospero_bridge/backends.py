"""Prior backends served over the wire protocol.

The mock backend holds a per-position profile over its own vocabulary (which
deliberately includes special symbols so the canonical-20 renormalization path
is always exercised). The hf_model backend wraps a pretrained masked protein
language model when the optional dependency is available.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .tokens import ALPHABET, TokenMap

MASK_SYMBOL = "<mask>"
# specials first, then the canonical residues, then ambiguity codes the
# engine must never see in a response
MOCK_VOCAB = ["<pad>", MASK_SYMBOL] + list(ALPHABET) + ["X", "B"]


class BackendError(Exception):
    pass


class MockProfileBackend:
    """Position-wise stored profile over the mock vocabulary.

    Context tokens are accepted but ignored: the mock models an order-agnostic
    conditional that depends on position only, which is all the integration
    tests need.
    """

    name = "mock-profile"

    def __init__(self, log_matrix: np.ndarray):
        log_matrix = np.asarray(log_matrix, dtype=float)
        if log_matrix.ndim != 2 or log_matrix.shape[1] != len(MOCK_VOCAB):
            raise BackendError(
                f"profile must have shape (L, {len(MOCK_VOCAB)}), got {log_matrix.shape}"
            )
        self.log_matrix = log_matrix
        self.vocab = MOCK_VOCAB
        self.mask_symbol = MASK_SYMBOL
        self.token_map = TokenMap(self.vocab, self.mask_symbol)

    @classmethod
    def uniform(cls, length: int) -> "MockProfileBackend":
        """Uniform over the canonical residues, zero mass on specials."""
        row = np.full(len(MOCK_VOCAB), -np.inf)
        idx = [MOCK_VOCAB.index(aa) for aa in ALPHABET]
        row[idx] = -np.log(len(ALPHABET))
        return cls(np.tile(row, (length, 1)))

    @classmethod
    def random(cls, length: int, seed: int) -> "MockProfileBackend":
        """Random log-softmax rows over the full vocabulary, specials included."""
        rng = np.random.default_rng(seed)
        logits = rng.normal(size=(length, len(MOCK_VOCAB)))
        m = logits.max(axis=1, keepdims=True)
        z = m + np.log(np.exp(logits - m).sum(axis=1, keepdims=True))
        return cls(logits - z)

    @classmethod
    def from_json(cls, path) -> "MockProfileBackend":
        with open(path) as fh:
            payload = json.load(fh)
        return cls(np.asarray(payload["log_matrix"], dtype=float))

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump({"log_matrix": self.log_matrix.tolist()}, fh)

    @property
    def length(self) -> int:
        return self.log_matrix.shape[0]

    def logprobs(self, backend_tokens: list[int], position: int) -> np.ndarray:
        """Log-distribution over the backend vocabulary for one position (0-based)."""
        if not 0 <= position < self.length:
            raise BackendError(
                f"position {position} outside profile length {self.length}"
            )
        if len(backend_tokens) != self.length:
            raise BackendError(
                f"context length {len(backend_tokens)} != profile length {self.length}"
            )
        return self.log_matrix[position]


class HfModelBackend:
    """Masked protein language model via the optional transformers dependency."""

    name = "hf-model"

    def __init__(self, model_id: str, device: str = "cpu"):
        try:
            import transformers  # noqa: F401
        except ImportError as exc:
            raise BackendError(
                "the hf_model backend needs the optional 'transformers' package; "
                "install it or use the mock backend"
            ) from exc
        raise BackendError(
            f"hf_model backend for {model_id!r} is not bundled at desk scale; "
            "use the mock backend for integration testing"
        )


def load_backend(kind: str, model: str | None, length: int, seed: int = 0):
    if kind == "mock":
        if model:
            path = Path(model)
            if not path.exists():
                raise BackendError(f"profile file not found: {model}")
            return MockProfileBackend.from_json(path)
        return MockProfileBackend.random(length, seed)
    if kind == "hf_model":
        if not model:
            raise BackendError("hf_model backend needs --model")
        return HfModelBackend(model)
    raise BackendError(f"unknown backend kind {kind!r}")
