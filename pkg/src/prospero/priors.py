"""Generative priors over sequences: per-position conditional distributions.

Three kinds are supported: a uniform prior, a per-position profile prior
fitted from a corpus (Laplace-smoothed, context-free by design), and an
external prior queried over a newline-delimited JSON protocol (child process
stdio or TCP). All arithmetic is kept in log space; probabilities are only
materialized at sampling time.
"""

from __future__ import annotations

import json
import math
import socket
import subprocess
from abc import ABC, abstractmethod

import numpy as np

from .errors import (
    EmptyCorpus,
    ExternalPriorUnavailable,
    MixedLengths,
    PositionNotMasked,
    ProtocolError,
    ZeroMaskCount,
)
from .seqs import (
    ALPHABET,
    ALPHABET_SIZE,
    AA_INDEX,
    MASK,
    ChargeClass,
    MaskedSequence,
    charge_class_members,
)

PROTOCOL_VERSION = 1
NORMALIZATION_TOL = 1e-6


def _logsumexp(v: np.ndarray) -> float:
    m = float(np.max(v))
    if not math.isfinite(m):
        return m
    return m + math.log(float(np.sum(np.exp(v - m))))


def log_normalize(v: np.ndarray) -> np.ndarray:
    return v - _logsumexp(v)


class SequencePrior(ABC):
    """Conditional distribution over the 20 residues at a masked position."""

    #: True when conditionals do not depend on the unmasked context, which
    #: allows the sampler to precompute per-position tables.
    context_free: bool = False

    #: Count of zero-mass fallback events during constrained sampling.
    zero_mass_fallbacks: int = 0

    @abstractmethod
    def conditional_logprobs(self, masked: MaskedSequence, pos: int) -> np.ndarray:
        """Normalized log-probabilities (length 20) for a masked position."""


def _require_masked(masked: MaskedSequence, pos: int) -> None:
    if pos not in masked.mask_set:
        raise PositionNotMasked(f"position {pos} is not masked")


class UniformPrior(SequencePrior):
    context_free = True

    def __init__(self):
        self.zero_mass_fallbacks = 0
        self._row = np.full(ALPHABET_SIZE, -math.log(ALPHABET_SIZE))

    def conditional_logprobs(self, masked: MaskedSequence, pos: int) -> np.ndarray:
        _require_masked(masked, pos)
        return self._row.copy()

    def logprob_row(self, pos: int) -> np.ndarray:
        return self._row


class ProfilePrior(SequencePrior):
    """Position-wise residue distribution; deliberately ignores context."""

    context_free = True

    def __init__(self, log_matrix: np.ndarray):
        log_matrix = np.asarray(log_matrix, dtype=float)
        if log_matrix.ndim != 2 or log_matrix.shape[1] != ALPHABET_SIZE:
            raise ValueError("profile matrix must have shape (L, 20)")
        sums = np.array([_logsumexp(row) for row in log_matrix])
        if np.any(np.abs(sums) > NORMALIZATION_TOL):
            raise ValueError("profile rows must be normalized")
        self.zero_mass_fallbacks = 0
        self.log_matrix = log_matrix

    @property
    def length(self) -> int:
        return self.log_matrix.shape[0]

    def conditional_logprobs(self, masked: MaskedSequence, pos: int) -> np.ndarray:
        _require_masked(masked, pos)
        return self.log_matrix[pos].copy()

    def logprob_row(self, pos: int) -> np.ndarray:
        return self.log_matrix[pos]


def fit_profile_prior(corpus: list[str], pseudocount: float = 1.0) -> ProfilePrior:
    """Laplace-smoothed per-position residue frequencies from a corpus."""
    if not corpus:
        raise EmptyCorpus("cannot fit a profile prior on an empty corpus")
    length = len(corpus[0])
    if any(len(s) != length for s in corpus):
        raise MixedLengths("corpus sequences must share one length")
    counts = np.full((length, ALPHABET_SIZE), pseudocount, dtype=float)
    for seq in corpus:
        for i, aa in enumerate(seq):
            counts[i, AA_INDEX[aa]] += 1.0
    probs = counts / counts.sum(axis=1, keepdims=True)
    return ProfilePrior(np.log(probs))


class ExternalPrior(SequencePrior):
    """Client for an external prior speaking the line-JSON protocol.

    Connects either to a spawned child process (stdio transport) or to a TCP
    endpoint. Every response is validated: 20 finite values whose logsumexp is
    within 1e-6 of zero; anything else raises ProtocolError.
    """

    context_free = False

    def __init__(self, command: list[str] | None = None, host: str | None = None, port: int | None = None):
        self.zero_mass_fallbacks = 0
        self._proc = None
        self._sock = None
        if command:
            try:
                self._proc = subprocess.Popen(
                    command,
                    stdin=subprocess.PIPE,
                    stdout=subprocess.PIPE,
                    text=True,
                    bufsize=1,
                )
            except OSError as exc:
                raise ExternalPriorUnavailable(str(exc)) from exc
            self._reader = self._proc.stdout
            self._writer = self._proc.stdin
        elif host is not None and port is not None:
            try:
                self._sock = socket.create_connection((host, port))
            except OSError as exc:
                raise ExternalPriorUnavailable(str(exc)) from exc
            fh = self._sock.makefile("rw", encoding="utf-8", newline="\n")
            self._reader = fh
            self._writer = fh
        else:
            raise ValueError("either command or host/port must be given")
        self.model_name = self._handshake()

    def _send(self, obj: dict) -> dict:
        try:
            self._writer.write(json.dumps(obj) + "\n")
            self._writer.flush()
            line = self._reader.readline()
        except (OSError, ValueError) as exc:
            raise ExternalPriorUnavailable(str(exc)) from exc
        if not line:
            raise ExternalPriorUnavailable("external prior closed the connection")
        try:
            reply = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ProtocolError(f"invalid JSON from prior: {line!r}") from exc
        if not isinstance(reply, dict) or "op" not in reply:
            raise ProtocolError(f"malformed response: {reply!r}")
        if reply["op"] == "error":
            raise ProtocolError(reply.get("message", "unspecified prior error"))
        return reply

    def _handshake(self) -> str:
        reply = self._send({"op": "hello", "version": PROTOCOL_VERSION, "alphabet": ALPHABET})
        if reply["op"] != "hello_ok":
            raise ProtocolError(f"unexpected handshake reply: {reply!r}")
        return str(reply.get("model", "unknown"))

    def conditional_logprobs(self, masked: MaskedSequence, pos: int) -> np.ndarray:
        _require_masked(masked, pos)
        tokens = [-1 if ch == MASK else AA_INDEX[ch] for ch in masked.slots]
        reply = self._send({"op": "logprobs", "tokens": tokens, "position": pos + 1})
        if reply["op"] != "logprobs_ok":
            raise ProtocolError(f"unexpected reply op: {reply['op']!r}")
        values = reply.get("values")
        if not isinstance(values, list) or len(values) != ALPHABET_SIZE:
            raise ProtocolError("logprobs payload must hold 20 values")
        arr = np.asarray(values, dtype=float)
        if not np.all(np.isfinite(arr)):
            raise ProtocolError("non-finite log-probabilities from prior")
        if abs(_logsumexp(arr)) > NORMALIZATION_TOL:
            raise ProtocolError("unnormalized log-probabilities from prior")
        return log_normalize(arr)

    def close(self) -> None:
        if self._proc is not None:
            self._proc.stdin.close()
            self._proc.wait(timeout=10)
            self._proc = None
        if self._sock is not None:
            self._sock.close()
            self._sock = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def class_indices(cls: ChargeClass) -> np.ndarray:
    return np.array([AA_INDEX[aa] for aa in charge_class_members(cls)])


def constrained_probs(base_logprobs: np.ndarray, cls: ChargeClass) -> tuple[np.ndarray, bool]:
    """Renormalize a base conditional over one charge class.

    Returns probabilities over the class members (alphabet order) and a flag
    marking the zero-mass fallback (uniform over the class).
    """
    idx = class_indices(cls)
    sub = base_logprobs[idx]
    total = _logsumexp(sub)
    if total == -math.inf:
        return np.full(len(idx), 1.0 / len(idx)), True
    return np.exp(sub - total), False


def constrained_sample(
    prior: SequencePrior,
    masked: MaskedSequence,
    pos: int,
    cls: ChargeClass,
    rng: np.random.Generator,
) -> str:
    """Draw a residue for a masked position, restricted to one charge class."""
    logprobs = prior.conditional_logprobs(masked, pos)
    probs, fallback = constrained_probs(logprobs, cls)
    if fallback:
        prior.zero_mass_fallbacks += 1
    members = charge_class_members(cls)
    return members[rng.choice(len(members), p=probs)]


def sequence_perplexity(total_unconstrained_loglik: float, masked_count: int) -> float:
    """Exponentiated negative mean log-likelihood over masked positions."""
    if masked_count < 1:
        raise ZeroMaskCount("perplexity needs at least one masked position")
    return math.exp(-total_unconstrained_loglik / masked_count)
