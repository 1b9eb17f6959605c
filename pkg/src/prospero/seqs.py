"""Core sequence machinery: alphabet, masking, charge classes, permutations.

Positions are 0-based everywhere in code; serialized output (JSON traces,
reports) converts to 1-based.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import (
    EmptySequence,
    LengthMismatch,
    NonCanonicalResidue,
    PositionOutOfRange,
)

ALPHABET = "ACDEFGHIKLMNPQRSTVWY"
ALPHABET_SIZE = len(ALPHABET)
AA_INDEX = {aa: i for i, aa in enumerate(ALPHABET)}

#: Sentinel for a masked slot; deliberately not a 21st alphabet symbol.
MASK = "#"

POSITIVE_RESIDUES = frozenset("RKH")
NEGATIVE_RESIDUES = frozenset("DE")


class ChargeClass(Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"
    NEUTRAL = "neutral"


def charge_class(residue: str) -> ChargeClass:
    """Map a canonical residue to its element of the three-way charge partition."""
    if residue in POSITIVE_RESIDUES:
        return ChargeClass.POSITIVE
    if residue in NEGATIVE_RESIDUES:
        return ChargeClass.NEGATIVE
    if residue not in AA_INDEX:
        raise NonCanonicalResidue(1, residue)
    return ChargeClass.NEUTRAL


def charge_class_members(cls: ChargeClass) -> str:
    """Residues belonging to a charge class, in alphabet order."""
    if cls is ChargeClass.POSITIVE:
        keep = POSITIVE_RESIDUES
    elif cls is ChargeClass.NEGATIVE:
        keep = NEGATIVE_RESIDUES
    else:
        keep = set(ALPHABET) - POSITIVE_RESIDUES - NEGATIVE_RESIDUES
    return "".join(aa for aa in ALPHABET if aa in keep)


def parse_sequence(text: str) -> str:
    """Validate a residue string against the canonical 20-letter alphabet.

    Returns the string unchanged; raises on empty input or any symbol outside
    the alphabet (no B/J/O/U/X/Z, no gaps, no lowercase).
    """
    if not text:
        raise EmptySequence("empty sequence")
    for i, ch in enumerate(text):
        if ch not in AA_INDEX:
            raise NonCanonicalResidue(i + 1, ch)
    return text


def hamming(a: str, b: str) -> int:
    """Number of differing positions between two equal-length sequences."""
    if len(a) != len(b):
        raise LengthMismatch(f"lengths {len(a)} and {len(b)} differ")
    return sum(x != y for x, y in zip(a, b))


def encode_indices(seq: str) -> np.ndarray:
    """Alphabet indices of a fully unmasked sequence, shape (L,)."""
    try:
        return np.array([AA_INDEX[aa] for aa in seq], dtype=np.int64)
    except KeyError as exc:
        raise NonCanonicalResidue(seq.index(exc.args[0]) + 1, exc.args[0]) from None


def encode_one_hot(seq: str) -> np.ndarray:
    """Flattened one-hot encoding, shape (20*L,), dtype float64."""
    idx = encode_indices(seq)
    out = np.zeros(ALPHABET_SIZE * len(seq))
    out[np.arange(len(seq)) * ALPHABET_SIZE + idx] = 1.0
    return out


def encode_one_hot_batch(seqs: list[str]) -> np.ndarray:
    """One-hot encode a batch of equal-length sequences, shape (n, 20*L)."""
    if not seqs:
        return np.zeros((0, 0))
    length = len(seqs[0])
    out = np.zeros((len(seqs), ALPHABET_SIZE * length))
    for row, seq in enumerate(seqs):
        if len(seq) != length:
            raise LengthMismatch("batch sequences must share one length")
        out[row, np.arange(length) * ALPHABET_SIZE + encode_indices(seq)] = 1.0
    return out


@dataclass(frozen=True)
class MaskedSequence:
    """A fixed-length sequence with some positions replaced by MASK.

    `slots` holds one character per position (residue or MASK); `mask_set` is
    the sorted tuple of 0-based masked positions and always mirrors the MASK
    slots exactly.
    """

    slots: str
    mask_set: tuple[int, ...]

    def __post_init__(self):
        derived = tuple(i for i, ch in enumerate(self.slots) if ch == MASK)
        if derived != tuple(sorted(self.mask_set)):
            raise ValueError("mask_set does not match MASK slots")
        for i, ch in enumerate(self.slots):
            if ch != MASK and ch not in AA_INDEX:
                raise NonCanonicalResidue(i + 1, ch)

    @classmethod
    def from_positions(cls, seq: str, positions: set[int] | tuple[int, ...]) -> "MaskedSequence":
        pos = tuple(sorted(positions))
        if pos and (pos[0] < 0 or pos[-1] >= len(seq)):
            raise PositionOutOfRange(f"mask positions outside 0..{len(seq) - 1}")
        slots = "".join(MASK if i in set(pos) else ch for i, ch in enumerate(seq))
        return cls(slots=slots, mask_set=pos)

    def __len__(self) -> int:
        return len(self.slots)

    @property
    def is_complete(self) -> bool:
        return not self.mask_set

    def to_sequence(self) -> str:
        if self.mask_set:
            raise ValueError("sequence still contains MASK slots")
        return self.slots

    def fill(self, pos: int, residue: str) -> "MaskedSequence":
        """Return a copy with one masked position unmasked."""
        if pos not in self.mask_set:
            raise PositionOutOfRange(f"position {pos} is not masked")
        slots = self.slots[:pos] + residue + self.slots[pos + 1 :]
        return MaskedSequence(slots=slots, mask_set=tuple(p for p in self.mask_set if p != pos))


@dataclass(frozen=True)
class Permutation:
    """Sampling order over positions: unmasked prefix, then masked positions
    grouped negative / positive / neutral (each group ascending)."""

    order: tuple[int, ...]
    boundary: int  # index where the unmasked prefix ends

    def __post_init__(self):
        if sorted(self.order) != list(range(len(self.order))):
            raise ValueError("order is not a permutation of 0..L-1")

    @property
    def masked_order(self) -> tuple[int, ...]:
        return self.order[self.boundary :]


def build_permutation(masked: MaskedSequence, wild_type: str) -> Permutation:
    """Derive the sampling order from a masked sequence and its wild type.

    Masked positions are grouped by the charge class of the wild-type residue
    at that position: negatives first, then positives, then neutrals, each
    block in ascending position order.
    """
    if len(masked) != len(wild_type):
        raise LengthMismatch("masked sequence and wild type lengths differ")
    mask = set(masked.mask_set)
    prefix = [i for i in range(len(wild_type)) if i not in mask]
    neg, pos, neu = [], [], []
    for i in masked.mask_set:
        cls = charge_class(wild_type[i])
        if cls is ChargeClass.NEGATIVE:
            neg.append(i)
        elif cls is ChargeClass.POSITIVE:
            pos.append(i)
        else:
            neu.append(i)
    return Permutation(order=tuple(prefix + neg + pos + neu), boundary=len(prefix))
