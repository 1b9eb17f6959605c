"""Campaign evaluation metrics and physicochemical property calculators."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import proptables as pt
from .errors import EmptyDataset, EmptyReference, LengthTooShort
from .seqs import hamming

TOP_POOL_SIZE = 100
PI_TOLERANCE = 0.01


@dataclass(frozen=True)
class PropertyVector:
    molecular_weight: float  # daltons
    aromaticity: float  # fraction of F/W/Y
    isoelectric_point: float  # pH units
    gravy: float  # mean Kyte-Doolittle hydropathy
    instability_index: float

    def as_tuple(self) -> tuple[float, float, float, float, float]:
        return (
            self.molecular_weight,
            self.aromaticity,
            self.isoelectric_point,
            self.gravy,
            self.instability_index,
        )


def net_charge(seq: str, ph: float) -> float:
    """Henderson-Hasselbalch net charge with terminal groups included."""
    charge = 1.0 / (1.0 + 10 ** (ph - pt.PKA["n_terminus"]))
    charge -= 1.0 / (1.0 + 10 ** (pt.PKA["c_terminus"] - ph))
    for aa in pt.POSITIVE_GROUPS:
        charge += seq.count(aa) / (1.0 + 10 ** (ph - pt.PKA[aa]))
    for aa in pt.NEGATIVE_GROUPS:
        charge -= seq.count(aa) / (1.0 + 10 ** (pt.PKA[aa] - ph))
    return charge


def isoelectric_point(seq: str) -> float:
    """pH at which the net charge vanishes, by bisection to 0.01 pH."""
    lo, hi = 0.0, 14.0
    while hi - lo > PI_TOLERANCE:
        mid = (lo + hi) / 2.0
        if net_charge(seq, mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2.0


def instability_index(seq: str) -> float:
    if len(seq) < 2:
        raise LengthTooShort("instability index needs at least 2 residues")
    total = sum(pt.DIWV[a][b] for a, b in zip(seq, seq[1:]))
    return 10.0 / len(seq) * total


def physicochemical(seq: str) -> PropertyVector:
    """The five validity properties of a fully unmasked sequence."""
    mw = sum(pt.AVERAGE_RESIDUE_MASS[aa] for aa in seq) + pt.WATER_MASS
    aromatic = sum(aa in pt.AROMATIC_RESIDUES for aa in seq) / len(seq)
    gravy = sum(pt.KYTE_DOOLITTLE[aa] for aa in seq) / len(seq)
    return PropertyVector(
        molecular_weight=mw,
        aromaticity=aromatic,
        isoelectric_point=isoelectric_point(seq),
        gravy=gravy,
        instability_index=instability_index(seq),
    )


def top_pool(records: list[tuple[str, float]], k: int = TOP_POOL_SIZE) -> list[tuple[str, float]]:
    """k highest-fitness records; stable order among ties."""
    return sorted(records, key=lambda r: -r[1])[:k]


def metrics_report(records: list[tuple[str, float]], x_start: str) -> dict:
    """Max / mean / median fitness of the top-100 pool plus novelty and
    diversity (average Hamming distances). Degenerate pools are flagged
    rather than producing NaN."""
    if not records:
        raise EmptyDataset("metrics need at least one record")
    pool = top_pool(records)
    values = np.array([y for _, y in pool])
    seqs = [s for s, _ in pool]
    novelty = float(np.mean([hamming(s, x_start) for s in seqs]))
    if len(seqs) > 1:
        pair_sum = 0
        for i in range(len(seqs)):
            for j in range(i + 1, len(seqs)):
                pair_sum += hamming(seqs[i], seqs[j])
        diversity = pair_sum / (len(seqs) * (len(seqs) - 1) / 2)
        degenerate = False
    else:
        diversity = 0.0
        degenerate = True
    return {
        "max_fitness": float(np.max([y for _, y in records])),
        "mean_top100": float(values.mean()),
        "median_top100": float(np.median(values)),
        "novelty": novelty,
        "diversity": float(diversity),
        "pool_size": len(pool),
        "pool_truncated": len(records) < TOP_POOL_SIZE,
        "degenerate_diversity": degenerate,
    }


def validity(top100: list[str], reference: list[str]) -> float:
    """Percent of candidates whose five properties all fall inside the central
    99% band (0.5th to 99.5th percentile) of the reference distributions."""
    if not reference:
        raise EmptyReference("validity needs a reference set")
    if len(reference) < 200:
        warnings.warn(
            "reference set smaller than 200; percentile bands are unstable", stacklevel=2
        )
    if not top100:
        warnings.warn("empty candidate set; validity reported as 0", stacklevel=2)
        return 0.0
    ref_props = np.array([physicochemical(s).as_tuple() for s in reference])
    lo = np.percentile(ref_props, 0.5, axis=0)
    hi = np.percentile(ref_props, 99.5, axis=0)
    cand = np.array([physicochemical(s).as_tuple() for s in top100])
    ok = np.all((cand >= lo) & (cand <= hi), axis=1)
    return 100.0 * float(ok.mean())
