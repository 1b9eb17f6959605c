"""Physicochemical reference tables.

Provenance:
- Average residue masses (Da): standard monomer (residue) masses used in
  mass-spec and sequence-analysis toolkits; add one water per chain.
- Hydropathy: Kyte & Doolittle (1982), J Mol Biol 157:105-132.
- Dipeptide instability weights (DIWV): Guruprasad, Reddy & Pandit (1990),
  Protein Eng 4:155-161, as distributed with common sequence toolkits.
- pKa set: the EMBOSS iep defaults (N-terminus 8.6, C-terminus 3.6, side
  chains C 8.5, D 3.9, E 4.1, H 6.5, K 10.8, R 12.5, Y 10.1).

Tests assert internal consistency (e.g. net charge vanishing at the computed
isoelectric point), not specific published numbers, so an alternative
documented table set may be substituted without breaking the contract.
"""

WATER_MASS = 18.0153

AVERAGE_RESIDUE_MASS = {
    "A": 71.0788,
    "C": 103.1388,
    "D": 115.0886,
    "E": 129.1155,
    "F": 147.1766,
    "G": 57.0519,
    "H": 137.1411,
    "I": 113.1594,
    "K": 128.1741,
    "L": 113.1594,
    "M": 131.1926,
    "N": 114.1038,
    "P": 97.1167,
    "Q": 128.1307,
    "R": 156.1875,
    "S": 87.0782,
    "T": 101.1051,
    "V": 99.1326,
    "W": 186.2132,
    "Y": 163.1760,
}

KYTE_DOOLITTLE = {
    "A": 1.8,
    "C": 2.5,
    "D": -3.5,
    "E": -3.5,
    "F": 2.8,
    "G": -0.4,
    "H": -3.2,
    "I": 4.5,
    "K": -3.9,
    "L": 3.8,
    "M": 1.9,
    "N": -3.5,
    "P": -1.6,
    "Q": -3.5,
    "R": -4.5,
    "S": -0.8,
    "T": -0.7,
    "V": 4.2,
    "W": -0.9,
    "Y": -1.3,
}

AROMATIC_RESIDUES = frozenset("FWY")

# EMBOSS pKa defaults; positive groups gain charge below their pKa, negative
# groups above.
PKA = {
    "n_terminus": 8.6,
    "c_terminus": 3.6,
    "C": 8.5,
    "D": 3.9,
    "E": 4.1,
    "H": 6.5,
    "K": 10.8,
    "R": 12.5,
    "Y": 10.1,
}
NEGATIVE_GROUPS = ("C", "D", "E", "Y")
POSITIVE_GROUPS = ("H", "K", "R")

# DIWV[a][b] is the instability weight of the dipeptide a-b.
_DIWV_DEFAULT = 1.0
_DIWV_OVERRIDES = {
    "A": {"C": 44.94, "D": -7.49, "H": -7.49, "P": 20.26},
    "C": {"D": 20.26, "H": 33.60, "L": 20.26, "M": 33.60, "Q": -6.54,
          "P": 20.26, "T": 33.60, "V": -6.54, "W": 24.68},
    "D": {"F": -6.54, "K": -7.49, "R": -6.54, "S": 20.26, "T": -14.03},
    "E": {"C": 44.94, "D": 20.26, "E": 33.60, "H": -6.54, "I": 20.26,
          "P": 20.26, "Q": 20.26, "S": 20.26, "W": -14.03},
    "F": {"D": 13.34, "K": -14.03, "P": 20.26, "Y": 33.60},
    "G": {"A": -7.49, "E": -6.54, "G": 13.34, "I": -7.49, "K": -7.49,
          "N": -7.49, "T": -7.49, "W": 13.34, "Y": -7.49},
    "H": {"D": 1.00, "F": -9.37, "G": -9.37, "I": 44.94, "K": 24.68,
          "N": 24.68, "P": -1.88, "T": -6.54, "W": -1.88, "Y": 44.94},
    "I": {"E": 44.94, "H": 13.34, "K": -7.49, "L": 20.26, "P": -1.88,
          "V": -7.49},
    "K": {"G": -7.49, "I": -7.49, "L": -7.49, "M": 33.60, "P": -6.54,
          "Q": 24.64, "R": 33.60, "V": -7.49},
    "L": {"K": -7.49, "P": 20.26, "Q": 33.60, "R": 20.26, "W": 24.68},
    "M": {"A": 13.34, "H": 58.28, "M": -1.88, "P": 44.94, "Q": -6.54,
          "R": -6.54, "S": 44.94, "T": -1.88, "Y": 24.68},
    "N": {"C": -1.88, "F": -14.03, "G": -14.03, "I": 44.94, "K": 24.68,
          "P": -1.88, "Q": -6.54, "T": -7.49, "W": -9.37},
    "P": {"A": 20.26, "C": -6.54, "D": -6.54, "E": 18.38, "F": 20.26,
          "M": -6.54, "P": 20.26, "Q": 20.26, "R": -6.54, "S": 20.26,
          "V": 20.26, "W": -1.88},
    "Q": {"C": -6.54, "D": 20.26, "E": 20.26, "F": -6.54, "P": 20.26,
          "Q": 20.26, "S": 44.94, "V": -6.54, "Y": -6.54},
    "R": {"G": -7.49, "H": 20.26, "N": 13.34, "Q": 20.26, "P": 20.26,
          "R": 58.28, "S": 44.94, "W": 58.28, "Y": -6.54},
    "S": {"C": 33.60, "E": 20.26, "P": 44.94, "Q": 20.26, "R": 20.26,
          "S": 20.26},
    "T": {"E": 20.26, "F": 13.34, "G": -7.49, "N": -14.03, "Q": -6.54,
          "W": -14.03},
    "V": {"D": -14.03, "G": -7.49, "K": -1.88, "P": 20.26, "T": -7.49,
          "Y": -6.54},
    "W": {"A": -14.03, "G": -9.37, "H": 24.68, "L": 13.34, "M": 24.68,
          "N": 13.34, "T": -14.03, "V": -7.49},
    "Y": {"A": 24.68, "D": 24.68, "E": -6.54, "G": -7.49, "H": 13.34,
          "M": 44.94, "P": 13.34, "R": -15.91, "T": -7.49, "W": -9.37,
          "Y": 13.34},
}

DIWV = {
    a: {b: _DIWV_OVERRIDES.get(a, {}).get(b, _DIWV_DEFAULT) for b in AVERAGE_RESIDUE_MASS}
    for a in AVERAGE_RESIDUE_MASS
}
