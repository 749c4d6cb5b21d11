"""Sequence-level physicochemical profiling.

All constants (hydropathy scales, masses, pKa values, dipeptide instability
weights) come from the bundled data tables, so every number produced here
is reproducible bit-exactly from this package alone.  Masses are average
(not monoisotopic); the hydrophobic moment is computed over the full
sequence rather than a sliding window.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

from . import _tables
from .errors import ConfigError, ValidationError
from .sequences import AA_TO_INDEX, Peptide

WATER_MASS = 18.02

_AROMATIC = frozenset("FWY")
_HELIX = frozenset("VIYFWL")
_TURN = frozenset("NPGS")
_SHEET = frozenset("EMAL")
_HYDROPHOBIC = frozenset("ACFILMVW")

# molar extinction coefficients at 280 nm (Gill - von Hippel)
_EXT_TYR = 1490.0
_EXT_TRP = 5500.0
_EXT_CYSTINE = 125.0

_MOMENT_ANGLE_DEG = 100.0


@dataclass(frozen=True)
class PhyschemProfile:
    gravy: float
    molecular_weight: float
    isoelectric_point: float
    net_charge_ph7: float
    aromaticity: float
    instability_index: float
    helix_fraction: float
    turn_fraction: float
    sheet_fraction: float
    extinction_reduced: float
    extinction_oxidized: float
    aliphatic_index: float
    charge_density: float
    hydrophobic_ratio: float
    hydrophobic_moment: float

    def as_dict(self) -> dict[str, float]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


PROFILE_FIELDS = tuple(f.name for f in fields(PhyschemProfile))


def _seq(p) -> str:
    # single residues are chemically meaningful here, so unlike Peptide
    # only the alphabet is enforced, not the two-residue minimum
    seq = p.sequence if isinstance(p, Peptide) else str(p)
    if not seq:
        raise ValidationError("cannot profile an empty sequence")
    for ch in seq:
        if ch not in AA_TO_INDEX:
            raise ValidationError(f"invalid residue {ch!r} in sequence {seq!r}")
    return seq


def net_charge(peptide, ph: float) -> float:
    """Henderson-Hasselbalch net charge at the given pH.

    Positive groups (N-terminus, K, R, H) contribute
    10^pKa / (10^pKa + 10^pH); negative groups (C-terminus, D, E, C, Y)
    contribute -10^pH / (10^pKa + 10^pH).
    """
    if not 0 <= ph <= 14:
        raise ConfigError(f"pH must be within [0, 14], got {ph}")
    seq = _seq(peptide)
    pka = _tables.pka_table()
    counts = {"nterm": 1, "cterm": 1}
    for aa in seq:
        if aa in pka:
            counts[aa] = counts.get(aa, 0) + 1
    total = 0.0
    for group, n in counts.items():
        pk, sign = pka[group]
        if sign > 0:
            frac = 10.0 ** pk / (10.0 ** pk + 10.0 ** ph)
        else:
            frac = -(10.0 ** ph) / (10.0 ** pk + 10.0 ** ph)
        total += n * frac
    return total


def isoelectric_point(peptide, tol: float = 1e-4, max_iter: int = 100) -> float:
    """pH where the net charge crosses zero, located by bisection on [0, 14].

    Net charge is strictly decreasing in pH, so the crossing is unique.
    With both termini always present the charge spans zero on [0, 14]; the
    boundary clamp below is purely defensive.
    """
    seq = _seq(peptide)
    lo, hi = 0.0, 14.0
    c_lo, c_hi = net_charge(seq, lo), net_charge(seq, hi)
    if c_lo < 0:
        return lo
    if c_hi > 0:
        return hi
    mid = 7.0
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        c = net_charge(seq, mid)
        if abs(c) < tol:
            return mid
        if c > 0:
            lo = mid
        else:
            hi = mid
    return mid


def molecular_weight(peptide) -> float:
    masses = _tables.scalar_table("residue_masses.tsv")
    return sum(masses[aa] for aa in _seq(peptide)) + WATER_MASS


def gravy(peptide) -> float:
    kd = _tables.scalar_table("kyte_doolittle.tsv")
    seq = _seq(peptide)
    return sum(kd[aa] for aa in seq) / len(seq)


def instability_index(peptide) -> float:
    """(10 / L) * sum of dipeptide instability weights over adjacent pairs."""
    diwv = _tables.matrix_table("instability_diwv.tsv")
    seq = _seq(peptide)
    total = sum(diwv[a][b] for a, b in zip(seq, seq[1:]))
    return 10.0 / len(seq) * total


def aliphatic_index(peptide) -> float:
    """100 * (xA + 2.9 xV + 3.9 (xI + xL)) over mole fractions."""
    seq = _seq(peptide)
    n = len(seq)
    xa = seq.count("A") / n
    xv = seq.count("V") / n
    xil = (seq.count("I") + seq.count("L")) / n
    return 100.0 * (xa + 2.9 * xv + 3.9 * xil)


def hydrophobic_moment(peptide) -> float:
    """Magnitude of the per-residue hydrophobicity vector sum at 100 degrees
    per residue, divided by the length."""
    scale = _tables.scalar_table("eisenberg.tsv")
    seq = _seq(peptide)
    step = math.radians(_MOMENT_ANGLE_DEG)
    cos_sum = sum(scale[aa] * math.cos(i * step) for i, aa in enumerate(seq))
    sin_sum = sum(scale[aa] * math.sin(i * step) for i, aa in enumerate(seq))
    return math.hypot(cos_sum, sin_sum) / len(seq)


def profile(peptide) -> PhyschemProfile:
    seq = _seq(peptide)
    n = len(seq)
    mw = molecular_weight(seq)
    charge7 = net_charge(seq, 7.0)
    n_cys = seq.count("C")
    ext_red = _EXT_TYR * seq.count("Y") + _EXT_TRP * seq.count("W")
    return PhyschemProfile(
        gravy=gravy(seq),
        molecular_weight=mw,
        isoelectric_point=isoelectric_point(seq),
        net_charge_ph7=charge7,
        aromaticity=sum(aa in _AROMATIC for aa in seq) / n,
        instability_index=instability_index(seq),
        helix_fraction=sum(aa in _HELIX for aa in seq) / n,
        turn_fraction=sum(aa in _TURN for aa in seq) / n,
        sheet_fraction=sum(aa in _SHEET for aa in seq) / n,
        extinction_reduced=ext_red,
        extinction_oxidized=ext_red + _EXT_CYSTINE * (n_cys // 2),
        aliphatic_index=aliphatic_index(seq),
        charge_density=charge7 / mw,
        hydrophobic_ratio=sum(aa in _HYDROPHOBIC for aa in seq) / n,
        hydrophobic_moment=hydrophobic_moment(seq),
    )
