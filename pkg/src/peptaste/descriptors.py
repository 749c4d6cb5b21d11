"""The 20 sequence-descriptor encoders and z-score feature assembly.

Composition descriptors are frequency-normalized; positional descriptors
(Binary, BLOSUM62, Zscale, EAAC, EGAAC) lay the sequence into a fixed
pad_len frame and zero-fill beyond the sequence end.  All residue scales,
group partitions, and matrices load from the bundled data tables.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from . import _tables
from .errors import ValidationError
from .sequences import AMINO_ACIDS, Peptide

DESCRIPTOR_IDS = (
    "AAC", "DPC", "TPC", "GAAC", "GDPC", "GTPC",
    "CTDC", "CTDT", "CTDD", "CTriad", "EAAC", "EGAAC",
    "CKSAAP", "CKSAAGP", "Binary", "BLOSUM62", "DDE",
    "PAAC", "APAAC", "Zscale",
)

GROUP_NAMES = ("aliphatic", "aromatic", "positive", "negative", "uncharged")


@dataclass(frozen=True)
class DescriptorConfig:
    pad_len: int = 25
    window: int = 5
    k_max: int = 3
    lam: int = 1
    weight: float = 0.05


DEFAULT_CONFIG = DescriptorConfig()


def _seq(p) -> str:
    return p.sequence if isinstance(p, Peptide) else Peptide(str(p)).sequence


def _require(cond: bool, msg: str):
    if not cond:
        raise ValidationError(msg)


def _group_of() -> dict[str, int]:
    groups = _tables.group_table("aa_groups.tsv")
    mapping = {}
    for gi, name in enumerate(GROUP_NAMES):
        for aa in groups[name]:
            mapping[aa] = gi
    return mapping


def _aac(seq, cfg):
    counts = np.array([seq.count(aa) for aa in AMINO_ACIDS], dtype=float)
    return counts / len(seq)


def _kmer_counts(seq, k, alphabet_index, size):
    counts = np.zeros(size)
    base = len(alphabet_index)
    for i in range(len(seq) - k + 1):
        idx = 0
        for ch in seq[i : i + k]:
            idx = idx * base + alphabet_index[ch]
        counts[idx] += 1
    return counts


_AA_INDEX = {aa: i for i, aa in enumerate(AMINO_ACIDS)}


def _dpc(seq, cfg):
    counts = _kmer_counts(seq, 2, _AA_INDEX, 400)
    return counts / (len(seq) - 1)


def _tpc(seq, cfg):
    _require(len(seq) >= 3, f"TPC requires length >= 3, got {len(seq)}")
    counts = _kmer_counts(seq, 3, _AA_INDEX, 8000)
    return counts / (len(seq) - 2)


def _gaac(seq, cfg):
    gmap = _group_of()
    counts = np.zeros(5)
    for aa in seq:
        counts[gmap[aa]] += 1
    return counts / len(seq)


def _gdpc(seq, cfg):
    gmap = _group_of()
    counts = np.zeros(25)
    for a, b in zip(seq, seq[1:]):
        counts[gmap[a] * 5 + gmap[b]] += 1
    return counts / (len(seq) - 1)


def _gtpc(seq, cfg):
    _require(len(seq) >= 3, f"GTPC requires length >= 3, got {len(seq)}")
    gmap = _group_of()
    counts = np.zeros(125)
    for a, b, c in zip(seq, seq[1:], seq[2:]):
        counts[(gmap[a] * 5 + gmap[b]) * 5 + gmap[c]] += 1
    return counts / (len(seq) - 2)


def _ctd_class_string(seq, groups):
    """Map a sequence to its 0/1/2 class indices for one CTD property."""
    lookup = {}
    for ci, residues in enumerate(groups):
        for aa in residues:
            lookup[aa] = ci
    return [lookup[aa] for aa in seq]


def _ctdc(seq, cfg):
    out = []
    n = len(seq)
    for _, groups in _tables.ctd_groups():
        classes = _ctd_class_string(seq, groups)
        for ci in range(3):
            out.append(classes.count(ci) / n)
    return np.array(out)


def _ctdt(seq, cfg):
    out = []
    n = len(seq)
    for _, groups in _tables.ctd_groups():
        classes = _ctd_class_string(seq, groups)
        pairs = list(zip(classes, classes[1:]))
        for a, b in ((0, 1), (0, 2), (1, 2)):
            trans = sum(1 for x, y in pairs if (x, y) in ((a, b), (b, a)))
            out.append(trans / (n - 1))
    return np.array(out)


def _ctdd(seq, cfg):
    out = []
    n = len(seq)
    for _, groups in _tables.ctd_groups():
        classes = _ctd_class_string(seq, groups)
        for ci in range(3):
            positions = [i + 1 for i, c in enumerate(classes) if c == ci]
            if not positions:
                out.extend([0.0] * 5)
                continue
            total = len(positions)
            for q in (0.0, 0.25, 0.50, 0.75, 1.0):
                rank = max(1, math.floor(q * total))
                out.append(positions[rank - 1] / n * 100.0)
    return np.array(out)


def _ctriad(seq, cfg):
    _require(len(seq) >= 3, f"CTriad requires length >= 3, got {len(seq)}")
    groups = _tables.group_table("ctriad_groups.tsv")
    lookup = {}
    for gi, name in enumerate(sorted(groups)):
        for aa in groups[name]:
            lookup[aa] = gi
    counts = np.zeros(343)
    for a, b, c in zip(seq, seq[1:], seq[2:]):
        counts[(lookup[a] * 7 + lookup[b]) * 7 + lookup[c]] += 1
    return (counts - counts.min()) / counts.max()


def _windows(cfg):
    return cfg.pad_len - cfg.window + 1


def _eaac(seq, cfg):
    _require(
        len(seq) <= cfg.pad_len,
        f"EAAC requires length <= {cfg.pad_len}, got {len(seq)}",
    )
    nw = _windows(cfg)
    out = np.zeros((nw, 20))
    for w in range(nw):
        chunk = seq[w : w + cfg.window]
        for aa in chunk:
            out[w, _AA_INDEX[aa]] += 1
    return out.ravel() / cfg.window


def _egaac(seq, cfg):
    _require(
        len(seq) <= cfg.pad_len,
        f"EGAAC requires length <= {cfg.pad_len}, got {len(seq)}",
    )
    gmap = _group_of()
    nw = _windows(cfg)
    out = np.zeros((nw, 5))
    for w in range(nw):
        for aa in seq[w : w + cfg.window]:
            out[w, gmap[aa]] += 1
    return out.ravel() / cfg.window


def _cksaap(seq, cfg):
    blocks = []
    n = len(seq)
    for g in range(cfg.k_max + 1):
        counts = np.zeros(400)
        n_pairs = n - g - 1
        if n_pairs > 0:
            for i in range(n_pairs):
                counts[_AA_INDEX[seq[i]] * 20 + _AA_INDEX[seq[i + g + 1]]] += 1
            counts /= n_pairs
        blocks.append(counts)
    return np.concatenate(blocks)


def _cksaagp(seq, cfg):
    gmap = _group_of()
    blocks = []
    n = len(seq)
    for g in range(cfg.k_max + 1):
        counts = np.zeros(25)
        n_pairs = n - g - 1
        if n_pairs > 0:
            for i in range(n_pairs):
                counts[gmap[seq[i]] * 5 + gmap[seq[i + g + 1]]] += 1
            counts /= n_pairs
        blocks.append(counts)
    return np.concatenate(blocks)


def _binary(seq, cfg):
    _require(
        len(seq) <= cfg.pad_len,
        f"Binary requires length <= {cfg.pad_len}, got {len(seq)}",
    )
    out = np.zeros((cfg.pad_len, 20))
    for i, aa in enumerate(seq):
        out[i, _AA_INDEX[aa]] = 1.0
    return out.ravel()


def _blosum62(seq, cfg):
    _require(
        len(seq) <= cfg.pad_len,
        f"BLOSUM62 requires length <= {cfg.pad_len}, got {len(seq)}",
    )
    table = _tables.matrix_table("blosum62.tsv")
    cols = list(next(iter(table.values())))
    out = np.zeros((cfg.pad_len, 20))
    for i, aa in enumerate(seq):
        out[i] = [table[aa][c] for c in cols]
    return out.ravel()


def _dde(seq, cfg):
    codons = _tables.scalar_table("codon_counts.tsv")
    dc = _kmer_counts(seq, 2, _AA_INDEX, 400) / (len(seq) - 1)
    tm = np.array(
        [
            (codons[a] / 61.0) * (codons[b] / 61.0)
            for a in AMINO_ACIDS
            for b in AMINO_ACIDS
        ]
    )
    tv = tm * (1 - tm) / (len(seq) - 1)
    return (dc - tm) / np.sqrt(tv)


def _paac_properties(names):
    table = _tables.matrix_table("paac_scales.tsv")
    rows = []
    for name in names:
        vals = np.array([table[name][aa] for aa in AMINO_ACIDS])
        rows.append((vals - vals.mean()) / np.sqrt(((vals - vals.mean()) ** 2).mean()))
    return np.stack(rows)


def _paac(seq, cfg):
    _require(
        len(seq) > cfg.lam,
        f"PAAC requires length > lambda ({cfg.lam}), got {len(seq)}",
    )
    props = _paac_properties(["hydrophobicity", "hydrophilicity", "sidechainmass"])
    idx = np.array([_AA_INDEX[aa] for aa in seq])
    thetas = []
    for n in range(1, cfg.lam + 1):
        diffs = props[:, idx[:-n]] - props[:, idx[n:]]
        thetas.append(float((diffs ** 2).mean(axis=0).mean()))
    counts = np.array([seq.count(aa) for aa in AMINO_ACIDS], dtype=float)
    denom = 1.0 + cfg.weight * sum(thetas)
    return np.concatenate([counts / denom, cfg.weight * np.array(thetas) / denom])


def _apaac(seq, cfg):
    _require(
        len(seq) > cfg.lam,
        f"APAAC requires length > lambda ({cfg.lam}), got {len(seq)}",
    )
    props = _paac_properties(["hydrophobicity", "hydrophilicity"])
    idx = np.array([_AA_INDEX[aa] for aa in seq])
    taus = []
    for n in range(1, cfg.lam + 1):
        for p in range(props.shape[0]):
            taus.append(float((props[p, idx[:-n]] * props[p, idx[n:]]).mean()))
    counts = np.array([seq.count(aa) for aa in AMINO_ACIDS], dtype=float)
    denom = 1.0 + cfg.weight * sum(taus)
    return np.concatenate([counts / denom, cfg.weight * np.array(taus) / denom])


def _zscale(seq, cfg):
    _require(
        len(seq) <= cfg.pad_len,
        f"Zscale requires length <= {cfg.pad_len}, got {len(seq)}",
    )
    table = _tables.vector_table("zscale.tsv")
    out = np.zeros((cfg.pad_len, 5))
    for i, aa in enumerate(seq):
        out[i] = table[aa]
    return out.ravel()


_ENCODERS = {
    "AAC": _aac,
    "DPC": _dpc,
    "TPC": _tpc,
    "GAAC": _gaac,
    "GDPC": _gdpc,
    "GTPC": _gtpc,
    "CTDC": _ctdc,
    "CTDT": _ctdt,
    "CTDD": _ctdd,
    "CTriad": _ctriad,
    "EAAC": _eaac,
    "EGAAC": _egaac,
    "CKSAAP": _cksaap,
    "CKSAAGP": _cksaagp,
    "Binary": _binary,
    "BLOSUM62": _blosum62,
    "DDE": _dde,
    "PAAC": _paac,
    "APAAC": _apaac,
    "Zscale": _zscale,
}


def encode(descriptor_id: str, peptide, config: DescriptorConfig = DEFAULT_CONFIG):
    """Encode one peptide with one descriptor; returns a fixed-length vector."""
    if descriptor_id not in _ENCODERS:
        raise ValidationError(f"unknown descriptor {descriptor_id!r}")
    return _ENCODERS[descriptor_id](_seq(peptide), config)


def descriptor_dims(config: DescriptorConfig = DEFAULT_CONFIG) -> dict[str, int]:
    nw = _windows(config)
    return {
        "AAC": 20,
        "DPC": 400,
        "TPC": 8000,
        "GAAC": 5,
        "GDPC": 25,
        "GTPC": 125,
        "CTDC": 39,
        "CTDT": 39,
        "CTDD": 195,
        "CTriad": 343,
        "EAAC": nw * 20,
        "EGAAC": nw * 5,
        "CKSAAP": (config.k_max + 1) * 400,
        "CKSAAGP": (config.k_max + 1) * 25,
        "Binary": config.pad_len * 20,
        "BLOSUM62": config.pad_len * 20,
        "DDE": 400,
        "PAAC": 20 + config.lam,
        "APAAC": 20 + 2 * config.lam,
        "Zscale": config.pad_len * 5,
    }


def column_names(ids, config: DescriptorConfig = DEFAULT_CONFIG) -> list[str]:
    """One informative name per output column, in encoding order."""
    names: list[str] = []
    aa2 = ["".join(p) for p in itertools.product(AMINO_ACIDS, repeat=2)]
    aa3 = ["".join(p) for p in itertools.product(AMINO_ACIDS, repeat=3)]
    g2 = [f"{a}.{b}" for a in GROUP_NAMES for b in GROUP_NAMES]
    nw = _windows(config)
    for did in ids:
        if did == "AAC":
            names += [f"AAC_{a}" for a in AMINO_ACIDS]
        elif did == "DPC":
            names += [f"DPC_{p}" for p in aa2]
        elif did == "TPC":
            names += [f"TPC_{p}" for p in aa3]
        elif did == "GAAC":
            names += [f"GAAC_{g}" for g in GROUP_NAMES]
        elif did == "GDPC":
            names += [f"GDPC_{p}" for p in g2]
        elif did == "GTPC":
            names += [f"GTPC_{a}.{b}" for a in g2 for b in GROUP_NAMES]
        elif did == "CTDC":
            names += [
                f"CTDC_{prop}.G{c}"
                for prop, _ in _tables.ctd_groups()
                for c in (1, 2, 3)
            ]
        elif did == "CTDT":
            names += [
                f"CTDT_{prop}.T{a}{b}"
                for prop, _ in _tables.ctd_groups()
                for a, b in ((1, 2), (1, 3), (2, 3))
            ]
        elif did == "CTDD":
            names += [
                f"CTDD_{prop}.G{c}.p{q}"
                for prop, _ in _tables.ctd_groups()
                for c in (1, 2, 3)
                for q in (0, 25, 50, 75, 100)
            ]
        elif did == "CTriad":
            gs = sorted(_tables.group_table("ctriad_groups.tsv"))
            names += [f"CTriad_{a}.{b}.{c}" for a in gs for b in gs for c in gs]
        elif did == "EAAC":
            names += [f"EAAC_w{w + 1}.{a}" for w in range(nw) for a in AMINO_ACIDS]
        elif did == "EGAAC":
            names += [f"EGAAC_w{w + 1}.{g}" for w in range(nw) for g in GROUP_NAMES]
        elif did == "CKSAAP":
            names += [
                f"CKSAAP_{p}.gap{g}" for g in range(config.k_max + 1) for p in aa2
            ]
        elif did == "CKSAAGP":
            names += [
                f"CKSAAGP_{p}.gap{g}" for g in range(config.k_max + 1) for p in g2
            ]
        elif did == "Binary":
            names += [
                f"Binary_p{i + 1}.{a}"
                for i in range(config.pad_len)
                for a in AMINO_ACIDS
            ]
        elif did == "BLOSUM62":
            table = _tables.matrix_table("blosum62.tsv")
            cols = list(next(iter(table.values())))
            names += [
                f"BLOSUM62_p{i + 1}.{c}" for i in range(config.pad_len) for c in cols
            ]
        elif did == "DDE":
            names += [f"DDE_{p}" for p in aa2]
        elif did == "PAAC":
            names += [f"PAAC_{a}" for a in AMINO_ACIDS]
            names += [f"PAAC_lambda{n}" for n in range(1, config.lam + 1)]
        elif did == "APAAC":
            names += [f"APAAC_{a}" for a in AMINO_ACIDS]
            names += [
                f"APAAC_{prop}.{n}"
                for n in range(1, config.lam + 1)
                for prop in ("hydrophobicity", "hydrophilicity")
            ]
        elif did == "Zscale":
            names += [
                f"Zscale_p{i + 1}.z{z + 1}"
                for i in range(config.pad_len)
                for z in range(5)
            ]
        else:
            raise ValidationError(f"unknown descriptor {did!r}")
    return names


def encode_matrix(ids, peptides, config: DescriptorConfig = DEFAULT_CONFIG):
    """Raw (un-normalized) concatenated descriptor rows for many peptides."""
    if not ids:
        raise ValidationError("descriptor list must be non-empty")
    if len(set(ids)) != len(ids):
        raise ValidationError("descriptor list contains duplicates")
    rows = [
        np.concatenate([encode(did, p, config) for did in ids]) for p in peptides
    ]
    return np.stack(rows) if rows else np.zeros((0, sum(descriptor_dims(config)[d] for d in ids)))


@dataclass
class FeatureScaler:
    """Per-column z-score statistics fitted on training rows only.

    Zero-variance columns keep unit scale so they normalize to zero.
    """

    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, rows: np.ndarray) -> "FeatureScaler":
        mean = rows.mean(axis=0)
        std = rows.std(axis=0)
        scale = np.where(std == 0, 1.0, std)
        return cls(mean, scale)

    def transform(self, rows: np.ndarray) -> np.ndarray:
        return (rows - self.mean) / self.scale


@dataclass
class FeatureMatrix:
    ids: tuple[str, ...]
    config: DescriptorConfig
    values: np.ndarray
    scaler: FeatureScaler

    def transform_peptides(self, peptides) -> np.ndarray:
        raw = encode_matrix(self.ids, peptides, self.config)
        return self.scaler.transform(raw)


def encode_set(
    ids,
    peptides,
    fit_rows=None,
    config: DescriptorConfig = DEFAULT_CONFIG,
) -> FeatureMatrix:
    """Concatenate descriptors in the given order and z-score the columns.

    Statistics are fitted on fit_rows (row indices; defaults to all rows)
    and applied to every row, so held-out rows never leak into the scaler.
    """
    raw = encode_matrix(ids, peptides, config)
    fit = raw if fit_rows is None else raw[np.asarray(fit_rows)]
    if fit.shape[0] == 0:
        raise ValidationError("fit_rows selects no rows")
    scaler = FeatureScaler.fit(fit)
    return FeatureMatrix(tuple(ids), config, scaler.transform(raw), scaler)
