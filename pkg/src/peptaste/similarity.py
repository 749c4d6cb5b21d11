"""Global sequence alignment with affine gaps, and similarity-graph clustering.

Alignment uses the three-state (match / delete / insert) dynamic program
where a gap of length g costs gap_open + (g-1) * gap_extend; switching
directly between gap states opens a new gap.  End gaps are penalized like
internal ones.  Normalized similarity divides the pair score by the larger
self-alignment score, so identical sequences score exactly 1 and values
are clamped into [0, 1].
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ValidationError

NEG_INF = -1e30


@dataclass(frozen=True)
class AlignParams:
    match: float = 2.0
    mismatch: float = -1.0
    gap_open: float = -0.5
    gap_extend: float = -0.1

    def __post_init__(self):
        if not (self.match > 0 > self.mismatch):
            raise ConfigError("alignment requires match > 0 > mismatch")
        if self.gap_open > 0 or self.gap_extend > 0:
            raise ConfigError("gap penalties must be <= 0")
        if abs(self.gap_extend) > abs(self.gap_open):
            raise ConfigError("|gap_extend| must not exceed |gap_open|")


DEFAULT_PARAMS = AlignParams()

# DP states
_M, _X, _Y = 0, 1, 2  # match/mismatch, gap in b (consume a), gap in a (consume b)


@dataclass(frozen=True)
class Alignment:
    score: float
    aligned_a: str
    aligned_b: str


def _as_seq(s) -> str:
    seq = str(s)
    if not seq:
        raise ValidationError("cannot align an empty sequence")
    return seq


def nw_align(a, b, params: AlignParams = DEFAULT_PARAMS) -> Alignment:
    """Optimal global alignment with affine gaps, with traceback.

    Tie-breaking is deterministic: match is preferred over a gap in b
    ("delete"), which is preferred over a gap in a ("insert").
    """
    sa, sb = _as_seq(a), _as_seq(b)
    la, lb = len(sa), len(sb)
    op, ext = params.gap_open, params.gap_extend

    score = np.full((3, la + 1, lb + 1), NEG_INF)
    # back[state, i, j] = predecessor state
    back = np.zeros((3, la + 1, lb + 1), dtype=np.int8)
    score[_M, 0, 0] = 0.0
    for i in range(1, la + 1):
        score[_X, i, 0] = op + (i - 1) * ext
        back[_X, i, 0] = _X if i > 1 else _M
    for j in range(1, lb + 1):
        score[_Y, 0, j] = op + (j - 1) * ext
        back[_Y, 0, j] = _Y if j > 1 else _M

    for i in range(1, la + 1):
        for j in range(1, lb + 1):
            sub = params.match if sa[i - 1] == sb[j - 1] else params.mismatch
            # order encodes the tie preference M > X > Y
            cand = (
                score[_M, i - 1, j - 1],
                score[_X, i - 1, j - 1],
                score[_Y, i - 1, j - 1],
            )
            st = int(np.argmax(cand))
            score[_M, i, j] = cand[st] + sub
            back[_M, i, j] = st

            cand = (
                score[_M, i - 1, j] + op,
                score[_X, i - 1, j] + ext,
                score[_Y, i - 1, j] + op,
            )
            st = int(np.argmax(cand))
            score[_X, i, j] = cand[st]
            back[_X, i, j] = st

            cand = (
                score[_M, i, j - 1] + op,
                score[_X, i, j - 1] + op,
                score[_Y, i, j - 1] + ext,
            )
            st = int(np.argmax(cand))
            score[_Y, i, j] = cand[st]
            back[_Y, i, j] = st

    finals = (score[_M, la, lb], score[_X, la, lb], score[_Y, la, lb])
    state = int(np.argmax(finals))
    best = finals[state]

    out_a, out_b = [], []
    i, j = la, lb
    while i > 0 or j > 0:
        prev = back[state, i, j]
        if state == _M:
            out_a.append(sa[i - 1])
            out_b.append(sb[j - 1])
            i, j = i - 1, j - 1
        elif state == _X:
            out_a.append(sa[i - 1])
            out_b.append("-")
            i -= 1
        else:
            out_a.append("-")
            out_b.append(sb[j - 1])
            j -= 1
        state = int(prev)
    return Alignment(float(best), "".join(reversed(out_a)), "".join(reversed(out_b)))


def nw_score_block(
    query, refs, params: AlignParams = DEFAULT_PARAMS
) -> np.ndarray:
    """Alignment scores of one query against many references, vectorized.

    Row i of the DP depends only on row i-1 for the M and X states; the Y
    state is a running max along the row, folded with maximum.accumulate.
    Produces identical scores to nw_align.
    """
    sq = _as_seq(query)
    seqs = [_as_seq(r) for r in refs]
    if not seqs:
        return np.zeros(0)
    kmax = max(len(s) for s in seqs)
    n = len(seqs)
    lens = np.array([len(s) for s in seqs])
    # references as byte codes, padded with a sentinel that never matches
    codes = np.full((n, kmax), -1, dtype=np.int16)
    for r, s in enumerate(seqs):
        codes[r, : len(s)] = np.frombuffer(s.encode("ascii"), dtype=np.uint8)

    op, ext = params.gap_open, params.gap_extend
    la = len(sq)

    m_prev = np.full((n, kmax + 1), NEG_INF)
    x_prev = np.full((n, kmax + 1), NEG_INF)
    y_prev = np.full((n, kmax + 1), NEG_INF)
    m_prev[:, 0] = 0.0
    js = np.arange(1, kmax + 1)
    y_prev[:, 1:] = op + (js - 1) * ext

    for i in range(1, la + 1):
        qc = ord(sq[i - 1])
        sub = np.where(codes == qc, params.match, params.mismatch)
        m_row = np.full((n, kmax + 1), NEG_INF)
        x_row = np.full((n, kmax + 1), NEG_INF)
        diag = np.maximum(np.maximum(m_prev, x_prev), y_prev)
        m_row[:, 1:] = diag[:, :-1] + sub
        x_row[:, 0] = op + (i - 1) * ext
        x_row[:, 1:] = np.maximum(
            np.maximum(m_prev[:, 1:] + op, y_prev[:, 1:] + op),
            x_prev[:, 1:] + ext,
        )
        # y_row[j] = max over j' < j of (max(m_row, x_row)[j'] + op + (j-1-j')*ext)
        base = np.maximum(m_row, x_row) + op - ext * np.arange(kmax + 1)
        run = np.maximum.accumulate(base, axis=1)
        y_row = np.full((n, kmax + 1), NEG_INF)
        y_row[:, 1:] = run[:, :-1] + ext * (js - 1)
        m_prev, x_prev, y_prev = m_row, x_row, y_row

    final = np.maximum(np.maximum(m_prev, x_prev), y_prev)
    return final[np.arange(n), lens]


def nw_score(a, b, params: AlignParams = DEFAULT_PARAMS) -> float:
    return float(nw_score_block(a, [b], params)[0])


def self_score(a, params: AlignParams = DEFAULT_PARAMS) -> float:
    return params.match * len(_as_seq(a))


def normalized_similarity(a, b, params: AlignParams = DEFAULT_PARAMS) -> float:
    """score(a, b) / max(self scores), clamped below at 0."""
    denom = max(self_score(a, params), self_score(b, params))
    return max(nw_score(a, b, params) / denom, 0.0)


def similarity_matrix(
    seqs, params: AlignParams = DEFAULT_PARAMS, workers: int = 1
) -> np.ndarray:
    """Symmetric matrix of pairwise normalized similarities (diagonal 1)."""
    seqs = [_as_seq(s) for s in seqs]
    n = len(seqs)
    sim = np.eye(n)
    selfs = np.array([self_score(s, params) for s in seqs])

    def fill_row(i):
        if i + 1 >= n:
            return i, np.zeros(0)
        raw = nw_score_block(seqs[i], seqs[i + 1 :], params)
        denom = np.maximum(selfs[i], selfs[i + 1 :])
        return i, np.maximum(raw / denom, 0.0)

    if workers > 1 and n > 2:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(fill_row, range(n)))
    else:
        rows = [fill_row(i) for i in range(n)]
    for i, vals in rows:
        sim[i, i + 1 :] = vals
        sim[i + 1 :, i] = vals
    return sim


def build_components(
    seqs,
    params: AlignParams = DEFAULT_PARAMS,
    threshold: float = 0.70,
    workers: int = 1,
    sim: np.ndarray | None = None,
) -> list[list[int]]:
    """Connected components of the similarity graph (edges >= threshold).

    Clusters are ordered by their smallest member index; members ascend.
    """
    if not 0 < threshold <= 1:
        raise ConfigError(f"threshold must be in (0, 1], got {threshold}")
    if sim is None:
        sim = similarity_matrix(seqs, params, workers=workers)
    n = sim.shape[0]
    seen = np.zeros(n, dtype=bool)
    clusters = []
    for start in range(n):
        if seen[start]:
            continue
        stack = [start]
        seen[start] = True
        members = []
        while stack:
            u = stack.pop()
            members.append(u)
            neighbors = np.nonzero((sim[u] >= threshold) & ~seen)[0]
            seen[neighbors] = True
            stack.extend(int(v) for v in neighbors)
        clusters.append(sorted(members))
    return clusters


def pick_representatives(clusters, sim: np.ndarray) -> list[int]:
    """Per cluster, the member with maximal mean similarity to the others.

    Singletons represent themselves; ties go to the lowest index.
    """
    reps = []
    for members in clusters:
        if len(members) == 1:
            reps.append(members[0])
            continue
        idx = np.array(members)
        block = sim[np.ix_(idx, idx)]
        means = (block.sum(axis=1) - np.diag(block)) / (len(members) - 1)
        reps.append(members[int(np.argmax(means))])
    return reps
