"""Bit-packed Hamming index, top-k ranking, and retrieval metrics.

Codes are K-bit vectors over {-1,+1}; bit b = 1 in the packed form means
code value +1, with the LSB of byte 0 holding bit 0. Distances run over
uint64 words with a vectorized popcount; padding bits are packed as zero
on both sides so they never contribute.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument, InvalidState


def pack_codes(codes: np.ndarray) -> np.ndarray:
    """Pack (+-1)-valued rows into uint8 rows of ceil(K/8) bytes, LSB-first."""
    c = np.atleast_2d(np.asarray(codes))
    if not np.isin(c, (-1, 1)).all():
        raise InvalidArgument("codes must be +-1 valued")
    bits = (c > 0).astype(np.uint8)
    return np.packbits(bits, axis=1, bitorder="little")


def unpack_codes(packed: np.ndarray, code_length: int) -> np.ndarray:
    """Inverse of pack_codes; returns int8 rows over {-1,+1}."""
    p = np.atleast_2d(np.asarray(packed, dtype=np.uint8))
    bits = np.unpackbits(p, axis=1, bitorder="little")[:, :code_length]
    return (bits.astype(np.int8) * 2 - 1).astype(np.int8)


def _to_words(packed: np.ndarray) -> np.ndarray:
    """Zero-pad packed byte rows to a multiple of 8 and view as uint64 words."""
    n, nbytes = packed.shape
    width = -(-nbytes // 8) * 8
    if width != nbytes:
        buf = np.zeros((n, width), dtype=np.uint8)
        buf[:, :nbytes] = packed
        packed = buf
    return np.ascontiguousarray(packed).view(np.uint64)


def hamming_distance(a: np.ndarray, b: np.ndarray) -> int:
    """Number of differing bits between two +-1 codes of equal length."""
    av = np.asarray(a).ravel()
    bv = np.asarray(b).ravel()
    if av.shape != bv.shape:
        raise InvalidArgument(f"code lengths differ: {av.shape[0]} vs {bv.shape[0]}")
    wa = _to_words(pack_codes(av))
    wb = _to_words(pack_codes(bv))
    return int(np.bitwise_count(wa ^ wb).sum())


@dataclass(frozen=True)
class QueryResult:
    """Top-k items, ascending distance, ties broken by ascending id."""

    ids: np.ndarray
    distances: np.ndarray

    def __len__(self):
        return len(self.ids)


class RetrievalIndex:
    """Immutable linear-scan index over packed codes with parallel labels."""

    def __init__(self, codes: np.ndarray, labels: np.ndarray, code_length: int):
        packed = np.atleast_2d(np.asarray(codes, dtype=np.uint8))
        labels = np.atleast_2d(np.asarray(labels))
        if packed.shape[0] != labels.shape[0]:
            raise InvalidArgument(
                f"codes ({packed.shape[0]}) and labels ({labels.shape[0]}) differ in length"
            )
        if packed.shape[0] < 1:
            raise InvalidState("index is empty")
        if packed.shape[1] != -(-code_length // 8):
            raise InvalidArgument(
                f"packed width {packed.shape[1]} inconsistent with K={code_length}"
            )
        self.code_length = int(code_length)
        self.size = packed.shape[0]
        self._packed = packed
        self._words = _to_words(packed)
        self.labels = labels.astype(np.uint8)

    @classmethod
    def from_signs(cls, codes: np.ndarray, labels: np.ndarray) -> "RetrievalIndex":
        c = np.atleast_2d(np.asarray(codes))
        return cls(pack_codes(c), labels, c.shape[1])

    @property
    def packed_codes(self) -> np.ndarray:
        return self._packed

    def distances(self, query_code: np.ndarray) -> np.ndarray:
        """Hamming distance from one +-1 query code to every indexed code."""
        q = np.asarray(query_code).ravel()
        if q.shape[0] != self.code_length:
            raise InvalidArgument(
                f"query length {q.shape[0]} != index code length {self.code_length}"
            )
        qw = _to_words(pack_codes(q))
        return np.bitwise_count(self._words ^ qw).sum(axis=1).astype(np.int64)

    def query_topk(self, query_code: np.ndarray, k: int) -> QueryResult:
        if k < 1:
            raise InvalidArgument(f"k must be >= 1, got {k}")
        d = self.distances(query_code)
        k = min(k, self.size)
        if k < self.size:
            part = np.argpartition(d, k - 1)[:k]
            thresh = d[part].max()
            cand = np.flatnonzero(d <= thresh)  # ascending id already
        else:
            cand = np.arange(self.size)
        order = np.argsort(d[cand], kind="stable")  # stable keeps id tie rule
        ids = cand[order][:k]
        return QueryResult(ids=ids, distances=d[ids])


def relevance(query_label: np.ndarray, index: RetrievalIndex) -> np.ndarray:
    """Boolean mask: an item is relevant if it shares any active class."""
    q = np.asarray(query_label).ravel()
    return (index.labels @ q.astype(np.int64)) > 0


def average_precision(
    query_label: np.ndarray,
    ranking: QueryResult,
    index: RetrievalIndex,
    r_cap: int | None = None,
) -> float:
    """(1/M) sum over relevant ranks r <= r_cap of precision@r.

    M counts relevant items in the whole retrieval set; returns 0 when M = 0.
    """
    rel_mask = relevance(query_label, index)
    m = int(rel_mask.sum())
    if m == 0:
        return 0.0
    cap = len(ranking.ids) if r_cap is None else min(r_cap, len(ranking.ids))
    rel = rel_mask[ranking.ids[:cap]].astype(np.float64)
    cum = np.cumsum(rel)
    ranks = np.arange(1, cap + 1, dtype=np.float64)
    return float(np.sum(rel * cum / ranks) / m)


def mean_average_precision(
    query_codes: np.ndarray,
    query_labels: np.ndarray,
    index: RetrievalIndex,
    r_cap: int | None = None,
) -> float:
    """Mean AP over queries; query codes are +-1 rows."""
    qc = np.atleast_2d(np.asarray(query_codes))
    ql = np.atleast_2d(np.asarray(query_labels))
    if qc.shape[0] < 1:
        raise InvalidArgument("empty query set")
    cap = index.size if r_cap is None else min(r_cap, index.size)
    aps = []
    for code, label in zip(qc, ql):
        ranking = index.query_topk(code, cap)
        aps.append(average_precision(label, ranking, index, cap))
    return float(np.mean(aps))


def curves(
    query_codes: np.ndarray,
    query_labels: np.ndarray,
    index: RetrievalIndex,
    k_grid: list[int],
) -> list[tuple[int, float, float]]:
    """(k, mAP@k, Recall@k) rows for a strictly increasing k grid."""
    ks = list(k_grid)
    if any(b <= a for a, b in zip(ks, ks[1:])):
        raise InvalidArgument("k_grid must be strictly increasing")
    qc = np.atleast_2d(np.asarray(query_codes))
    ql = np.atleast_2d(np.asarray(query_labels))
    kmax = min(max(ks), index.size)
    rows = []
    rankings = [index.query_topk(code, kmax) for code in qc]
    for k in ks:
        kk = min(k, index.size)
        aps, recalls = [], []
        for ranking, label in zip(rankings, ql):
            aps.append(average_precision(label, ranking, index, kk))
            rel_mask = relevance(label, index)
            m = int(rel_mask.sum())
            hit = int(rel_mask[ranking.ids[:kk]].sum())
            recalls.append(hit / m if m > 0 else 0.0)
        rows.append((k, float(np.mean(aps)), float(np.mean(recalls))))
    return rows


def random_ranking_map(
    query_labels: np.ndarray, index: RetrievalIndex, seed: int = 0
) -> float:
    """mAP of a uniformly random ranking; the no-learning baseline."""
    rng = np.random.default_rng(seed)
    ql = np.atleast_2d(np.asarray(query_labels))
    aps = []
    for label in ql:
        perm = rng.permutation(index.size)
        ranking = QueryResult(ids=perm, distances=np.zeros(index.size, dtype=np.int64))
        aps.append(average_precision(label, ranking, index))
    return float(np.mean(aps))
