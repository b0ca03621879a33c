"""Hash center generation and per-sample semantic centers.

Centers live in {-1,+1}^K. Orthogonal centers come from a Sylvester
Hadamard matrix (rows, then their negations); everything else falls back
to seeded Bernoulli sampling with a minimum-separation acceptance rule.
"""

from dataclasses import dataclass

import numpy as np

from .errors import CapacityError, GenerationFailure, InvalidArgument

# minimum Hamming separation a Bernoulli-sampled center must keep to every
# already accepted center: ceil(K/4)
MAX_RETRIES_PER_CENTER = 1000

METHOD_HADAMARD = "hadamard"
METHOD_HADAMARD_PLUS_BERNOULLI = "hadamard_plus_bernoulli"
METHOD_BERNOULLI = "bernoulli"


def sylvester_hadamard(order: int) -> np.ndarray:
    """Return the order x order Sylvester Hadamard matrix (int8, +-1).

    Rows are mutually orthogonal: H @ H.T == order * I.
    """
    if order < 1 or (order & (order - 1)) != 0:
        raise InvalidArgument(f"Hadamard order must be a power of two >= 1, got {order}")
    h = np.array([[1]], dtype=np.int8)
    while h.shape[0] < order:
        h = np.block([[h, h], [h, -h]]).astype(np.int8)
    return h


def hamming_from_inner(inner_product: int, code_length: int) -> int:
    """Hamming distance from the inner product of two +-1 codes: (K - <a,b>)/2."""
    k = int(code_length)
    ip = int(inner_product)
    if abs(ip) > k:
        raise InvalidArgument(f"|inner product| {ip} exceeds code length {k}")
    if (k - ip) % 2 != 0:
        raise InvalidArgument(f"inner product {ip} has wrong parity for K={k}")
    return (k - ip) // 2


@dataclass(frozen=True)
class HashCenterSet:
    """V mutually well-separated centers of length K, plus how they were made."""

    centers: np.ndarray  # V x K, int8, entries in {-1,+1}
    code_length: int
    num_classes: int
    method: str
    seed: int

    def __post_init__(self):
        c = self.centers
        if c.shape != (self.num_classes, self.code_length):
            raise InvalidArgument(
                f"centers shape {c.shape} != ({self.num_classes}, {self.code_length})"
            )
        if not np.isin(c, (-1, 1)).all():
            raise InvalidArgument("center entries must be -1 or +1")

    def mean_pairwise_inner(self) -> float:
        """(1/T) sum over unordered pairs of <hc_i, hc_j>."""
        v = self.num_classes
        if v < 2:
            raise InvalidArgument("need at least two centers")
        g = self.centers.astype(np.int64) @ self.centers.astype(np.int64).T
        total = (g.sum() - np.trace(g)) / 2
        t = v * (v - 1) // 2
        return float(total) / t


def min_pairwise_distance(center_set: HashCenterSet) -> int:
    """Smallest Hamming distance over all unordered center pairs."""
    c = center_set.centers.astype(np.int64)
    v = c.shape[0]
    if v < 2:
        raise InvalidArgument("need at least two centers")
    g = c @ c.T
    d = (center_set.code_length - g) // 2
    iu = np.triu_indices(v, k=1)
    return int(d[iu].min())


def _min_separation(code_length: int) -> int:
    return -(-code_length // 4)  # ceil(K/4)


def _sample_bernoulli_centers(
    existing: list[np.ndarray], count: int, code_length: int, rng: np.random.Generator
) -> list[np.ndarray]:
    """Draw `count` centers, each kept only if it stays >= ceil(K/4) bits away
    from every accepted center and does not push the running pairwise inner
    product sum positive."""
    min_dist = _min_separation(code_length)
    chosen = list(existing)
    out = []
    for _ in range(count):
        for attempt in range(MAX_RETRIES_PER_CENTER):
            cand = rng.integers(0, 2, size=code_length).astype(np.int8) * 2 - 1
            if not chosen:
                chosen.append(cand)
                out.append(cand)
                break
            inners = np.array([int(cand @ c) for c in chosen])
            dists = (code_length - inners) // 2
            if dists.min() >= min_dist and inners.sum() <= 0:
                chosen.append(cand)
                out.append(cand)
                break
        else:
            achieved = int(dists.min()) if chosen else code_length
            raise GenerationFailure(
                f"no acceptable center after {MAX_RETRIES_PER_CENTER} tries "
                f"(need separation >= {min_dist}, best candidate reached {achieved})"
            )
    return out


def generate_centers(num_classes: int, code_length: int, seed: int) -> HashCenterSet:
    """Generate V centers of K bits.

    If K is a power of two, up to 2K centers come from stacking the Hadamard
    matrix over its negation; any surplus (or all centers when K is not a
    power of two) is Bernoulli-sampled under the acceptance rule.
    """
    v, k = int(num_classes), int(code_length)
    if v < 1:
        raise InvalidArgument(f"num_classes must be >= 1, got {v}")
    if k < 2:
        raise InvalidArgument(f"code_length must be >= 2, got {k}")
    if k < 63 and v > 2**k:
        raise CapacityError(f"{v} classes need more than the 2^{k} distinct codes available")

    rng = np.random.default_rng(seed)
    pow2 = (k & (k - 1)) == 0
    if pow2:
        h = sylvester_hadamard(k)
        stacked = np.vstack([h, -h])
        if v <= 2 * k:
            centers = stacked[:v].copy()
            method = METHOD_HADAMARD
        else:
            extra = _sample_bernoulli_centers(list(stacked), v - 2 * k, k, rng)
            centers = np.vstack([stacked, np.array(extra, dtype=np.int8)])
            method = METHOD_HADAMARD_PLUS_BERNOULLI
    else:
        centers = np.array(_sample_bernoulli_centers([], v, k, rng), dtype=np.int8)
        method = METHOD_BERNOULLI

    out = HashCenterSet(
        centers=centers.astype(np.int8),
        code_length=k,
        num_classes=v,
        method=method,
        seed=int(seed),
    )
    if v >= 2 and out.mean_pairwise_inner() > 0:
        raise GenerationFailure("generated set has positive mean pairwise inner product")
    return out


def semantic_center(
    label_vector: np.ndarray,
    centers: HashCenterSet,
    sample_id: int,
    seed: int = 0,
) -> np.ndarray:
    """Per-sample target center.

    Single-label: the class center verbatim. Multi-label: element-wise
    majority vote over the active labels' centers; a zero column sum is
    broken by a coin seeded with (seed, sample_id, bit) so results are
    reproducible.
    """
    labels = np.asarray(label_vector)
    active = np.flatnonzero(labels)
    if active.size == 0:
        raise InvalidArgument("label vector has no active label")
    if labels.shape[0] != centers.num_classes:
        raise InvalidArgument(
            f"label vector length {labels.shape[0]} != num_classes {centers.num_classes}"
        )
    if active.size == 1:
        return centers.centers[active[0]].copy()

    sums = centers.centers[active].astype(np.int64).sum(axis=0)
    code = np.sign(sums).astype(np.int8)
    for bit in np.flatnonzero(sums == 0):
        coin = np.random.default_rng([int(seed), int(sample_id), int(bit)])
        code[bit] = 1 if coin.integers(0, 2) else -1
    return code


def semantic_centers_for(
    labels: np.ndarray, centers: HashCenterSet, seed: int = 0
) -> np.ndarray:
    """semantic_center applied row-wise; sample_id is the row index."""
    return np.array(
        [semantic_center(row, centers, i, seed) for i, row in enumerate(labels)],
        dtype=np.int8,
    )
