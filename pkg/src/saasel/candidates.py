"""Candidate-set construction, canonical ordering and pruning.

The candidate set holds every activation pattern satisfying the logistic
constraint, ordered canonically: ascending cardinality first, then ascending
lexicographic order of the sorted active-position lists within a
cardinality class. Patterns are stored as packed integer words (bit for
position 1 most significant), for which the intra-class order is simply
descending word value, so the whole ordering is one vectorized lexsort.

Pruning never mutates: both rules return new sets, preserving order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import CapacityError, DimensionError
from .model import LogisticConstraint, Selection

__all__ = [
    "CandidateSet",
    "enumerate_candidates",
    "pick_median",
    "prune_on_feasible",
    "prune_on_infeasible",
    "DEFAULT_BIT_CAP",
]

# 2N <= 24 bits (~16.7M raw patterns) before enumeration refuses.
DEFAULT_BIT_CAP = 24
_CHUNK = 1 << 18


@dataclass(frozen=True)
class CandidateSet:
    """Ordered, duplicate-free collection of candidate selections."""

    node_count: int
    words: np.ndarray  # int64, canonical order

    @property
    def size(self) -> int:
        return int(self.words.size)

    def __len__(self) -> int:
        return self.size

    def is_empty(self) -> bool:
        return self.size == 0

    def selection_at(self, position: int) -> Selection:
        """1-based access following the ordered-set convention."""
        if not (1 <= position <= self.size):
            raise DimensionError(f"position {position} outside 1..{self.size}")
        return Selection.from_word(int(self.words[position - 1]), self.node_count)

    def selections(self) -> list[Selection]:
        return [Selection.from_word(int(w), self.node_count) for w in self.words]

    def cardinalities(self) -> np.ndarray:
        return _popcount(self.words)

    def contains(self, s: Selection) -> bool:
        return bool(np.any(self.words == s.to_word()))

    def to_bit_strings(self) -> list[str]:
        """Debug dump: bit strings (pi then gamma), ordering preserved."""
        width = 2 * self.node_count
        return [format(int(w), f"0{width}b") for w in self.words]


def _popcount(words: np.ndarray) -> np.ndarray:
    return np.bitwise_count(words.astype(np.uint64)).astype(np.int64)


def _canonical_order(words: np.ndarray) -> np.ndarray:
    # primary key: cardinality ascending; secondary: word descending.
    order = np.lexsort((-words, _popcount(words)))
    return words[order]


def enumerate_candidates(
    node_count: int,
    lc: LogisticConstraint | None = None,
    bit_cap: int = DEFAULT_BIT_CAP,
) -> CandidateSet:
    """All 2^(2N) activation patterns filtered by the logistic constraint,
    in canonical order. Refuses when 2N exceeds ``bit_cap``.

    The filter streams over fixed-size chunks so the peak memory stays
    bounded even at the cap.
    """
    width = 2 * node_count
    if width > bit_cap:
        raise CapacityError(
            f"enumeration over {width} bits exceeds the cap of {bit_cap}; "
            "raise the cap explicitly or tighten the logistic constraint "
            "model (exhaustive enumeration does not scale past small N)"
        )
    if lc is not None and lc.num_rows and lc.Phi.shape[1] != width:
        raise DimensionError(
            f"logistic constraint expects {lc.Phi.shape[1]} bits, network has {width}"
        )
    total = 1 << width
    kept: list[np.ndarray] = []
    shifts = np.arange(width - 1, -1, -1, dtype=np.int64)
    for start in range(0, total, _CHUNK):
        words = np.arange(start, min(start + _CHUNK, total), dtype=np.int64)
        if lc is not None and lc.num_rows:
            bits = ((words[:, None] >> shifts[None, :]) & 1).astype(float)
            ok = np.all(bits @ lc.Phi.T <= lc.phi[None, :] + 1e-9, axis=1)
            words = words[ok]
        kept.append(words)
    words = np.concatenate(kept) if kept else np.zeros(0, dtype=np.int64)
    return CandidateSet(node_count, _canonical_order(words))


def pick_median(cs: CandidateSet) -> tuple[int, Selection]:
    """The probe element at 1-based position ceil(size / 2)."""
    if cs.is_empty():
        raise DimensionError("cannot pick from an empty candidate set")
    q = (cs.size + 1) // 2
    return q, cs.selection_at(q)


def _require_member(cs: CandidateSet, s_q: Selection) -> int:
    word = s_q.to_word()
    if not np.any(cs.words == word):
        raise DimensionError(f"selection {s_q.bit_string()} is not in the candidate set")
    return word


def prune_on_feasible(cs: CandidateSet, s_q: Selection) -> CandidateSet:
    """After a feasible probe: drop every candidate with cardinality >= the
    probe's (the probe included); only cheaper candidates remain."""
    _require_member(cs, s_q)
    keep = _popcount(cs.words) < s_q.cardinality()
    return CandidateSet(cs.node_count, cs.words[keep])


def prune_on_infeasible(cs: CandidateSet, s_q: Selection) -> CandidateSet:
    """After an infeasible probe: drop the probe and every candidate whose
    active set is contained in the probe's (bitwise OR with the probe leaves
    the probe unchanged)."""
    word = _require_member(cs, s_q)
    keep = (cs.words & ~np.int64(word)) != 0
    return CandidateSet(cs.node_count, cs.words[keep])
