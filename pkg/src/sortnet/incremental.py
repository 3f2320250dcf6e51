"""Comparator-driven sorting and the incremental SortNet training loop."""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .comparator import BoundComparator, Preference, WeightSharedComparator, init_random
from .metrics import RankQuality
from .training import SUCC_TARGET, PairExample, PairSet, TrainConfig, train_and_validate

logger = logging.getLogger(__name__)


class LabelOracle:
    """Debug comparator answering from ground-truth labels.

    Relevant beats non-relevant; same-class pairs tie. ``inverted`` flips
    every verdict.
    """

    def __init__(self, inverted: bool = False):
        self.inverted = inverted

    def bind(self, group) -> Callable[[int, int], Preference]:
        rel = [d.label >= 1 for d in group.documents]

        def cmp(i, j):
            if rel[i] == rel[j]:
                return Preference.TIE
            verdict = Preference.SUCC if rel[i] else Preference.PREC
            return verdict.flipped() if self.inverted else verdict

        return cmp

    def __repr__(self):
        return f"LabelOracle(inverted={self.inverted})"


def bind_comparator(comparator, group) -> Callable[[int, int], Preference]:
    """Turn a comparator into ``cmp(i, j)`` over the positions of ``group``.

    Accepts a :class:`WeightSharedComparator`, anything with a ``bind``
    method, or a callable on two documents.
    """
    if isinstance(comparator, WeightSharedComparator):
        return BoundComparator(comparator, group.X)
    if hasattr(comparator, "bind"):
        return comparator.bind(group)
    docs = group.documents
    return lambda i, j: comparator(docs[i], docs[j])


def merge_sort(items: list, precedes: Callable) -> list:
    """Stable top-down merge sort.

    ``precedes(a, b)`` is asked only with ``a`` earlier than ``b`` in the
    current order and must return True to keep ``a`` first.
    """
    if len(items) <= 1:
        return list(items)
    mid = len(items) // 2
    left, right = merge_sort(items[:mid], precedes), merge_sort(items[mid:], precedes)
    out = []
    i = j = 0
    while i < len(left) and j < len(right):
        if precedes(left[i], right[j]):
            out.append(left[i])
            i += 1
        else:
            out.append(right[j])
            j += 1
    out.extend(left[i:])
    out.extend(right[j:])
    return out


@dataclass
class RankingResult:
    query_id: str
    order: list
    miscompared: PairSet
    n_comparisons: int = 0

    @property
    def miscompared_ids(self) -> set:
        return {(p.x_id, p.y_id) for p in self.miscompared}


def sort_with_comparator(comparator, group) -> RankingResult:
    """Rank ``group`` best first, collecting mis-compared cross-class pairs.

    A comparison keeps the earlier document first unless the verdict is
    ``PREC``, so ties preserve input order. Whenever a comparison between a
    relevant and a non-relevant document puts the non-relevant one first,
    the pair (relevant, non-relevant) is recorded with target [1, 0].
    """
    docs = group.documents
    if not docs:
        raise ValueError(f"query {group.query_id} has no documents")
    cmp = bind_comparator(comparator, group)
    rel = [d.label >= 1 for d in docs]
    missed = PairSet()
    count = 0

    def precedes(a, b):
        nonlocal count
        count += 1
        keep = cmp(a, b) is not Preference.PREC
        if rel[a] != rel[b]:
            first = a if keep else b
            if not rel[first]:
                r, n = (b, a) if keep else (a, b)
                missed.add(PairExample(
                    docs[r].doc_id, docs[n].doc_id, docs[r].features, docs[n].features,
                    SUCC_TARGET, group.query_id,
                ))
        return keep

    order = merge_sort(list(range(len(docs))), precedes)
    return RankingResult(group.query_id, [docs[k].doc_id for k in order], missed, count)


def ranked_ratings(group, result: RankingResult) -> list:
    labels = {d.doc_id: d.label for d in group.documents}
    return [labels[doc_id] for doc_id in result.order]


def sort_groups(comparator, groups):
    """Sort every group; returns the per-query results and the pooled mis-pairs."""
    results = [sort_with_comparator(comparator, g) for g in groups]
    pooled = PairSet()
    for r in results:
        pooled.update(r.miscompared)
    return results, pooled


@dataclass(frozen=True)
class NetConfig:
    hidden: int = 10
    activation: str = "logistic"
    seed: Optional[int] = 0


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    tp_size: int
    vp_size: int
    vq_score: float


@dataclass
class SortNetResult:
    best: object
    best_score: float
    log: list
    histories: list = field(default_factory=list)
    TP: PairSet = field(default_factory=PairSet)
    VP: PairSet = field(default_factory=PairSet)
    converged: bool = False


def run_sortnet(
    T,
    V,
    rank_quality="map",
    max_iter: int = 20,
    net_cfg: NetConfig = NetConfig(),
    train_cfg: TrainConfig = TrainConfig(),
    initial=None,
    warm_start: bool = True,
) -> SortNetResult:
    """Incremental SortNet training over query groups ``T`` and validation groups ``V``.

    Each iteration sorts every training and validation query with the
    current comparator, scores the validation ranking, keeps the best
    comparator seen (strict improvement), stops if no new mis-compared pair
    turned up, and otherwise grows TP/VP and retrains.

    ``initial`` replaces the random first comparator; a non-network
    comparator such as :class:`LabelOracle` is allowed. With ``warm_start``
    each retrain continues from the current network instead of a fresh
    random one.
    """
    T, V = list(T), list(V)
    if not T or not any(len(g) for g in T):
        raise ValueError("training set T is empty")
    if not V:
        raise ValueError("validation set V is empty")
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    quality = rank_quality if callable(rank_quality) else RankQuality(rank_quality)
    d = len(T[0].documents[0].features)
    current = initial if initial is not None else init_random(
        d, net_cfg.hidden, net_cfg.activation, net_cfg.seed
    )
    TP, VP = PairSet(), PairSet()
    best, best_score = None, -math.inf
    log, histories = [], []
    converged = False
    for i in range(max_iter):
        _, tp_i = sort_groups(current, T)
        v_results, vp_i = sort_groups(current, V)
        score = quality([ranked_ratings(g, r) for g, r in zip(V, v_results)])
        if score > best_score:
            best_score, best = score, current
        if tp_i.issubset(TP) and vp_i.issubset(VP):
            log.append(IterationRecord(i, len(TP), len(VP), score))
            logger.info("iter %d: %s=%.4f, no new mis-compared pairs, stopping", i, quality, score)
            converged = True
            break
        TP.update(tp_i)
        VP.update(vp_i)
        log.append(IterationRecord(i, len(TP), len(VP), score))
        logger.info("iter %d: %s=%.4f |TP|=%d |VP|=%d", i, quality, score, len(TP), len(VP))
        if i == max_iter - 1:
            # a comparator trained now could never be scored
            break
        if len(TP) == 0:
            continue
        if warm_start and isinstance(current, WeightSharedComparator):
            start = current
        else:
            seed = None if net_cfg.seed is None else net_cfg.seed + i + 1
            start = init_random(d, net_cfg.hidden, net_cfg.activation, seed)
        cfg = train_cfg if train_cfg.seed is None else replace(train_cfg, seed=train_cfg.seed + i)
        current, history = train_and_validate(start, TP, VP, cfg)
        histories.append(history)
    return SortNetResult(best, best_score, log, histories, TP, VP, converged)


def write_iteration_csv(log, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["iter", "tp_size", "vp_size", "vq_score"])
        for rec in log:
            writer.writerow([rec.iteration, rec.tp_size, rec.vp_size, repr(rec.vq_score)])


def kendall_distance(order_a, order_b) -> int:
    """Number of item pairs ordered differently by two permutations."""
    pos = {item: k for k, item in enumerate(order_b)}
    ranks = np.array([pos[item] for item in order_a])
    n = len(ranks)
    return int(sum(np.count_nonzero(ranks[k + 1:] < ranks[k]) for k in range(n)))


def shuffle_stability(comparator, group, n_shuffles: int = 5, seed=0) -> dict:
    """Rank ``group`` under several input shuffles and measure the disagreement.

    The reference ranking uses the group's own order. Reports, per shuffle,
    the number of positions holding a different document and the Kendall
    distance to the reference.
    """
    from .data import QueryGroup

    rng = np.random.default_rng(seed)
    reference = sort_with_comparator(comparator, group).order
    positions, kendall = [], []
    for _ in range(n_shuffles):
        perm = rng.permutation(len(group.documents))
        shuffled = QueryGroup(group.query_id, [group.documents[k] for k in perm])
        order = sort_with_comparator(comparator, shuffled).order
        positions.append(sum(a != b for a, b in zip(reference, order)))
        kendall.append(kendall_distance(reference, order))
    return {
        "query_id": group.query_id,
        "n_documents": len(group.documents),
        "n_shuffles": n_shuffles,
        "positional_differences": positions,
        "kendall_distances": kendall,
        "max_positional_difference": max(positions, default=0),
        "max_kendall_distance": max(kendall, default=0),
    }
