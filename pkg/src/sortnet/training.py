"""Pair examples, per-pair gradient descent and validation-based selection."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from typing import Iterable, Iterator, Optional

import numpy as np

from .comparator import (
    NumericFault,
    WeightSharedComparator,
    _activate,
    _backward,
    compare_batch,
)

SUCC_TARGET = (1.0, 0.0)
PREC_TARGET = (0.0, 1.0)


@dataclass(frozen=True, eq=False)
class PairExample:
    """Ordered pair ``<x, y>`` with target [1, 0] when x should rank above y."""

    x_id: str
    y_id: str
    x: np.ndarray
    y: np.ndarray
    target: tuple
    query_id: str = ""

    @property
    def key(self) -> tuple:
        return (self.query_id, self.x_id, self.y_id)


class PairSet:
    """Insertion-ordered set of pair examples, deduplicated by (query, x, y) ids."""

    def __init__(self, pairs: Iterable[PairExample] = ()):
        self._pairs: dict[tuple, PairExample] = {}
        self.update(pairs)

    def add(self, pair: PairExample) -> None:
        self._pairs.setdefault(pair.key, pair)

    def update(self, pairs: Iterable[PairExample]) -> None:
        for p in pairs:
            self.add(p)

    def union(self, other: "PairSet") -> "PairSet":
        out = PairSet(self)
        out.update(other)
        return out

    def issubset(self, other: "PairSet") -> bool:
        return all(k in other._pairs for k in self._pairs)

    def keys(self) -> set:
        return set(self._pairs)

    def __contains__(self, key) -> bool:
        if isinstance(key, PairExample):
            key = key.key
        return key in self._pairs

    def __iter__(self) -> Iterator[PairExample]:
        return iter(self._pairs.values())

    def __len__(self) -> int:
        return len(self._pairs)

    def __repr__(self) -> str:
        return f"PairSet(n={len(self)})"

    def arrays(self):
        """Stack into ``(X, Y, T)`` arrays, rows in insertion order."""
        pairs = list(self._pairs.values())
        if not pairs:
            raise ValueError("empty pair set")
        X = np.array([p.x for p in pairs], dtype=np.float64)
        Y = np.array([p.y for p in pairs], dtype=np.float64)
        T = np.array([p.target for p in pairs], dtype=np.float64)
        return X, Y, T


def build_pairs(documents, query_id: str = "") -> PairSet:
    """Every ordered cross-class pair of ``documents``.

    ``documents`` is a QueryGroup or an iterable of objects with ``doc_id``,
    ``label`` and ``features``; label >= 1 means relevant. Yields
    ``2 * |R| * |NR|`` pairs.
    """
    query_id = getattr(documents, "query_id", query_id)
    docs = list(getattr(documents, "documents", documents))
    relevant = [d for d in docs if d.label >= 1]
    irrelevant = [d for d in docs if d.label < 1]
    out = PairSet()
    for r in relevant:
        for n in irrelevant:
            out.add(PairExample(r.doc_id, n.doc_id, r.features, n.features, SUCC_TARGET, query_id))
            out.add(PairExample(n.doc_id, r.doc_id, n.features, r.features, PREC_TARGET, query_id))
    return out


def build_pairs_all(groups) -> PairSet:
    out = PairSet()
    for group in groups:
        out.update(build_pairs(group))
    return out


def pairwise_accuracy(net: WeightSharedComparator, pairs) -> float:
    """Fraction of pairs whose verdict matches the target; ties count as wrong."""
    pairs = pairs if isinstance(pairs, PairSet) else PairSet(pairs)
    if len(pairs) == 0:
        raise ValueError("pairwise accuracy of an empty pair set is undefined")
    X, Y, T = pairs.arrays()
    want = np.where(T[:, 0] == 1.0, 1, -1)
    return float(np.mean(compare_batch(net, X, Y) == want))


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 50
    learning_rate: float = 0.1
    seed: Optional[int] = 0
    shuffle: bool = True
    batch_size: int = 1

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    tp_mean_loss: float
    vp_accuracy: Optional[float]


class _Params:
    """Mutable working copy of the canonical parameters for the SGD loop."""

    def __init__(self, net: WeightSharedComparator):
        self.activation = net.activation
        self.linear_output = net.linear_output
        self.v_x = net.v_x.copy()
        self.v_y = net.v_y.copy()
        self.b_h = net.b_h.copy()
        self.w_succ = net.w_succ.copy()
        self.w_prec = net.w_prec.copy()
        self.b_out = net.b_out

    def snapshot(self, template: WeightSharedComparator) -> WeightSharedComparator:
        return replace(
            template, v_x=self.v_x.copy(), v_y=self.v_y.copy(), b_h=self.b_h.copy(),
            w_succ=self.w_succ.copy(), w_prec=self.w_prec.copy(), b_out=float(self.b_out),
        )

    def step(self, X, Y, T, lr) -> np.ndarray:
        """Forward, backward and update on a mini-batch; returns per-pair losses.

        The step is taken along the mean gradient of the batch, which for a
        batch of one is plain per-pair gradient descent.
        """
        act = self.activation
        a = X @ self.v_x.T + Y @ self.v_y.T + self.b_h
        a_dual = Y @ self.v_x.T + X @ self.v_y.T + self.b_h
        h, g = _activate(a, act), _activate(a_dual, act)
        z_s = h @ self.w_succ + g @ self.w_prec + self.b_out
        z_p = h @ self.w_prec + g @ self.w_succ + self.b_out
        if self.linear_output:
            n_s, n_p = z_s, z_p
        else:
            n_s, n_p = _activate(z_s, act), _activate(z_p, act)
        e_s, e_p = T[:, 0] - n_s, T[:, 1] - n_p
        losses = e_s * e_s + e_p * e_p
        if not np.all(np.isfinite(losses)):
            raise NumericFault("non-finite loss during training")
        grad = _backward(self, X, Y, T, h, g, n_s, n_p)
        step = lr / X.shape[0]
        for name, block in grad.blocks():
            if not np.all(np.isfinite(block)):
                raise NumericFault(f"non-finite gradient in block {name}")
        self.v_x -= step * grad.v_x
        self.v_y -= step * grad.v_y
        self.b_h -= step * grad.b_h
        self.w_succ -= step * grad.w_succ
        self.w_prec -= step * grad.w_prec
        self.b_out -= step * grad.b_out
        return losses


def train_and_validate(net: WeightSharedComparator, TP, VP, cfg: TrainConfig):
    """Train on ``TP`` for ``cfg.epochs`` epochs, keep the best epoch on ``VP``.

    Returns ``(best_net, history)``. Selection is by pairwise accuracy on
    ``VP`` with ties going to the earliest epoch; with an empty ``VP`` the
    final-epoch net is returned and ``vp_accuracy`` is recorded as None.
    """
    TP = TP if isinstance(TP, PairSet) else PairSet(TP)
    VP = VP if isinstance(VP, PairSet) else PairSet(VP)
    if len(TP) == 0:
        raise ValueError("training pair set is empty")
    X, Y, T = TP.arrays()
    rng = np.random.default_rng(cfg.seed)
    params = _Params(net)
    n = X.shape[0]
    bs = cfg.batch_size
    history: list[EpochRecord] = []
    best_net, best_acc = None, -math.inf
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(n) if cfg.shuffle else np.arange(n)
        total = 0.0
        for start in range(0, n, bs):
            idx = order[start:start + bs]
            total += float(params.step(X[idx], Y[idx], T[idx], cfg.learning_rate).sum())
        current = params.snapshot(net)
        acc = pairwise_accuracy(current, VP) if len(VP) else None
        history.append(EpochRecord(epoch, total / n, acc))
        if acc is None:
            best_net = current
        elif acc > best_acc:
            best_net, best_acc = current, acc
    return best_net, history


def write_history_csv(history, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["epoch", "tp_mean_loss", "vp_accuracy"])
        for rec in history:
            acc = "" if rec.vp_accuracy is None else repr(rec.vp_accuracy)
            writer.writerow([rec.epoch, repr(rec.tp_mean_loss), acc])
