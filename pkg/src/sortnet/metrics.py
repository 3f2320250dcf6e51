"""Ranking quality measures: P@n, AP/MAP and NDCG@n.

Every function takes ratings in ranked order, position 1 first. A rating
greater than zero counts as relevant for the binary measures.
"""
from __future__ import annotations

import csv
import math
import re
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

REPORT_DEPTH = 10


def _ratings(ratings) -> np.ndarray:
    r = np.asarray(ratings, dtype=np.float64).ravel()
    if np.any(r < 0):
        raise ValueError("ratings must be non-negative")
    return r


def _check_depth(n, length):
    if int(n) != n or not 1 <= n <= length:
        raise ValueError(f"cutoff n={n} outside 1..{length}")


def precision_at(ratings, n: int) -> float:
    r = _ratings(ratings)
    _check_depth(n, len(r))
    return float(np.count_nonzero(r[:n] > 0)) / n


def average_precision(ratings) -> Optional[float]:
    """Mean of P@n over the positions of the relevant documents.

    Returns None for a list without relevant documents.
    """
    ap = _ap_fraction(ratings)
    return None if ap is None else float(ap)


def _ap_fraction(ratings) -> Optional[Fraction]:
    # exact rational sum over the relevant positions only, so cost is O(#relevant)
    positions = np.flatnonzero(_ratings(ratings) > 0)
    if len(positions) == 0:
        return None
    return sum(Fraction(k, int(p) + 1) for k, p in enumerate(positions, start=1)) / len(positions)


def mean_average_precision(lists: Sequence) -> float:
    """Mean AP over the queries that have at least one relevant document."""
    aps = [ap for ap in map(_ap_fraction, lists) if ap is not None]
    if not aps:
        raise ValueError("no query with a relevant document; MAP is undefined")
    return float(sum(aps) / len(aps))


def dcg_at(ratings, n: int) -> float:
    r = _ratings(ratings)
    _check_depth(n, len(r))
    # correctly rounded sum, so the value does not depend on summation order
    return math.fsum((2.0 ** float(v) - 1.0) / math.log(j + 2) for j, v in enumerate(r[:n]))


def ndcg_at(ratings, n: int) -> float:
    """DCG@n divided by the DCG@n of the ideal (descending) ordering; 0 if that is 0."""
    r = _ratings(ratings)
    _check_depth(n, len(r))
    ideal = dcg_at(np.sort(r)[::-1], n)
    if ideal == 0.0:
        return 0.0
    return dcg_at(r, n) / ideal


class RankQuality:
    """Parsed ranking measure: ``map``, ``p@k`` or ``ndcg@k``.

    Calling it on a list of per-query rating lists gives the macro mean
    over queries (MAP skips queries without relevant documents).
    """

    _pattern = re.compile(r"^(map|p@(\d+)|ndcg@(\d+))$")

    def __init__(self, measure: str = "map"):
        m = self._pattern.match(measure.strip().lower())
        if not m:
            raise ValueError(f"rank quality must be map, p@K or ndcg@K; got {measure!r}")
        self.name = m.group(1).split("@")[0]
        k = m.group(2) or m.group(3)
        self.k = int(k) if k else None
        if self.k is not None and self.k < 1:
            raise ValueError("cutoff must be >= 1")

    def __str__(self):
        return self.name if self.k is None else f"{self.name}@{self.k}"

    def __repr__(self):
        return f"RankQuality({str(self)!r})"

    def __call__(self, lists) -> float:
        lists = list(lists)
        if self.name == "map":
            return mean_average_precision(lists)
        fn = precision_at if self.name == "p" else ndcg_at
        return float(np.mean([fn(r, min(self.k, len(r))) for r in lists]))


def query_report(ratings) -> dict:
    """AP, P@1..10 and NDCG@1..10 for one ranked list.

    Cutoffs beyond the list length are reported as NaN.
    """
    r = _ratings(ratings)
    row = {}
    for n in range(1, REPORT_DEPTH + 1):
        row[f"P@{n}"] = precision_at(r, n) if n <= len(r) else math.nan
    for n in range(1, REPORT_DEPTH + 1):
        row[f"NDCG@{n}"] = ndcg_at(r, n) if n <= len(r) else math.nan
    ap = average_precision(r)
    row["MAP"] = math.nan if ap is None else ap
    return row


REPORT_COLUMNS = (
    [f"P@{n}" for n in range(1, REPORT_DEPTH + 1)]
    + [f"NDCG@{n}" for n in range(1, REPORT_DEPTH + 1)]
    + ["MAP"]
)


def metric_report(rankings: dict) -> tuple[dict, dict]:
    """Per-query rows and the macro-averaged aggregate row.

    ``rankings`` maps query id to ratings in ranked order. In a per-query
    row the ``MAP`` column holds that query's AP.
    """
    rows = {qid: query_report(r) for qid, r in rankings.items()}
    aggregate = {}
    for col in REPORT_COLUMNS:
        values = np.array([row[col] for row in rows.values()], dtype=np.float64)
        values = values[~np.isnan(values)]
        aggregate[col] = float(values.mean()) if values.size else math.nan
    return rows, aggregate


def write_report_csv(rows: dict, aggregate: dict, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["query"] + REPORT_COLUMNS)
        for qid, row in rows.items():
            writer.writerow([qid] + [repr(row[c]) for c in REPORT_COLUMNS])
        writer.writerow(["all"] + [repr(aggregate[c]) for c in REPORT_COLUMNS])


def format_report(aggregate: dict, title: str = "") -> str:
    """Tables 1-2 style text: one row for P@n, one for NDCG@n, then MAP."""
    head = f"{title:<8}" + "".join(f"{f'n={n}':>8}" for n in range(1, REPORT_DEPTH + 1))
    lines = [head]
    for prefix in ("P", "NDCG"):
        cells = "".join(f"{aggregate[f'{prefix}@{n}']:>8.4f}" for n in range(1, REPORT_DEPTH + 1))
        lines.append(f"{prefix + '@n':<8}" + cells)
    lines.append(f"{'MAP':<8}{aggregate['MAP']:>8.4f}")
    return "\n".join(lines) + "\n"
