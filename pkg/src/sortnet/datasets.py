"""Synthetic ranking data and the bundled fixtures."""
from __future__ import annotations

import math
from importlib import resources

import numpy as np

from .data import Document, QueryGroup, dumps_letor, parse_letor_string

FIXTURES = {
    # name: (n_queries, docs_per_query, n_features, relevant_fraction, seed)
    "linear-small": (3, 30, 5, 0.1, 11),
    "linear-200": (3, 200, 5, 0.1, 7),
}


def make_linear_utility(
    n_queries: int = 3,
    docs_per_query: int = 200,
    n_features: int = 5,
    relevant_fraction: float = 0.1,
    seed=0,
):
    """Queries whose relevant documents are those with the highest utility ``w . x``.

    Features are standard normal, rounded to 6 decimals so the text form
    is short. Returns ``(groups, w)``.
    """
    rng = np.random.default_rng(seed)
    w = rng.normal(size=n_features)
    n_rel = max(1, math.ceil(relevant_fraction * docs_per_query))
    groups = []
    for q in range(n_queries):
        X = np.round(rng.normal(size=(docs_per_query, n_features)), 6)
        u = X @ w
        top = set(np.argsort(-u, kind="stable")[:n_rel].tolist())
        qid = str(q + 1)
        docs = [
            Document(qid, f"q{qid}d{j}", int(j in top), X[j])
            for j in range(docs_per_query)
        ]
        groups.append(QueryGroup(qid, docs))
    return groups, w


def fixture_text(name: str) -> str:
    groups, _ = make_linear_utility(*FIXTURES[name])
    return dumps_letor(groups)


def fixture_path(name: str):
    """Path of a bundled fixture file (``linear-small`` or ``linear-200``)."""
    if name not in FIXTURES:
        raise KeyError(f"unknown fixture {name!r}; choose from {sorted(FIXTURES)}")
    return resources.files("sortnet") / "fixtures" / f"{name}.txt"


def load_fixture(name: str):
    return parse_letor_string(fixture_path(name).read_text())
