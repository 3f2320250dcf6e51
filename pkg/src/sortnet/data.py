"""LETOR-style query-document data.

Lines look like::

    <label> qid:<id> 1:<v> 2:<v> ... d:<v> #docid = <id>

Feature indices are 1-based in the file and 0-based in memory. Every line
must list all features 1..d.
"""
from __future__ import annotations

import io
import re
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional, TextIO

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils import check_random_state
from sklearn.utils.validation import check_array

N_FOLDS = 5


class DataError(ValueError):
    """Malformed or inconsistent ranking data."""


@dataclass(frozen=True, eq=False)
class Document:
    query_id: str
    doc_id: str
    label: int
    features: np.ndarray

    @property
    def relevant(self) -> bool:
        return self.label >= 1

    def __eq__(self, other):
        if not isinstance(other, Document):
            return NotImplemented
        return (
            (self.query_id, self.doc_id, self.label) == (other.query_id, other.doc_id, other.label)
            and np.array_equal(self.features, other.features)
        )

    __hash__ = None


@dataclass(eq=True)
class QueryGroup:
    query_id: str
    documents: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.documents)

    def __iter__(self):
        return iter(self.documents)

    @property
    def X(self) -> np.ndarray:
        return np.array([d.features for d in self.documents], dtype=np.float64)

    @property
    def labels(self) -> np.ndarray:
        return np.array([d.label for d in self.documents], dtype=int)

    @property
    def doc_ids(self) -> list:
        return [d.doc_id for d in self.documents]


_DOCID = re.compile(r"docid\s*=\s*(\S+)")


def _parse_line(line: str, lineno: int, n_features: Optional[int]):
    body, _, comment = line.partition("#")
    tokens = body.split()
    if len(tokens) < 3:
        raise DataError(f"line {lineno}: expected '<label> qid:<id> <idx>:<value> ...'")
    try:
        label = int(float(tokens[0]))
    except ValueError:
        raise DataError(f"line {lineno}: bad label {tokens[0]!r}") from None
    key, _, qid = tokens[1].partition(":")
    if key != "qid" or not qid:
        raise DataError(f"line {lineno}: expected qid:<id>, got {tokens[1]!r}")
    values = {}
    for tok in tokens[2:]:
        idx, sep, val = tok.partition(":")
        try:
            if not sep:
                raise ValueError
            k = int(idx)
            float(val)
        except ValueError:
            raise DataError(f"line {lineno}: bad feature token {tok!r}") from None
        if k < 1:
            raise DataError(f"line {lineno}: feature indices start at 1, got {k}")
        if k in values:
            raise DataError(f"line {lineno}: feature {k} given twice")
        values[k] = float(val)
    d = max(values)
    if n_features is not None and d != n_features or len(values) != d:
        expected = n_features if n_features is not None else d
        raise DataError(
            f"line {lineno}: expected features 1..{expected}, got {len(values)} "
            f"feature(s) with max index {d}"
        )
    features = np.array([values[k] for k in range(1, d + 1)], dtype=np.float64)
    m = _DOCID.search(comment)
    doc_id = m.group(1) if m else None
    return qid, label, features, doc_id


def parse_letor(stream, n_features: Optional[int] = None) -> list[QueryGroup]:
    """Parse LETOR text into query groups, in order of first appearance.

    ``stream`` is an open text file, a path, or an iterable of lines. The
    feature count is taken from the first line unless ``n_features`` is
    given. Documents without a ``docid`` comment get ``<qid>-<line>``.
    """
    if isinstance(stream, (str, bytes)) or hasattr(stream, "__fspath__"):
        with open(stream, encoding="utf-8") as fh:
            return parse_letor(fh, n_features)
    groups: dict[str, QueryGroup] = {}
    for lineno, line in enumerate(stream, start=1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        qid, label, features, doc_id = _parse_line(line, lineno, n_features)
        if n_features is None:
            n_features = len(features)
        doc = Document(qid, doc_id or f"{qid}-{lineno}", label, features)
        groups.setdefault(qid, QueryGroup(qid)).documents.append(doc)
    if not groups:
        raise DataError("no documents in input")
    return list(groups.values())


def parse_letor_string(text: str, n_features: Optional[int] = None) -> list[QueryGroup]:
    return parse_letor(io.StringIO(text), n_features)


def write_letor(groups: Iterable[QueryGroup], stream: TextIO) -> None:
    """Inverse of :func:`parse_letor`; floats use their shortest round-trip repr."""
    for group in groups:
        for doc in group.documents:
            feats = " ".join(f"{k}:{float(v)!r}" for k, v in enumerate(doc.features, start=1))
            stream.write(f"{doc.label} qid:{doc.query_id} {feats} #docid = {doc.doc_id}\n")


def dumps_letor(groups) -> str:
    buf = io.StringIO()
    write_letor(groups, buf)
    return buf.getvalue()


def normalize_features(X) -> np.ndarray:
    """Centre each column on its mean and divide by the column's max |raw value|.

    The divisor uses the raw, uncentred values. Columns that are all zero
    map to zero.
    """
    X = np.asarray(X, dtype=np.float64)
    scale = np.abs(X).max(axis=0)
    out = np.zeros_like(X)
    nz = scale > 0
    # (x - mean) / m computed as x/m - mean(x/m): same value, but the mean is
    # taken in [-1, 1] so tiny or subnormal columns keep full precision
    scaled = X[:, nz] / scale[nz]
    out[:, nz] = scaled - scaled.mean(axis=0)
    return out


def normalize_group(group: QueryGroup) -> QueryGroup:
    if not group.documents:
        raise DataError(f"query {group.query_id} has no documents")
    Z = normalize_features(group.X)
    docs = [replace(doc, features=z) for doc, z in zip(group.documents, Z)]
    return QueryGroup(group.query_id, docs)


def normalize_groups(groups) -> list[QueryGroup]:
    return [normalize_group(g) for g in groups]


def fold_assignment(query_ids, seed=None) -> dict:
    """Round-robin query -> fold map; a seed shuffles the query order first."""
    query_ids = list(query_ids)
    if len(query_ids) < N_FOLDS:
        raise DataError(f"need at least {N_FOLDS} queries for {N_FOLDS}-fold assignment")
    order = list(range(len(query_ids)))
    if seed is not None:
        check_random_state(seed).shuffle(order)
    return {query_ids[j]: pos % N_FOLDS for pos, j in enumerate(order)}


def assemble_folds(groups, fold: int, assignment: Optional[dict] = None, seed=None):
    """Split query groups into ``(train, validation, test)`` for ``fold``.

    Test is fold ``f``, validation fold ``(f + 1) % 5``, train the other
    three. ``assignment`` maps query id to fold; when omitted, queries are
    dealt round-robin (see :func:`fold_assignment`).
    """
    groups = list(groups)
    if not 0 <= fold < N_FOLDS:
        raise ValueError(f"fold must be in 0..{N_FOLDS - 1}, got {fold}")
    if assignment is None:
        assignment = fold_assignment([g.query_id for g in groups], seed)
    missing = [g.query_id for g in groups if g.query_id not in assignment]
    if missing:
        raise DataError(f"queries without a fold: {missing}")
    bad = {f for f in assignment.values() if not 0 <= f < N_FOLDS}
    if bad:
        raise DataError(f"fold numbers out of range: {sorted(bad)}")
    valid_fold = (fold + 1) % N_FOLDS
    train, valid, test = [], [], []
    for g in groups:
        f = assignment[g.query_id]
        (test if f == fold else valid if f == valid_fold else train).append(g)
    return train, valid, test


def groups_from_arrays(X, y, qid=None, doc_ids=None) -> list[QueryGroup]:
    """Build query groups from flat arrays; a missing ``qid`` means one query."""
    X = check_array(X, dtype=np.float64)
    y = np.asarray(y).ravel()
    if y.shape[0] != X.shape[0]:
        raise ValueError("X and y have different numbers of rows")
    qid = np.zeros(X.shape[0], dtype=int) if qid is None else np.asarray(qid).ravel()
    if qid.shape[0] != X.shape[0]:
        raise ValueError("X and qid have different numbers of rows")
    groups: dict[str, QueryGroup] = {}
    for i, (row, label, q) in enumerate(zip(X, y, qid)):
        q = str(q)
        did = str(doc_ids[i]) if doc_ids is not None else str(i)
        groups.setdefault(q, QueryGroup(q)).documents.append(Document(q, did, int(label), row))
    return list(groups.values())


def group_indices(qid, n_samples: int) -> list[np.ndarray]:
    """Row indices of each query, queries in order of first appearance."""
    if qid is None:
        return [np.arange(n_samples)]
    qid = np.asarray(qid).ravel()
    if qid.shape[0] != n_samples:
        raise ValueError("qid must have one entry per row")
    _, first, inverse = np.unique(qid, return_index=True, return_inverse=True)
    order = np.argsort(first, kind="stable")
    return [np.flatnonzero(inverse == k) for k in order]


class QueryNormalizer(TransformerMixin, BaseEstimator):
    """Per-query feature normalisation as a stateless transformer.

    Statistics come from each query's own documents, so ``fit`` only
    records the input width. Pass ``qid`` to ``transform``; without it all
    rows are treated as a single query.
    """

    def fit(self, X, y=None, qid=None):
        X = check_array(X, dtype=np.float64)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X, qid=None):
        X = check_array(X, dtype=np.float64, copy=True)
        if hasattr(self, "n_features_in_") and X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"X has {X.shape[1]} features, normalizer was fitted with {self.n_features_in_}"
            )
        for rows in group_indices(qid, X.shape[0]):
            X[rows] = normalize_features(X[rows])
        return X

    def fit_transform(self, X, y=None, qid=None):
        return self.fit(X, y).transform(X, qid=qid)
