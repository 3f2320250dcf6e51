"""scikit-learn style front end for SortNet."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .comparator import WeightSharedComparator, forward_batch, load
from .data import QueryNormalizer, group_indices, groups_from_arrays
from .incremental import NetConfig, run_sortnet, sort_with_comparator
from .metrics import RankQuality, mean_average_precision
from .training import TrainConfig


class SortNetRanker(BaseEstimator):
    """Learning-to-rank estimator that sorts with a weight-shared neural comparator.

    Parameters
    ----------
    hidden : int
        Number of hidden unit pairs.
    activation : {"logistic", "tanh"}
    max_iter : int
        Maximum number of incremental iterations.
    rank_quality : str
        Validation measure used to pick the best comparator: ``"map"``,
        ``"p@K"`` or ``"ndcg@K"``.
    epochs, learning_rate, batch_size, shuffle
        Settings of each retraining round.
    warm_start : bool
        Continue each retraining round from the current network.
    normalize : bool
        Apply per-query feature normalisation before fitting and ranking.
    random_state : int or None
        Seeds both the initial network and the pair shuffling.

    Attributes
    ----------
    comparator_ : WeightSharedComparator
    best_score_ : float
        Validation score of ``comparator_``.
    log_ : list of IterationRecord
    n_features_in_ : int
    """

    def __init__(
        self,
        hidden=10,
        activation="logistic",
        max_iter=20,
        rank_quality="map",
        epochs=50,
        learning_rate=0.1,
        batch_size=1,
        shuffle=True,
        warm_start=True,
        normalize=True,
        random_state=0,
    ):
        self.hidden = hidden
        self.activation = activation
        self.max_iter = max_iter
        self.rank_quality = rank_quality
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.shuffle = shuffle
        self.warm_start = warm_start
        self.normalize = normalize
        self.random_state = random_state

    def _prepare(self, X, qid):
        if self.normalize:
            return QueryNormalizer().fit_transform(X, qid=qid)
        return X

    def fit(self, X, y, qid=None, eval_set=None):
        """Run incremental SortNet training.

        ``y`` holds relevance labels (>= 1 is relevant) and ``qid`` the query
        of each row. ``eval_set`` is an optional ``(X_val, y_val, qid_val)``
        triple; without it the training queries double as validation set.
        """
        X, y = check_X_y(X, y, dtype=np.float64)
        RankQuality(self.rank_quality)
        self.n_features_in_ = X.shape[1]
        T = groups_from_arrays(self._prepare(X, qid), y, qid)
        if eval_set is None:
            V = T
        else:
            X_val, y_val, *rest = eval_set
            qid_val = rest[0] if rest else None
            X_val, y_val = check_X_y(X_val, y_val, dtype=np.float64)
            if X_val.shape[1] != X.shape[1]:
                raise ValueError("eval_set has a different number of features")
            V = groups_from_arrays(self._prepare(X_val, qid_val), y_val, qid_val)
        seed = self.random_state
        result = run_sortnet(
            T, V,
            rank_quality=self.rank_quality,
            max_iter=self.max_iter,
            net_cfg=NetConfig(self.hidden, self.activation, seed),
            train_cfg=TrainConfig(
                epochs=self.epochs, learning_rate=self.learning_rate, seed=seed,
                shuffle=self.shuffle, batch_size=self.batch_size,
            ),
            warm_start=self.warm_start,
        )
        self.comparator_ = result.best
        self.best_score_ = result.best_score
        self.log_ = result.log
        self.converged_ = result.converged
        return self

    @classmethod
    def from_comparator(cls, comparator, **params):
        """Wrap an already trained comparator, or the path of a saved model."""
        if not isinstance(comparator, WeightSharedComparator):
            comparator = load(comparator)
        est = cls(hidden=comparator.H, activation=comparator.activation, **params)
        est.comparator_ = comparator
        est.n_features_in_ = comparator.d
        return est

    def _check_X(self, X):
        check_is_fitted(self, "comparator_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"X has {X.shape[1]} features, but {type(self).__name__} expects "
                f"{self.n_features_in_}"
            )
        return X

    def rank(self, X, qid=None) -> list:
        """Row indices of each query, best first; queries in order of appearance."""
        X = self._check_X(X)
        Z = self._prepare(X, qid)
        out = []
        for rows in group_indices(qid, X.shape[0]):
            group = groups_from_arrays(Z[rows], np.zeros(len(rows)))[0]
            result = sort_with_comparator(self.comparator_, group)
            out.append(rows[np.array([int(i) for i in result.order], dtype=int)])
        return out

    def predict(self, X, qid=None) -> np.ndarray:
        """0-based rank position of every row within its query."""
        X = self._check_X(X)
        positions = np.empty(X.shape[0], dtype=int)
        for ranked in self.rank(X, qid):
            positions[ranked] = np.arange(len(ranked))
        return positions

    def predict_pair_proba(self, X1, X2) -> np.ndarray:
        """Comparator outputs ``[N_succ, N_prec]`` for each row pair (no normalisation)."""
        X1, X2 = self._check_X(X1), self._check_X(X2)
        _, _, n_s, n_p, _, _ = forward_batch(self.comparator_, X1, X2)
        return np.column_stack([n_s, n_p])

    def predict_pair(self, X1, X2) -> np.ndarray:
        """+1 when row of ``X1`` is preferred, -1 when ``X2`` is, 0 on a tie."""
        proba = self.predict_pair_proba(X1, X2)
        return np.sign(proba[:, 0] - proba[:, 1]).astype(int)

    def score(self, X, y, qid=None) -> float:
        """MAP of the ranking produced for ``X``."""
        X, y = check_X_y(X, y, dtype=np.float64)
        return mean_average_precision([y[r] for r in self.rank(X, qid)])
