"""
Brute-force k-nearest-neighbors with uniform majority vote.

Candidate neighbors come from the BLAS expansion |q|^2 - 2 q.t + |t|^2 and
are re-ranked by exact squared distances, so the result equals an exhaustive
scan: order by (distance, training index), vote ties go to the tied class
whose member is nearest.
"""

import numpy as np

from csae import config
from csae.classifiers.base import LatentClassifier
from csae.data import LatentDataset
from csae.errors import ConfigError, EmptyDatasetError, TensorShapeError

# distance matrix entries per query chunk
CHUNK_ELEMENTS = 2 ** 22


def nearest_neighbors(train_x: np.ndarray, query: np.ndarray, k: int) -> np.ndarray:
    """Indices [m, k] of the k nearest training rows, nearest first."""
    train_x = np.asarray(train_x, dtype=np.float64)
    query = np.asarray(query, dtype=np.float64)
    n = len(train_x)
    if n == 0:
        raise EmptyDatasetError("kNN needs a non-empty training set")
    if not 1 <= k <= n:
        raise ConfigError(f"k must lie in [1, {n}], got {k}")
    if query.ndim != 2 or query.shape[1] != train_x.shape[1]:
        raise TensorShapeError(f"Query must be [m, {train_x.shape[1]}], got {query.shape}")

    sq_train = np.einsum("ij,ij->i", train_x, train_x)
    sq_query = np.einsum("ij,ij->i", query, query)
    slack_base = float(sq_train.max()) if n else 0.0
    chunk = max(1, CHUNK_ELEMENTS // n)

    result = np.empty((len(query), k), dtype=np.int64)
    for start in range(0, len(query), chunk):
        q = query[start:start + chunk]
        approx = sq_query[start:start + chunk, None] - 2.0 * (q @ train_x.T) + sq_train[None, :]
        for row, dists in enumerate(approx):
            kth = np.partition(dists, k - 1)[k - 1]
            # rounding of the expansion stays far below this margin
            slack = 1e-9 * (sq_query[start + row] + slack_base) + 1e-12
            candidates = np.flatnonzero(dists <= kth + slack)
            exact = np.sum((train_x[candidates] - q[row]) ** 2, axis=1)
            result[start + row] = candidates[np.lexsort((candidates, exact))[:k]]
    return result


def vote(neighbor_labels: np.ndarray) -> np.ndarray:
    """Majority label per row; ties go to the class of the nearest tied member."""
    out = np.empty(len(neighbor_labels), dtype=np.int64)
    for row, labels in enumerate(neighbor_labels):
        values, counts = np.unique(labels, return_counts=True)
        tied = set(values[counts == counts.max()])
        out[row] = next(label for label in labels if label in tied)
    return out


def knn_predict(train: LatentDataset, query: np.ndarray, k: int = config.CLASSIFIERS["knn"]["n_neighbors"]) -> np.ndarray:
    if train.y is None:
        raise ConfigError("kNN training set has no labels")
    neighbors = nearest_neighbors(train.z, query, k)
    return vote(np.asarray(train.y)[neighbors])


class KNearestNeighbors(LatentClassifier):
    name = "knn"

    def __init__(self, n_neighbors=config.CLASSIFIERS["knn"]["n_neighbors"], logger=None):
        self.n_neighbors = n_neighbors
        self.logger = logger

    def _fit(self, X, y):
        self.train_x_ = X
        self.train_y_ = y

    def _predict(self, X):
        if self.logger:
            self.logger.log_verbose(
                f"kNN: {len(X)} queries against {len(self.train_x_)} training rows, k={self.n_neighbors}"
            )
        return vote(self.train_y_[nearest_neighbors(self.train_x_, X, self.n_neighbors)])
