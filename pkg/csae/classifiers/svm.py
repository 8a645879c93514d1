"""
RBF support vector machine trained with simplified SMO, one-vs-one for
more than two classes.

Binary machines use the decision function f(x) = sum_i a_i y_i K(x_i, x) + b
with y in {+1, -1}; the lower class of each pair is +1. SMO sweeps over all
samples and optimizes every KKT violator against a partner chosen by
max |E_i - E_j|, then a random index, then a full scan from a random
offset. Training stops after a sweep that changes nothing or after
``max_passes`` sweeps.
"""

import warnings
from dataclasses import dataclass, field
from itertools import combinations
from typing import List, Optional, Tuple

import numpy as np
from sklearn.exceptions import ConvergenceWarning
from sklearn.metrics.pairwise import rbf_kernel
from sklearn.utils import check_random_state

from csae import config
from csae.classifiers.base import LatentClassifier
from csae.data import LatentDataset
from csae.errors import ConfigError, TensorShapeError

SVM_DEFAULTS = config.CLASSIFIERS["svm"]

# minimum relative change of a multiplier for a step to count
STEP_EPS = 1e-5


@dataclass
class BinarySvm:
    positive: int
    negative: int
    indices: np.ndarray  # rows of the fitted X that belong to this pair
    alphas: np.ndarray  # one multiplier per pair row
    support_vectors: np.ndarray
    dual_coef: np.ndarray  # alpha * y of the support vectors
    intercept: float
    converged: bool
    passes: int

    def decision_function(self, X: np.ndarray, gamma: float) -> np.ndarray:
        if len(self.support_vectors) == 0:
            return np.full(len(X), self.intercept)
        return rbf_kernel(X, self.support_vectors, gamma=gamma) @ self.dual_coef + self.intercept


@dataclass
class SvmModel:
    classes: np.ndarray
    gamma: float
    C: float
    n_features: int
    machines: List[BinarySvm] = field(default_factory=list)
    sample_index: Optional[np.ndarray] = None  # rows kept when training was subsampled

    @property
    def converged(self) -> bool:
        return all(m.converged for m in self.machines)


def resolve_gamma(gamma, X: np.ndarray) -> float:
    """'scale' means 1 / (n_features * X.var()); falls back to 1.0 on constant data."""
    if gamma == "scale":
        var = float(X.var())
        return 1.0 / (X.shape[1] * var) if var > 0 else 1.0
    gamma = float(gamma)
    if gamma <= 0:
        raise ConfigError(f"gamma must be positive or 'scale', got {gamma}")
    return gamma


class _Smo:
    """Simplified SMO state for one binary problem on a precomputed kernel."""

    def __init__(self, K: np.ndarray, y: np.ndarray, C: float, tol: float, rng):
        self.K = K
        self.y = y
        self.C = C
        self.tol = tol
        self.rng = rng
        self.n = len(y)
        self.alpha = np.zeros(self.n)
        self.b = 0.0
        self.errors = -y.astype(np.float64)  # f(x_i) - y_i with alpha = 0, b = 0

    def violates_kkt(self, i: int) -> bool:
        r = self.errors[i] * self.y[i]
        return (r < -self.tol and self.alpha[i] < self.C) or (r > self.tol and self.alpha[i] > 0)

    def take_step(self, i: int, j: int) -> bool:
        if i == j:
            return False
        K, y, C = self.K, self.y, self.C
        a_i, a_j = self.alpha[i], self.alpha[j]
        if y[i] != y[j]:
            low, high = max(0.0, a_j - a_i), min(C, C + a_j - a_i)
        else:
            low, high = max(0.0, a_i + a_j - C), min(C, a_i + a_j)
        if high - low < 1e-12:
            return False
        eta = 2.0 * K[i, j] - K[i, i] - K[j, j]
        if eta >= 0:
            return False

        e_i, e_j = self.errors[i], self.errors[j]
        new_j = float(np.clip(a_j - y[j] * (e_i - e_j) / eta, low, high))
        if abs(new_j - a_j) < STEP_EPS * (new_j + a_j + STEP_EPS):
            return False
        new_i = a_i + y[i] * y[j] * (a_j - new_j)

        d_i, d_j = y[i] * (new_i - a_i), y[j] * (new_j - a_j)
        b1 = self.b - e_i - d_i * K[i, i] - d_j * K[i, j]
        b2 = self.b - e_j - d_i * K[i, j] - d_j * K[j, j]
        if 0 < new_i < C:
            new_b = b1
        elif 0 < new_j < C:
            new_b = b2
        else:
            new_b = (b1 + b2) / 2.0

        self.errors += d_i * K[i] + d_j * K[j] + (new_b - self.b)
        self.alpha[i], self.alpha[j] = new_i, new_j
        self.b = new_b
        return True

    def examine(self, i: int) -> bool:
        if not self.violates_kkt(i):
            return False
        j = int(np.argmax(np.abs(self.errors[i] - self.errors)))
        if self.take_step(i, j):
            return True
        if self.n > 1:
            j = int(self.rng.randint(self.n - 1))
            if self.take_step(i, j if j < i else j + 1):
                return True
        start = int(self.rng.randint(self.n))
        for offset in range(self.n):
            if self.take_step(i, (start + offset) % self.n):
                return True
        return False

    def run(self, max_passes: int) -> Tuple[bool, int]:
        passes = 0
        while passes < max_passes:
            changed = sum(self.examine(i) for i in range(self.n))
            passes += 1
            if changed == 0:
                return True, passes
        return False, passes


def _fit_pair(X, y_pm, indices, pos, neg, gamma, C, tol, max_passes, rng) -> BinarySvm:
    K = rbf_kernel(X, gamma=gamma)
    smo = _Smo(K, y_pm, C, tol, rng)
    converged, passes = smo.run(max_passes if max_passes is not None else 10 * len(y_pm))
    support = np.flatnonzero(smo.alpha > 0)
    return BinarySvm(
        positive=pos,
        negative=neg,
        indices=indices,
        alphas=smo.alpha,
        support_vectors=X[support],
        dual_coef=smo.alpha[support] * y_pm[support],
        intercept=smo.b,
        converged=converged,
        passes=passes,
    )


def _pair_problem(X: np.ndarray, y: np.ndarray, pos: int, neg: int):
    indices = np.flatnonzero((y == pos) | (y == neg))
    y_pm = np.where(y[indices] == pos, 1.0, -1.0)
    return indices, X[indices], y_pm


def _fit_arrays(
    X: np.ndarray,
    y: np.ndarray,
    C: float,
    gamma,
    tol: float,
    max_passes: Optional[int],
    max_samples: Optional[int],
    random_state,
    logger=None,
) -> SvmModel:
    if C <= 0:
        raise ConfigError(f"C must be positive, got {C}")
    rng = check_random_state(random_state)
    sample_index = None
    if max_samples is not None and len(X) > max_samples:
        sample_index = np.sort(rng.choice(len(X), size=max_samples, replace=False))
        if logger:
            logger.log(
                f"SVM: subsampling {max_samples} of {len(X)} training rows (dense kernel matrix)",
                level="WARNING",
            )
        X, y = X[sample_index], y[sample_index]

    classes = np.unique(y)
    if len(classes) < 2:
        raise ConfigError(f"SVM needs at least two classes, got {classes.tolist()}")
    model = SvmModel(
        classes=classes, gamma=resolve_gamma(gamma, X), C=C, n_features=X.shape[1], sample_index=sample_index
    )

    for pos, neg in combinations(classes.tolist(), 2):
        indices, X_pair, y_pm = _pair_problem(X, y, pos, neg)
        machine = _fit_pair(X_pair, y_pm, indices, pos, neg, model.gamma, C, tol, max_passes, rng)
        model.machines.append(machine)
        if logger:
            logger.log_verbose(
                f"SVM {pos} vs {neg}: {len(machine.support_vectors)} support vectors, "
                f"{machine.passes} sweeps, converged={machine.converged}"
            )
        if not machine.converged:
            message = f"SMO for classes {pos} vs {neg} stopped after {machine.passes} sweeps without converging"
            warnings.warn(message, ConvergenceWarning)
            if logger:
                logger.log(message, level="WARNING")
    return model


def svm_fit(
    train: LatentDataset,
    C: float = SVM_DEFAULTS["C"],
    gamma=SVM_DEFAULTS["gamma"],
    tol: float = SVM_DEFAULTS["tol"],
    max_passes: Optional[int] = SVM_DEFAULTS["max_passes"],
    max_samples: Optional[int] = SVM_DEFAULTS["max_samples"],
    random_state=0,
    logger=None,
) -> SvmModel:
    if train.y is None:
        raise ConfigError("SVM training set has no labels")
    X = np.asarray(train.z, dtype=np.float64)
    return _fit_arrays(X, np.asarray(train.y), C, gamma, tol, max_passes, max_samples, random_state, logger)


def svm_votes(model: SvmModel, query: np.ndarray) -> np.ndarray:
    """One-vs-one vote counts [m, classes]."""
    query = np.asarray(query, dtype=np.float64)
    votes = np.zeros((len(query), len(model.classes)), dtype=np.int64)
    position = {c: i for i, c in enumerate(model.classes.tolist())}
    rows = np.arange(len(query))
    for machine in model.machines:
        winner = np.where(
            machine.decision_function(query, model.gamma) >= 0,
            position[machine.positive],
            position[machine.negative],
        )
        np.add.at(votes, (rows, winner), 1)
    return votes


def svm_predict(model: SvmModel, query: np.ndarray) -> np.ndarray:
    query = np.asarray(query, dtype=np.float64)
    if query.ndim != 2 or query.shape[1] != model.n_features:
        raise TensorShapeError(f"Query must be [m, {model.n_features}], got {query.shape}")
    # argmax keeps the first maximum: vote ties go to the lowest class
    return model.classes[np.argmax(svm_votes(model, query), axis=1)]


def svm_kkt_violation(model: SvmModel, X: np.ndarray, y: np.ndarray) -> List[float]:
    """
    Largest KKT violation of each pairwise machine on its training rows
    (``X``, ``y`` as passed to fit; the subsample is re-applied):

        alpha = 0      -> y f(x) >= 1
        0 < alpha < C  -> y f(x) == 1
        alpha = C      -> y f(x) <= 1
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    if model.sample_index is not None:
        X, y = X[model.sample_index], y[model.sample_index]

    violations = []
    for machine in model.machines:
        X_pair = X[machine.indices]
        y_pm = np.where(y[machine.indices] == machine.positive, 1.0, -1.0)
        margin = y_pm * machine.decision_function(X_pair, model.gamma) - 1.0
        alpha = machine.alphas
        at_zero = alpha <= 0
        at_c = alpha >= model.C
        free = ~(at_zero | at_c)
        per_sample = np.zeros(len(alpha))
        per_sample[at_zero] = np.maximum(0.0, -margin[at_zero])
        per_sample[at_c] = np.maximum(0.0, margin[at_c])
        per_sample[free] = np.abs(margin[free])
        violations.append(float(per_sample.max()) if len(per_sample) else 0.0)
    return violations


class RbfSvm(LatentClassifier):
    name = "svm"

    def __init__(
        self,
        C=SVM_DEFAULTS["C"],
        gamma=SVM_DEFAULTS["gamma"],
        tol=SVM_DEFAULTS["tol"],
        max_passes=SVM_DEFAULTS["max_passes"],
        max_samples=SVM_DEFAULTS["max_samples"],
        random_state=0,
        logger=None,
    ):
        self.C = C
        self.gamma = gamma
        self.tol = tol
        self.max_passes = max_passes
        self.max_samples = max_samples
        self.random_state = random_state
        self.logger = logger

    def _fit(self, X, y):
        self.model_ = _fit_arrays(
            X, y, self.C, self.gamma, self.tol, self.max_passes, self.max_samples, self.random_state, self.logger
        )

    def _predict(self, X):
        return svm_predict(self.model_, X)

    def decision_function(self, X):
        """Vote counts per encoded class."""
        return svm_votes(self.model_, np.asarray(X, dtype=np.float64))
