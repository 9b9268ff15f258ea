#!/usr/bin/env python3
"""
Cross-validation protocols for feedwatch
Stratified k-fold, leave-one-out and minority oversampling inside training splits
"""

import logging
import os
from dataclasses import dataclass

import numpy as np
from joblib import Parallel, delayed
from sklearn.model_selection import StratifiedKFold

from seeding import derive_rng, derive_seed

logger = logging.getLogger(__name__)


class CrossValError(ValueError):
    pass


@dataclass
class CvResult:
    predictions: np.ndarray
    scores: np.ndarray

    def accuracy(self, y):
        return float(np.mean(self.predictions == np.asarray(y)))


def thread_count():
    """Parallelism cap from FEEDWATCH_THREADS (unset or 0 = all cores)."""
    raw = os.environ.get("FEEDWATCH_THREADS", "0").strip() or "0"
    try:
        value = int(raw)
    except ValueError:
        raise CrossValError(f"FEEDWATCH_THREADS must be an integer, got '{raw}'") from None
    return -1 if value <= 0 else value


def stratified_folds(y, folds, seed):
    """Seeded stratified fold assignment as a list of (train, test) index arrays."""
    y = np.asarray(y)
    classes, counts = np.unique(y, return_counts=True)
    if folds < 2:
        raise CrossValError(f"need at least 2 folds, got {folds}")
    if classes.size < 2 or folds > counts.min():
        raise CrossValError(
            f"{folds} folds exceed the smallest class count ({int(counts.min())})")
    splitter = StratifiedKFold(n_splits=folds, shuffle=True, random_state=derive_seed(seed, "folds"))
    return list(splitter.split(np.zeros(y.size), y))


def oversample(X, y, seed):
    """Duplicate randomly drawn minority rows until both classes are equally frequent."""
    X = np.asarray(X)
    y = np.asarray(y)
    classes, counts = np.unique(y, return_counts=True)
    if classes.size < 2 or counts[0] == counts[1]:
        return X.copy(), y.copy()
    minority = classes[np.argmin(counts)]
    pool = np.flatnonzero(y == minority)
    rng = derive_rng(seed, "oversample")
    extra = rng.choice(pool, size=int(counts.max() - counts.min()), replace=True)
    return np.vstack([X, X[extra]]), np.concatenate([y, y[extra]])


def _run_split(X, y, train, test, trainer, oversample_seed, split_index):
    X_train, y_train = X[train], y[train]
    if np.unique(y_train).size < 2:
        raise CrossValError(f"training split {split_index} is missing a class")
    if oversample_seed is not None:
        X_train, y_train = oversample(X_train, y_train, derive_seed(oversample_seed, split_index))
    model = trainer(X_train, y_train)
    return test, np.atleast_1d(model.decision(X[test]))


def _run_splits(X, y, splits, trainer, oversample_seed, n_jobs):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    n_jobs = thread_count() if n_jobs is None else n_jobs
    results = Parallel(n_jobs=n_jobs, prefer="threads")(
        delayed(_run_split)(X, y, train, test, trainer, oversample_seed, k)
        for k, (train, test) in enumerate(splits)
    )
    scores = np.empty(y.size)
    for test, fold_scores in results:
        scores[test] = fold_scores
    return CvResult(predictions=np.where(scores >= 0, 1, -1), scores=scores)


def kfold_cv(X, y, folds, seed, trainer, oversample_seed=None, n_jobs=None):
    """Stratified k-fold predictions/scores aligned with the input order."""
    splits = stratified_folds(y, folds, seed)
    return _run_splits(X, y, splits, trainer, oversample_seed, n_jobs)


def loocv(X, y, trainer, oversample_seed=None, n_jobs=None):
    """Leave-one-out predictions/scores; the trainer runs once per instance."""
    n = len(y)
    everything = np.arange(n)
    splits = [(np.delete(everything, i), np.array([i])) for i in range(n)]
    return _run_splits(X, y, splits, trainer, oversample_seed, n_jobs)


def cv_accuracy(X, y, trainer, folds, seed, oversample_seed=None, n_jobs=None):
    return kfold_cv(X, y, folds, seed, trainer, oversample_seed, n_jobs).accuracy(y)
