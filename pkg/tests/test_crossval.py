#!/usr/bin/env python3
"""
Cross-validation tests for feedwatch
Fold assignment, LOOCV/k-fold protocols and minority oversampling
"""

import numpy as np
import pytest

from crossval import CrossValError, kfold_cv, loocv, oversample, stratified_folds, thread_count
from svm_core import Hyperparams, KernelSpec, train_ssvm


def linear_trainer(X, y):
    return train_ssvm(X, y, Hyperparams(C=1.0), kernel=KernelSpec.linear())


class CountingTrainer:
    def __init__(self):
        self.calls = 0

    def __call__(self, X, y):
        self.calls += 1
        return linear_trainer(X, y)


class TestFolds:
    """Stratified fold assignment"""

    def test_every_instance_tested_once(self):
        y = np.array([1] * 178 + [-1] * 100)
        splits = stratified_folds(y, 10, seed=0)
        tested = np.concatenate([test for _, test in splits])
        assert sorted(tested) == list(range(278))

    def test_negatives_spread_evenly(self):
        y = np.array([1] * 178 + [-1] * 100)
        for _, test in stratified_folds(y, 10, seed=3):
            assert 9 <= np.sum(y[test] == -1) <= 11

    def test_seeded(self):
        y = np.array([1, -1] * 15)
        a = stratified_folds(y, 5, seed=7)
        b = stratified_folds(y, 5, seed=7)
        assert all(np.array_equal(ta, tb) for (_, ta), (_, tb) in zip(a, b))

    def test_too_many_folds(self):
        with pytest.raises(CrossValError):
            stratified_folds(np.array([1, 1, 1, -1, -1]), 3, seed=0)
        with pytest.raises(CrossValError):
            stratified_folds(np.array([1, -1, 1, -1]), 1, seed=0)


class TestProtocols:
    """LOOCV and k-fold predictions"""

    def test_loocv_trivially_separable(self):
        X = np.array([[-2.0], [-1.0], [1.0], [2.0]])
        y = np.array([-1, -1, 1, 1])
        result = loocv(X, y, linear_trainer, n_jobs=1)
        assert result.accuracy(y) == 1.0

    def test_loocv_runs_trainer_once_per_instance(self, separable_data):
        X, y = separable_data
        trainer = CountingTrainer()
        loocv(X, y, trainer, n_jobs=1)
        assert trainer.calls == len(y)

    def test_kfold_reproducible(self, imbalanced_data):
        X, y = imbalanced_data
        a = kfold_cv(X, y, 5, 11, linear_trainer)
        b = kfold_cv(X, y, 5, 11, linear_trainer)
        assert np.array_equal(a.scores, b.scores)
        assert np.array_equal(a.predictions, np.where(a.scores >= 0, 1, -1))

    def test_missing_class_in_training_split(self):
        X = np.array([[0.0], [1.0], [2.0]])
        y = np.array([1, 1, -1])
        with pytest.raises(CrossValError):
            loocv(X, y, linear_trainer, n_jobs=1)

    def test_oversampling_inside_splits(self, imbalanced_data):
        X, y = imbalanced_data
        seen = []

        def trainer(X_train, y_train):
            seen.append((np.sum(y_train == 1), np.sum(y_train == -1)))
            return linear_trainer(X_train, y_train)

        kfold_cv(X, y, 3, 0, trainer, oversample_seed=5, n_jobs=1)
        assert all(pos == neg for pos, neg in seen)


class TestOversample:
    """Minority duplication"""

    def test_corpus_counts(self):
        rng = np.random.default_rng(0)
        X = rng.normal(size=(278, 3))
        y = np.array([1] * 178 + [-1] * 100)
        X2, y2 = oversample(X, y, seed=1)
        assert np.sum(y2 == 1) == 178
        assert np.sum(y2 == -1) == 178
        assert np.array_equal(X2[:278], X)
        originals = {tuple(row) for row in X[y == -1]}
        assert all(tuple(row) in originals for row in X2[278:])
        assert {tuple(row) for row in X2[y2 == -1]} == originals

    def test_balanced_is_identity(self):
        X = np.arange(8.0).reshape(4, 2)
        y = np.array([1, -1, 1, -1])
        X2, y2 = oversample(X, y, seed=0)
        assert np.array_equal(X2, X)
        assert np.array_equal(y2, y)

    def test_deterministic(self, imbalanced_data):
        X, y = imbalanced_data
        assert np.array_equal(oversample(X, y, 4)[0], oversample(X, y, 4)[0])


class TestThreads:
    def test_thread_count_from_environment(self, monkeypatch):
        monkeypatch.setenv("FEEDWATCH_THREADS", "0")
        assert thread_count() == -1
        monkeypatch.setenv("FEEDWATCH_THREADS", "3")
        assert thread_count() == 3
        monkeypatch.setenv("FEEDWATCH_THREADS", "many")
        with pytest.raises(CrossValError):
            thread_count()
