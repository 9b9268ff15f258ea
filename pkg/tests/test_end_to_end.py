#!/usr/bin/env python3
"""
End-to-end tests for feedwatch on full-size synthetic corpora
Slow: run with `python scripts/run_tests.py --all`
"""

import numpy as np
import pytest

from detector import DetectionEngine, replay
from evaluation import EvalConfig, evaluate_protocol, sweep_observation
from feature_registry import FEATURE_NAMES, feature_matrix
from model_selection import SearchDomain
from pipeline import PipelineConfig, fit_pipeline
from session_log import RoleLabel
from synthgen import GeneratorConfig, generate_corpus

pytestmark = pytest.mark.slow

CORPUS_SEEDS = (0, 1, 2)


@pytest.fixture(scope="module")
def corpora():
    """Default 278-session corpora, one per seed."""
    return {seed: generate_corpus(GeneratorConfig(seed=seed))[0] for seed in CORPUS_SEEDS}


@pytest.fixture(scope="module")
def corpus(corpora):
    return corpora[0]


def matrix(sessions, window):
    frame = feature_matrix(sessions, window)
    return frame[FEATURE_NAMES].to_numpy(dtype=float), frame["label"].to_numpy(dtype=int)


class TestDetection:
    """Detector trained on the default corpus"""

    def test_strangers_caught_at_two_minutes(self, corpus):
        X, y = matrix(corpus, 2.0)
        config = PipelineConfig(select=False, folds=5, domain=SearchDomain(stage_sizes=(9, 5)))
        model = fit_pipeline(X, y, config, seed=1).model
        fresh, _ = generate_corpus(GeneratorConfig(counts={RoleLabel.STRANGER: 100}, seed=99))
        engine = DetectionEngine(model, 2.0)
        verdicts = [v for v in map(engine.ingest_event, replay(fresh)) if v is not None]
        assert len(verdicts) == 100
        assert np.mean([v.label == "stalker" for v in verdicts]) >= 0.8


class TestObservationWindow:
    """Full pipeline accuracy at 2 and 25 minutes, averaged over corpus seeds"""

    @pytest.fixture(scope="class")
    def accuracy(self, corpora):
        config = EvalConfig(pipeline=PipelineConfig(folds=10), seed=0)
        runs = [sweep_observation(sessions, [2, 25], config, permutations=5) for sessions in corpora.values()]
        return {point.window: np.mean([r[i].mean_accuracy for r in runs])
                for i, point in enumerate(runs[0])}

    def test_two_minutes(self, accuracy):
        assert accuracy[2.0] >= 0.80

    def test_twenty_five_minutes(self, accuracy):
        assert accuracy[25.0] >= 0.90

    def test_longer_window_is_not_worse(self, accuracy):
        assert accuracy[25.0] >= accuracy[2.0]


class TestEvaluationGrid:
    """Selection x oversampling grid on whole sessions"""

    @pytest.fixture(scope="class")
    def report(self, corpus):
        X, y = matrix(corpus, None)
        config = EvalConfig(pipeline=PipelineConfig(folds=5, domain=SearchDomain(stage_sizes=(9, 5))),
                            outer="kfold", outer_folds=10, seeds=3, seed=0)
        return evaluate_protocol(X, y, config)

    def test_every_cell_accurate(self, report):
        for cell in report.cells:
            assert cell.mean.accuracy >= 0.8, cell.name
        assert report.roc.auc >= 0.9

    def test_corpus_is_not_trivially_separable(self, report):
        cells = {cell.name: cell.mean for cell in report.cells}
        assert cells["fs"].accuracy < 1.0

    def test_oversampled_selection_leads(self, report):
        cells = {cell.name: cell.mean for cell in report.cells}
        for name, mean in cells.items():
            assert cells["fs_os"].accuracy >= mean.accuracy - 0.02, name
        for name in ("fs", "none"):
            assert cells["fs_os"].fpr <= cells[name].fpr, name
