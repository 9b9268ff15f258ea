#!/usr/bin/env python3
"""
Evaluation harness for feedwatch
Confusion metrics, ROC/AUC, the selection x oversampling grid,
observation-window sweeps and top-weighted feature reports
"""

import json
import logging
from collections import Counter
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd

from crossval import cv_accuracy, kfold_cv, loocv, oversample  # noqa: F401 (re-exported)
from feature_registry import FEATURE_NAMES, feature_matrix
from pipeline import PipelineConfig, choose_features, choose_hyperparams, fixed_trainer
from seeding import derive_seed
from selection import standardize
from session_log import attach_labels
from svm_core import solve_l1svm

logger = logging.getLogger(__name__)

GRID_CELLS = ("fs_os", "fs", "os", "none")
METRIC_NAMES = ["accuracy", "fpr", "fnr", "tpr", "precision", "recall", "f_score"]
OPERATING_FPRS = (0.01, 0.05, 0.1)
REPORT_SCHEMA_VERSION = 1


class EvaluationError(ValueError):
    pass


@dataclass(frozen=True)
class ConfusionTable:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    def __post_init__(self):
        if min(self.tp, self.fp, self.tn, self.fn) < 0:
            raise EvaluationError("confusion counts must be non-negative")

    @property
    def total(self):
        return self.tp + self.fp + self.tn + self.fn


@dataclass(frozen=True)
class MetricsReport:
    accuracy: float
    fpr: float
    fnr: float
    tpr: float
    precision: float
    recall: float
    f_score: float
    degenerate: frozenset = frozenset()

    def as_dict(self):
        return {name: getattr(self, name) for name in METRIC_NAMES}


@dataclass
class RocCurve:
    points: list
    auc: float
    thresholds: list = field(default_factory=list)


def confusion(predictions, labels):
    predictions = np.asarray(predictions)
    labels = np.asarray(labels)
    if predictions.shape != labels.shape:
        raise EvaluationError(f"{predictions.size} predictions for {labels.size} labels")
    if not set(np.unique(np.concatenate([predictions, labels]))) <= {-1, 1}:
        raise EvaluationError("predictions and labels must be -1 or +1")
    pos, neg = labels == 1, labels == -1
    return ConfusionTable(
        tp=int(np.sum(pos & (predictions == 1))),
        fp=int(np.sum(neg & (predictions == 1))),
        tn=int(np.sum(neg & (predictions == -1))),
        fn=int(np.sum(pos & (predictions == -1))),
    )


def metrics(table):
    """The seven rates of a confusion table; 0/0 cells are 0 and named in ``degenerate``."""
    degenerate = set()

    def ratio(name, num, den):
        if den == 0:
            degenerate.add(name)
            return 0.0
        return num / den

    accuracy = ratio("accuracy", table.tp + table.tn, table.total)
    fpr = ratio("fpr", table.fp, table.fp + table.tn)
    fnr = ratio("fnr", table.fn, table.tp + table.fn)
    tpr = ratio("tpr", table.tp, table.tp + table.fn)
    precision = ratio("precision", table.tp, table.tp + table.fp)
    f_score = ratio("f_score", 2 * precision * tpr, precision + tpr)
    if "tpr" in degenerate:
        degenerate.add("recall")
    return MetricsReport(accuracy, fpr, fnr, tpr, precision, tpr, f_score, frozenset(degenerate))


def roc_auc(scores, labels):
    """ROC points over unique score thresholds (predict +1 when score >= threshold)."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    if scores.shape != labels.shape:
        raise EvaluationError(f"{scores.size} scores for {labels.size} labels")
    P = int(np.sum(labels == 1))
    N = int(np.sum(labels == -1))
    if P == 0 or N == 0:
        raise EvaluationError("ROC needs both classes")

    order = np.argsort(-scores, kind="stable")
    ranked = scores[order]
    positive = labels[order] == 1
    tps = np.cumsum(positive)
    fps = np.cumsum(~positive)
    ends = np.append(np.flatnonzero(np.diff(ranked) != 0), ranked.size - 1)

    tp = [0] + [int(v) for v in tps[ends]]
    fp = [0] + [int(v) for v in fps[ends]]
    # integer trapezoid, divided once
    area = sum((fp[k] - fp[k - 1]) * (tp[k] + tp[k - 1]) for k in range(1, len(tp)))
    points = [(f / N, t / P) for f, t in zip(fp, tp)]
    thresholds = [float("inf")] + [float(v) for v in ranked[ends]]
    return RocCurve(points=points, auc=area / (2 * P * N), thresholds=thresholds)


def tpr_at_fpr(curve, max_fpr):
    """Best TPR among operating points whose FPR does not exceed ``max_fpr``."""
    return max(t for f, t in curve.points if f <= max_fpr + 1e-12)


def _mean_report(reports):
    values = {name: float(np.mean([getattr(r, name) for r in reports])) for name in METRIC_NAMES}
    degenerate = frozenset().union(*(r.degenerate for r in reports))
    return MetricsReport(**values, degenerate=degenerate)


def _std_report(reports):
    return {name: float(np.std([getattr(r, name) for r in reports])) for name in METRIC_NAMES}


@dataclass
class EvalConfig:
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)
    outer: str = "loocv"
    outer_folds: int = 10
    seeds: int = 10
    seed: int = 0
    cells: tuple = GRID_CELLS
    n_jobs: Optional[int] = None

    def __post_init__(self):
        if self.outer not in ("loocv", "kfold"):
            raise EvaluationError(f"outer protocol must be loocv or kfold, got '{self.outer}'")
        unknown = set(self.cells) - set(GRID_CELLS)
        if unknown:
            raise EvaluationError(f"unknown grid cells: {sorted(unknown)}")
        if self.seeds < 1:
            raise EvaluationError("need at least one oversampling seed")

    def cell_pipeline(self, cell):
        return replace(self.pipeline, select=cell.startswith("fs"), oversample=cell.endswith("os"))


@dataclass
class CellResult:
    name: str
    mean: MetricsReport
    std: dict
    runs: int
    scores: np.ndarray
    features: tuple
    hyperparams: dict
    role_accuracy: dict = field(default_factory=dict)


@dataclass
class SweepPoint:
    window: float
    mean_accuracy: float
    std_accuracy: float
    runs: int
    n_features: int


@dataclass
class TopFeatures:
    rows: pd.DataFrame
    histogram: pd.DataFrame


@dataclass
class EvalReport:
    cells: list = field(default_factory=list)
    roc: Optional[RocCurve] = None
    roc_cell: Optional[str] = None
    sweep: list = field(default_factory=list)
    top_features: Optional[TopFeatures] = None
    config: dict = field(default_factory=dict)

    def cell(self, name):
        for result in self.cells:
            if result.name == name:
                return result
        raise KeyError(name)


def _outer(X, y, trainer, config, oversample_seed):
    if config.outer == "loocv":
        return loocv(X, y, trainer, oversample_seed=oversample_seed, n_jobs=config.n_jobs)
    return kfold_cv(X, y, config.outer_folds, derive_seed(config.seed, "outer"), trainer,
                    oversample_seed=oversample_seed, n_jobs=config.n_jobs)


def _evaluate_cell(X, y, cell, config, roles):
    pc = config.cell_pipeline(cell)
    indices, _, _ = choose_features(X, y, pc, config.seed)
    hp, _ = choose_hyperparams(X, y, indices, pc, config.seed)
    trainer = fixed_trainer(indices, hp, pc)
    repeats = range(config.seeds) if pc.oversample else [None]

    reports, scores, role_hits = [], [], {}
    for r in repeats:
        oversample_seed = None if r is None else derive_seed(config.seed, "eval", cell, r)
        result = _outer(X, y, trainer, config, oversample_seed)
        reports.append(metrics(confusion(result.predictions, y)))
        scores.append(result.scores)
        if roles is not None:
            for role in sorted(set(roles)):
                mask = roles == role
                role_hits.setdefault(role, []).append(float(np.mean(result.predictions[mask] == y[mask])))

    mean = _mean_report(reports)
    logger.info("Cell %s: accuracy %.4f over %d run(s) on %d features",
                cell, mean.accuracy, len(reports), len(indices))
    return CellResult(
        name=cell,
        mean=mean,
        std=_std_report(reports),
        runs=len(reports),
        scores=np.mean(scores, axis=0),
        features=tuple(indices),
        hyperparams={"C": hp.C, "gamma": hp.gamma, "alpha": hp.alpha},
        role_accuracy={role: float(np.mean(hits)) for role, hits in role_hits.items()},
    )


def evaluate_protocol(X, y, config=None, roles=None):
    """Run the feature-selection x oversampling grid under the outer protocol.

    Selection and tuning run once per cell on the whole corpus; the outer
    loop then retrains the fixed model. Oversampled cells repeat the outer
    loop over ``config.seeds`` seeds and report mean and std.
    """
    config = config or EvalConfig()
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    if roles is not None:
        roles = np.asarray([getattr(r, "value", r) for r in roles])
        if roles.size != y.size:
            raise EvaluationError(f"{roles.size} roles for {y.size} instances")

    cells = [_evaluate_cell(X, y, cell, config, roles) for cell in config.cells]
    roc_cell = "fs_os" if "fs_os" in config.cells else cells[0].name
    roc = roc_auc(next(c for c in cells if c.name == roc_cell).scores, y)
    logger.info("ROC on %s: AUC %.4f", roc_cell, roc.auc)
    return EvalReport(cells=cells, roc=roc, roc_cell=roc_cell, config=_config_dict(config))


def _labeled(sessions, labels):
    if labels is not None:
        sessions = attach_labels(sessions, labels)
    missing = [s.session_id for s in sessions if s.label is None]
    if missing:
        raise EvaluationError(f"{len(missing)} session(s) have no label, e.g. {missing[0]}")
    return sessions


def sweep_observation(sessions, L_list=range(1, 26), config=None, labels=None, permutations=20):
    """Cross-validated accuracy of the full pipeline per observation window.

    Each window re-extracts truncated features and refits selection and
    tuning; accuracy is then measured with ``permutations`` differently
    seeded k-fold shuffles of the corpus.
    """
    config = config or EvalConfig()
    sessions = _labeled(sessions, labels)
    y = np.array([s.label.binary for s in sessions])
    pc = config.pipeline
    points = []
    for window in L_list:
        window = float(window)
        X = feature_matrix(sessions, window)[FEATURE_NAMES].to_numpy(dtype=float)
        indices, _, _ = choose_features(X, y, pc, config.seed)
        hp, _ = choose_hyperparams(X, y, indices, pc, config.seed)
        trainer = fixed_trainer(indices, hp, pc)
        runs = []
        for p in range(max(int(permutations), 1)):
            oversample_seed = derive_seed(config.seed, "oversample", "sweep", p) if pc.oversample else None
            runs.append(cv_accuracy(X, y, trainer, pc.folds, derive_seed(config.seed, "permutation", p),
                                    oversample_seed=oversample_seed, n_jobs=config.n_jobs))
        point = SweepPoint(window, float(np.mean(runs)), float(np.std(runs)), len(runs), len(indices))
        logger.info("Window %.4g min: accuracy %.4f +/- %.4f", window, point.mean_accuracy, point.std_accuracy)
        points.append(point)
    return points


def window_matrices(sessions, L_list=range(1, 8), labels=None):
    """{window: (X, y)} with truncated features per observation window."""
    sessions = _labeled(sessions, labels)
    y = np.array([s.label.binary for s in sessions])
    return {float(w): (feature_matrix(sessions, w)[FEATURE_NAMES].to_numpy(dtype=float), y)
            for w in L_list}


def top_weighted_features(matrices, k=3, C_l1=1.0, feature_names=None, eps=1e-8):
    """Largest positive and most negative 1-norm SVM weights per window.

    Only non-zero weights are ranked, so a side may hold fewer than ``k``
    names when the screening model keeps few features.
    """
    feature_names = feature_names or FEATURE_NAMES
    rows = []
    for window, (X, y) in matrices.items():
        w = solve_l1svm(standardize(X), np.asarray(y), C_l1).w
        order = np.argsort(-w, kind="stable")
        positive = [j for j in order if w[j] > eps][:k]
        negative = [j for j in order[::-1] if w[j] < -eps][:k]
        for side, picked in (("positive", positive), ("negative", negative)):
            rows += [{"window": window, "side": side, "rank": rank, "name": feature_names[j],
                      "weight": float(w[j])} for rank, j in enumerate(picked, 1)]
    frame = pd.DataFrame(rows, columns=["window", "side", "rank", "name", "weight"])
    counts = Counter(zip(frame["side"], frame["name"]))
    histogram = pd.DataFrame([{"side": s, "name": n, "count": c} for (s, n), c in counts.items()],
                             columns=["side", "name", "count"])
    histogram = histogram.sort_values(["side", "count", "name"], ascending=[True, False, True],
                                      kind="stable").reset_index(drop=True)
    return TopFeatures(rows=frame, histogram=histogram)


def _config_dict(config):
    return {
        "outer": config.outer,
        "outer_folds": config.outer_folds,
        "seeds": config.seeds,
        "seed": config.seed,
        "cells": list(config.cells),
        "pipeline": config.pipeline.describe(),
    }


def report_summary(report):
    """Canonical JSON-ready summary of an EvalReport."""
    summary = {"schema_version": REPORT_SCHEMA_VERSION, "config": report.config, "cells": {}}
    for cell in report.cells:
        summary["cells"][cell.name] = {
            "mean": cell.mean.as_dict(),
            "std": cell.std,
            "degenerate": sorted(cell.mean.degenerate),
            "runs": cell.runs,
            "features": [FEATURE_NAMES[j] if j < len(FEATURE_NAMES) else j for j in cell.features],
            "hyperparams": cell.hyperparams,
            "role_accuracy": cell.role_accuracy,
        }
    if report.roc is not None:
        summary["roc"] = {
            "cell": report.roc_cell,
            "auc": report.roc.auc,
            "tpr_at_fpr": {repr(f): tpr_at_fpr(report.roc, f) for f in OPERATING_FPRS},
        }
    if report.sweep:
        summary["sweep"] = [asdict(p) for p in report.sweep]
    if report.top_features is not None:
        summary["top_features"] = report.top_features.histogram.to_dict(orient="records")
    return summary


def write_eval_report(report, out_dir):
    """Write report.json plus the flat CSV tables that apply to ``report``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = [out_dir / "report.json"]
    written[0].write_text(json.dumps(report_summary(report), sort_keys=True, indent=2) + "\n",
                          encoding="utf-8")
    if report.cells:
        rows = []
        for cell in report.cells:
            rows.append({"cell": cell.name, "stat": "mean", "runs": cell.runs, **cell.mean.as_dict()})
            rows.append({"cell": cell.name, "stat": "std", "runs": cell.runs, **cell.std})
        written.append(out_dir / "metrics_grid.csv")
        pd.DataFrame(rows, columns=["cell", "stat", "runs"] + METRIC_NAMES).to_csv(
            written[-1], index=False, float_format="%.17g")
    if report.roc is not None:
        written.append(out_dir / "roc_points.csv")
        pd.DataFrame({"threshold": report.roc.thresholds,
                      "fpr": [p[0] for p in report.roc.points],
                      "tpr": [p[1] for p in report.roc.points]}).to_csv(
            written[-1], index=False, float_format="%.17g")
    if report.sweep:
        written.append(out_dir / "sweep_accuracy.csv")
        pd.DataFrame([asdict(p) for p in report.sweep],
                     columns=[f.name for f in fields(SweepPoint)]).to_csv(
            written[-1], index=False, float_format="%.17g")
    if report.top_features is not None:
        written.append(out_dir / "top_features.csv")
        report.top_features.rows.to_csv(written[-1], index=False, float_format="%.17g")
    logger.info("Wrote %d report file(s) to %s", len(written), out_dir)
    return written


REPORT_TABLES = ("metrics_grid", "roc_points", "sweep_accuracy", "top_features")


def read_eval_report(out_dir):
    """Load a report directory into {"summary": dict, <table>: DataFrame or None}."""
    out_dir = Path(out_dir)
    summary_path = out_dir / "report.json"
    if not summary_path.exists():
        raise FileNotFoundError(f"Evaluation report not found at {summary_path}")
    summary = json.loads(summary_path.read_text(encoding="utf-8"))
    if summary.get("schema_version") != REPORT_SCHEMA_VERSION:
        raise EvaluationError(f"unsupported report schema {summary.get('schema_version')}")
    loaded = {"summary": summary}
    for table in REPORT_TABLES:
        path = out_dir / f"{table}.csv"
        loaded[table] = pd.read_csv(path, float_precision="round_trip") if path.exists() else None
    return loaded
