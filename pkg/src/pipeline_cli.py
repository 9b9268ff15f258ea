#!/usr/bin/env python3
"""
feedwatch command line
synth -> extract -> select -> tune -> train -> eval -> sweep -> report -> detect
"""

import argparse
import logging
import sys
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from crossval import CrossValError
from detector import DetectionEngine, DetectorError, run_stream
from evaluation import (
    GRID_CELLS,
    EvalConfig,
    EvalReport,
    EvaluationError,
    evaluate_protocol,
    read_eval_report,
    sweep_observation,
    top_weighted_features,
    window_matrices,
    write_eval_report,
)
from feature_registry import FEATURE_NAMES, FeatureError, feature_matrix, read_feature_matrix, write_feature_matrix
from model_selection import SearchDomain, tune, write_trace
from pipeline import PipelineConfig, choose_features, fit_pipeline
from plots import plot_roc, plot_sweep
from report_exporter import ReportExcelExporter
from selection import SelectionError, candidate_features, screening_report, standardize
from session_log import (
    RoleLabel,
    SessionLogError,
    attach_labels,
    clean_sessions,
    parse_action_log,
    read_labels,
    write_action_log,
    write_labels,
)
from svm_core import SolverError, TrainingError, load_model, save_model
from synthgen import GeneratorConfig, generate_corpus, load_profiles

logger = logging.getLogger("feedwatch")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2
RUNTIME_ERRORS = (SessionLogError, FeatureError, TrainingError, SolverError, SelectionError,
                  CrossValError, EvaluationError, DetectorError, OSError, ValueError)


class UsageError(Exception):
    """Invalid flag or path; reported with exit code 1."""


class FeedwatchParser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


@dataclass
class RunConfig:
    subcommand: str
    inputs: dict = field(default_factory=dict)
    output: Optional[str] = None
    window: Optional[float] = None
    folds: int = 10
    seed: int = 0
    seeds: int = 10
    select: bool = True
    oversample: bool = False
    kernel: str = "rbf"
    domain: SearchDomain = field(default_factory=SearchDomain)
    options: dict = field(default_factory=dict)

    INPUT_FLAGS = ("log", "labels", "features", "model", "input", "report", "profiles")

    @classmethod
    def from_args(cls, args):
        values = vars(args)
        inputs = {k: values[k] for k in cls.INPUT_FLAGS if values.get(k) is not None}
        domain = SearchDomain(
            log2C=tuple(values.get("log2c") or SearchDomain.log2C),
            log2gamma=tuple(values.get("log2gamma") or SearchDomain.log2gamma),
            stage_sizes=tuple(values.get("stages") or SearchDomain.stage_sizes),
        )
        known = set(cls.INPUT_FLAGS) | {"subcommand", "out", "window", "folds", "seed", "seeds",
                                        "no_select", "oversample", "kernel", "log2c", "log2gamma",
                                        "stages", "verbose", "quiet", "handler"}
        return cls(
            subcommand=args.subcommand,
            inputs=inputs,
            output=values.get("out"),
            window=values.get("window"),
            folds=10 if values.get("folds") is None else values["folds"],
            seed=values.get("seed") or 0,
            seeds=10 if values.get("seeds") is None else values["seeds"],
            select=not values.get("no_select", False),
            oversample=bool(values.get("oversample", False)),
            kernel=values.get("kernel") or "rbf",
            domain=domain,
            options={k: v for k, v in values.items() if k not in known},
        )

    def validate(self):
        for flag, path in self.inputs.items():
            if path == "-":
                continue
            if flag == "report":
                if not Path(path, "report.json").exists():
                    raise UsageError(f"--report: no report.json in {path}")
            elif not Path(path).is_file():
                raise UsageError(f"--{flag}: file not found: {path}")
        if self.window is not None and not self.window > 0:
            raise UsageError(f"--window must be positive, got {self.window}")
        if self.folds < 2:
            raise UsageError(f"--folds must be at least 2, got {self.folds}")
        if self.seeds < 1:
            raise UsageError(f"--seeds must be at least 1, got {self.seeds}")
        if self.options.get("max_decided") is not None and self.options["max_decided"] < 1:
            raise UsageError(f"--max-decided must be at least 1, got {self.options['max_decided']}")
        for flag in ("windows", "top_windows"):
            if self.options.get(flag):
                parse_windows(self.options[flag])

    def pipeline(self):
        return PipelineConfig(select=self.select, oversample=self.oversample, kernel=self.kernel,
                              folds=self.folds, domain=self.domain,
                              C_l1=self.options.get("c_l1") or 1.0)


def parse_windows(text):
    """'1-25' or '2,7,25' -> list of minutes."""
    windows = []
    for part in str(text).split(","):
        part = part.strip()
        if "-" in part:
            lo, hi = part.split("-", 1)
            windows += [float(v) for v in range(int(lo), int(hi) + 1)]
        elif part:
            windows.append(float(part))
    if not windows or any(w <= 0 for w in windows):
        raise UsageError(f"invalid window list '{text}'")
    return windows


# ---- data loading shared by subcommands ----

def _format_of(path, explicit=None):
    if explicit:
        return explicit
    return "jsonl" if str(path).endswith((".jsonl", ".ndjson")) else "csv"


def load_sessions(config):
    """Parse, clean and label the action log named by --log/--labels."""
    path = config.inputs["log"]
    sessions = parse_action_log(path, _format_of(path, config.options.get("format")))
    max_idle = config.options.get("max_idle")
    if max_idle is not None:
        result = clean_sessions(sessions, max_idle)
        sessions = result.sessions
        print(f"🧹 Dropped {result.dropped} noisy session(s), kept {len(sessions)}")
    if "labels" in config.inputs:
        sessions = attach_labels(sessions, read_labels(config.inputs["labels"]))
    return sessions


def load_matrix(config):
    """(frame, X, y, roles) from --features, labelled by --labels when given."""
    frame, X, y = read_feature_matrix(config.inputs["features"])
    roles = None
    if "labels" in config.inputs:
        labels = read_labels(config.inputs["labels"])
        missing = [sid for sid in frame["session_id"] if sid not in labels]
        if missing:
            raise FeatureError(f"{len(missing)} session(s) missing from labels, e.g. {missing[0]}")
        roles = [labels[sid] for sid in frame["session_id"]]
        y = np.array([role.binary for role in roles])
    if y is None:
        raise FeatureError("feature matrix is unlabeled; pass --labels")
    return frame, X, y, roles


# ---- subcommands ----

def cmd_synth(config):
    counts = {RoleLabel.OWNER: config.options["owners"], RoleLabel.ACQUAINTANCE: config.options["acq"],
              RoleLabel.STRANGER: config.options["strangers"]}
    profiles = load_profiles(config.inputs.get("profiles"))
    gen_config = GeneratorConfig(counts=counts, session_minutes=config.options["minutes"],
                                 seed=config.seed, profiles=profiles,
                                 noisy_fraction=config.options["noisy"])
    sessions, _ = generate_corpus(gen_config)
    out = Path(config.output)
    out.mkdir(parents=True, exist_ok=True)
    fmt = config.options.get("format") or "csv"
    write_action_log(sessions, out / f"actions.{fmt}", format=fmt)
    write_labels(sessions, out / "labels.csv")
    print(f"✅ Generated {len(sessions)} sessions")
    print(f"📄 Actions: {out / f'actions.{fmt}'}")
    print(f"📄 Labels: {out / 'labels.csv'}")


def cmd_extract(config):
    sessions = load_sessions(config)
    frame = feature_matrix(sessions, config.window)
    write_feature_matrix(frame, config.output)
    print(f"✅ Extracted {len(frame)} x {len(FEATURE_NAMES)} features -> {config.output}")


def cmd_select(config):
    _, X, y, _ = load_matrix(config)
    pc = replace(config.pipeline(), select=True)
    if config.options.get("screen_only"):
        candidates, subset = candidate_features(standardize(X), y, C_l1=pc.C_l1), None
    else:
        _, candidates, subset = choose_features(X, y, pc, config.seed)
    report = screening_report(candidates)
    if subset is not None:
        report["selected"] = report["index"].isin(subset.indices)
        print(f"📊 Forward selection kept {len(subset.indices)} feature(s), "
              f"cv accuracy {subset.cv_accuracy:.4f}")
    report.to_csv(config.output, index=False, float_format="%.17g")
    print(f"✅ Screening kept {len(candidates.indices)} of {X.shape[1]} features -> {config.output}")


def cmd_tune(config):
    _, X, y, _ = load_matrix(config)
    result = tune(X, y, config.domain, folds=config.folds, seed=config.seed)
    write_trace(result, config.output)
    hp = result.hyperparams
    print(f"✅ Best C={hp.C:.4g}, gamma={hp.gamma:.4g} (cv accuracy {result.cv_accuracy:.4f})")


def cmd_train(config):
    _, X, y, _ = load_matrix(config)
    result = fit_pipeline(X, y, config.pipeline(), seed=config.seed)
    save_model(result.model, config.output)
    hp = result.hyperparams
    print(f"✅ Model saved: {config.output}")
    print(f"📊 Features: {len(result.indices)}  C={hp.C:.4g}  gamma={hp.gamma:.4g}")


def cmd_eval(config):
    _, X, y, roles = load_matrix(config)
    eval_config = EvalConfig(pipeline=config.pipeline(), outer=config.options["outer"],
                             outer_folds=config.folds, seeds=config.seeds, seed=config.seed,
                             cells=tuple(config.options.get("cells") or GRID_CELLS))
    report = evaluate_protocol(X, y, eval_config, roles=roles)
    write_eval_report(report, config.output)
    for cell in report.cells:
        print(f"📊 {cell.name:6s} accuracy {cell.mean.accuracy:.4f} "
              f"(fpr {cell.mean.fpr:.4f}, fnr {cell.mean.fnr:.4f}, F {cell.mean.f_score:.4f})")
    print(f"✅ AUC {report.roc.auc:.4f} on {report.roc_cell}; report in {config.output}")


def cmd_sweep(config):
    sessions = load_sessions(config)
    eval_config = EvalConfig(pipeline=config.pipeline(), seed=config.seed)
    windows = parse_windows(config.options["windows"])
    points = sweep_observation(sessions, windows, eval_config,
                               permutations=config.options["permutations"])
    top = None
    if config.options.get("top_windows"):
        matrices = window_matrices(sessions, parse_windows(config.options["top_windows"]))
        top = top_weighted_features(matrices, k=config.options["top_k"], C_l1=eval_config.pipeline.C_l1)
    report = EvalReport(sweep=points, top_features=top, config={"windows": windows, "seed": config.seed})
    write_eval_report(report, config.output)
    for point in points:
        print(f"📊 L={point.window:g} min: {point.mean_accuracy:.4f} +/- {point.std_accuracy:.4f}")
    print(f"✅ Sweep over {len(points)} window(s) -> {config.output}")


def cmd_report(config):
    report_dir = Path(config.inputs["report"])
    out = Path(config.output) if config.output else report_dir
    out.mkdir(parents=True, exist_ok=True)
    loaded = read_eval_report(report_dir)
    if loaded["roc_points"] is not None:
        plot_roc(loaded["roc_points"], loaded["summary"]["roc"]["auc"], out / "roc.svg")
        print(f"📈 {out / 'roc.svg'}")
    if loaded["sweep_accuracy"] is not None:
        plot_sweep(loaded["sweep_accuracy"], out / "sweep.svg")
        print(f"📈 {out / 'sweep.svg'}")
    workbook = ReportExcelExporter(report_dir).export(out / "feedwatch_report.xlsx")
    print(f"✅ Workbook: {workbook}")


def cmd_detect(config):
    model = load_model(config.inputs["model"])
    engine = DetectionEngine(model, config.window, max_decided=config.options.get("max_decided"))
    source = config.inputs.get("input", "-")
    stream = sys.stdin if source == "-" else open(source, encoding="utf-8")
    sink = sys.stdout if not config.output else open(config.output, "w", encoding="utf-8")
    try:
        written = run_stream(stream, engine, sink)
    finally:
        sink.flush()
        if stream is not sys.stdin:
            stream.close()
        if sink is not sys.stdout:
            sink.close()
    stats = engine.stats
    print(f"✅ {written} verdict(s) from {stats.events} event(s), {stats.ignored} ignored",
          file=sys.stderr)


COMMANDS = {
    "synth": cmd_synth,
    "extract": cmd_extract,
    "select": cmd_select,
    "tune": cmd_tune,
    "train": cmd_train,
    "eval": cmd_eval,
    "sweep": cmd_sweep,
    "report": cmd_report,
    "detect": cmd_detect,
}


def build_parser():
    parser = FeedwatchParser(prog="feedwatch", description="Usage-stealing detection from browsing sessions")
    sub = parser.add_subparsers(dest="subcommand", parser_class=FeedwatchParser)

    common = FeedwatchParser(add_help=False)
    common.add_argument("--verbose", "-v", action="store_true", help="Debug logging")
    common.add_argument("--quiet", "-q", action="store_true", help="Warnings only")
    common.add_argument("--seed", type=int, default=0, help="Root seed for every random stream")

    learn = FeedwatchParser(add_help=False)
    learn.add_argument("--features", required=True, help="Feature-matrix CSV from extract")
    learn.add_argument("--labels", help="session_id,role sidecar (overrides the label column)")
    learn.add_argument("--folds", type=int, default=10, help="Inner k-fold count")
    learn.add_argument("--kernel", choices=["rbf", "linear"], default="rbf")
    learn.add_argument("--no-select", action="store_true", help="Skip feature selection")
    learn.add_argument("--oversample", action="store_true", help="Balance classes by duplication")
    learn.add_argument("--c-l1", type=float, default=1.0, help="1-norm SVM penalty for screening")
    learn.add_argument("--log2c", type=float, nargs=2, metavar=("LO", "HI"))
    learn.add_argument("--log2gamma", type=float, nargs=2, metavar=("LO", "HI"))
    learn.add_argument("--stages", type=int, nargs="+", help="Runs per uniform-design stage")

    p = sub.add_parser("synth", parents=[common], help="Generate a labeled synthetic corpus")
    p.add_argument("--owners", type=int, default=100)
    p.add_argument("--acq", type=int, default=81)
    p.add_argument("--strangers", type=int, default=97)
    p.add_argument("--minutes", type=float, default=30.0, help="Session length")
    p.add_argument("--noisy", type=float, nargs="?", const=0.1, default=0.0,
                   help="Fraction of sessions given an over-long idle gap")
    p.add_argument("--format", choices=["csv", "jsonl"], default="csv")
    p.add_argument("--profiles", help="Role-profile JSON (default config/role_profiles.json)")
    p.add_argument("--out", required=True, help="Output directory")

    p = sub.add_parser("extract", parents=[common], help="Action log -> feature matrix")
    p.add_argument("--log", required=True)
    p.add_argument("--labels")
    p.add_argument("--format", choices=["csv", "jsonl"])
    p.add_argument("--window", type=float, help="Observation period in minutes (omit for whole sessions)")
    p.add_argument("--max-idle", type=float, default=5.0, help="Drop sessions idle longer than this")
    p.add_argument("--out", required=True)

    p = sub.add_parser("select", parents=[common, learn], help="Screen and forward-select features")
    p.add_argument("--screen-only", action="store_true", help="Stop after 1-norm SVM screening")
    p.add_argument("--out", required=True, help="Selection report CSV")

    p = sub.add_parser("tune", parents=[common, learn], help="Uniform-design (C, gamma) search")
    p.add_argument("--out", required=True, help="Tuning trace CSV")

    p = sub.add_parser("train", parents=[common, learn], help="Full training pipeline -> model file")
    p.add_argument("--out", required=True, help="Model JSON")

    p = sub.add_parser("eval", parents=[common, learn], help="Selection x oversampling grid")
    p.add_argument("--outer", choices=["loocv", "kfold"], default="loocv")
    p.add_argument("--seeds", type=int, default=10, help="Oversampling repeats per cell")
    p.add_argument("--cells", nargs="+", choices=list(GRID_CELLS))
    p.add_argument("--out", required=True, help="Report directory")

    p = sub.add_parser("sweep", parents=[common], help="Accuracy per observation period")
    p.add_argument("--log", required=True)
    p.add_argument("--labels")
    p.add_argument("--format", choices=["csv", "jsonl"])
    p.add_argument("--max-idle", type=float, default=5.0)
    p.add_argument("--windows", default="1-25", help="e.g. 1-25 or 2,7,25")
    p.add_argument("--permutations", type=int, default=20)
    p.add_argument("--top-windows", default="1-7", help="Windows for the top-feature report ('' to skip)")
    p.add_argument("--top-k", type=int, default=3)
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--kernel", choices=["rbf", "linear"], default="rbf")
    p.add_argument("--no-select", action="store_true")
    p.add_argument("--oversample", action="store_true")
    p.add_argument("--c-l1", type=float, default=1.0)
    p.add_argument("--out", required=True, help="Report directory")

    p = sub.add_parser("report", parents=[common], help="SVG plots and workbook from a report directory")
    p.add_argument("--report", required=True)
    p.add_argument("--out", help="Output directory (default: the report directory)")

    p = sub.add_parser("detect", parents=[common], help="Stream events through the detector")
    p.add_argument("--model", required=True)
    p.add_argument("--window", type=float, required=True)
    p.add_argument("--input", default="-", help="Event stream JSONL (default stdin)")
    p.add_argument("--max-decided", type=int, help="Remember at most this many decided session ids")
    p.add_argument("--out", help="Verdict file (default stdout)")
    return parser


def configure_logging(verbose=False, quiet=False):
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    logging.basicConfig(level=level, stream=sys.stderr, force=True,
                        format="%(asctime)s %(name)s %(levelname)s: %(message)s")


def run(argv=None):
    """Run one subcommand; returns the process exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not args.subcommand:
            raise UsageError("a subcommand is required")
        configure_logging(args.verbose, args.quiet)
        config = RunConfig.from_args(args)
        config.validate()
    except (UsageError, ValueError) as e:
        print(f"feedwatch: error: {e}", file=sys.stderr)
        return EXIT_USAGE

    logger.info("Run config: %s", asdict(config))
    try:
        COMMANDS[config.subcommand](config)
    except RUNTIME_ERRORS as e:
        print(f"❌ {config.subcommand} failed: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
