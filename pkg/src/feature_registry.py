#!/usr/bin/env python3
"""
Feature registry for feedwatch
Embeds a (windowed) session into the fixed-order vector of session features
"""

import logging
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np
import pandas as pd

from session_log import (
    ACTION_KINDS,
    INTERACTIVE_KINDS,
    MS_PER_MINUTE,
    TARGET_CLASSES,
    ActionKind,
    TargetClass,
    truncate,
)

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1


class FeatureError(ValueError):
    pass


class PageKind(Enum):
    FEED = "feed"
    MSG = "msg"
    SELF_PAGES = "self"
    FRIEND_PAGES = "friend"
    NON_FRIEND_PAGES = "nonfriend"
    PUBLIC = "public"


PAGE_KINDS = list(PageKind)

_FIXED_PAGE = {
    ActionKind.TO_FEED_PAGE: PageKind.FEED,
    ActionKind.TO_MESSAGE_PAGE: PageKind.MSG,
    ActionKind.TO_FAN_PAGE: PageKind.PUBLIC,
    ActionKind.TO_GROUP_PAGE: PageKind.PUBLIC,
}
_PERSON_PAGE = {
    TargetClass.SELF_OWNER: PageKind.SELF_PAGES,
    TargetClass.FRIEND: PageKind.FRIEND_PAGES,
    TargetClass.NON_FRIEND: PageKind.NON_FRIEND_PAGES,
}
VISIT_STATISTICS = ["mean", "standard_deviation", "median", "maximum"]


@dataclass(frozen=True)
class FeatureDescriptor:
    index: int
    name: str
    family: int


@dataclass(frozen=True)
class PageInterval:
    page: PageKind
    start: float
    end: float

    @property
    def minutes(self):
        return (self.end - self.start) / MS_PER_MINUTE


@dataclass
class FeatureVector:
    values: np.ndarray
    window_minutes: float

    def __getitem__(self, name):
        return self.values[index_of(name)]

    def as_dict(self):
        return {d.name: float(self.values[d.index]) for d in REGISTRY}


def _build_registry():
    names = []

    frequency = [f"f.{kind.slug}" for kind in ACTION_KINDS]
    frequency += ["f.acts", "f.acts.excluding.page.expand"]
    names += [(n, 1) for n in frequency]

    targeted = [f"f.{tc.value}.{kind.slug}" for kind in INTERACTIVE_KINDS for tc in TARGET_CLASSES]
    names += [(n, 2) for n in targeted]

    names += [("b." + n[2:], 3) for n in frequency + targeted]
    names += [(f"f.act.{tc.value}", 4) for tc in TARGET_CLASSES]
    names += [(f"ts.page.{p.value}", 5) for p in PAGE_KINDS]
    for prefix in ("f.act.page", "f.act.expand.page", "f.act.non.expand.page"):
        names += [(f"{prefix}.{p.value}", 6) for p in PAGE_KINDS]
    names += [("n.act.person", 7)]
    names += [(f"n.act.person.{stat}", 8) for stat in VISIT_STATISTICS]

    return tuple(FeatureDescriptor(i, name, family) for i, (name, family) in enumerate(names))


REGISTRY = _build_registry()
N_FEATURES = len(REGISTRY)
FEATURE_NAMES = [d.name for d in REGISTRY]
_INDEX = {d.name: d.index for d in REGISTRY}
_BINARY_TWINS = [(_INDEX["f." + d.name[2:]], d.index) for d in REGISTRY if d.family == 3]


def registry():
    """The canonical ordered feature list."""
    return list(REGISTRY)


def index_of(name):
    try:
        return _INDEX[name]
    except KeyError:
        raise FeatureError(f"unknown feature '{name}'") from None


def _page_after(record, current):
    kind = record.kind
    if kind in _FIXED_PAGE:
        return _FIXED_PAGE[kind]
    if kind.person_page:
        return _PERSON_PAGE[record.target.target_class]
    return current


def _walk(records, start, end):
    """Replay page switches; returns (intervals, page of each record)."""
    intervals = []
    current, opened = PageKind.FEED, start
    pages = []
    for record in records:
        nxt = _page_after(record, current)
        if nxt is not current:
            if record.timestamp > opened:
                intervals.append(PageInterval(current, opened, record.timestamp))
                opened = record.timestamp
            elif intervals and intervals[-1].page is nxt:
                # zero-length stay collapses back into the previous interval
                opened = intervals.pop().start
            current = nxt
        pages.append(current)
    intervals.append(PageInterval(current, opened, max(end, opened)))
    return intervals, pages


def _resolve_window(session, window):
    if window is None:
        window = session.window_minutes
    if window is None:
        window = max(session.span_minutes, 1.0)
    if not window > 0:
        raise FeatureError(f"window_minutes must be positive, got {window}")
    return float(window)


def _in_window(session, window):
    cutoff = session.start + window * MS_PER_MINUTE
    return [r for r in session.records if r.timestamp <= cutoff], cutoff


def page_timeline(session, window=None):
    """Page intervals tiling [session start, session start + window]."""
    window = _resolve_window(session, window)
    records, end = _in_window(session, window)
    intervals, _ = _walk(records, session.start, end)
    return intervals


def _visit_statistics(records):
    visits = Counter(r.target.person_id for r in records if r.kind.person_page)
    if not visits:
        return [0.0] * len(VISIT_STATISTICS)
    counts = np.array(sorted(visits.values()), dtype=float)
    std = float(np.std(counts, ddof=1)) if counts.size > 1 else 0.0
    return [float(np.mean(counts)), std, float(np.median(counts)), float(np.max(counts))]


def extract(session, window=None):
    """Fill every registry feature for ``session`` over ``window`` minutes.

    With no window (and none recorded on the session) the denominator is the
    elapsed session time clamped below at one minute.
    """
    window = _resolve_window(session, window)
    records, end = _in_window(session, window)
    values = np.zeros(N_FEATURES)

    kinds = Counter(r.kind for r in records)
    for kind in ACTION_KINDS:
        values[_INDEX[f"f.{kind.slug}"]] = kinds[kind] / window
    values[_INDEX["f.acts"]] = len(records) / window
    values[_INDEX["f.acts.excluding.page.expand"]] = (
        len(records) - kinds[ActionKind.EXPAND_PAGE]) / window

    interactive = [r for r in records if r.kind.interactive]
    targeted = Counter((r.kind, r.target.target_class) for r in interactive)
    for kind in INTERACTIVE_KINDS:
        for tc in TARGET_CLASSES:
            values[_INDEX[f"f.{tc.value}.{kind.slug}"]] = targeted[(kind, tc)] / window
    by_class = Counter(r.target.target_class for r in interactive)
    for tc in TARGET_CLASSES:
        values[_INDEX[f"f.act.{tc.value}"]] = by_class[tc] / window

    for f_index, b_index in _BINARY_TWINS:
        values[b_index] = 1.0 if values[f_index] > 0 else 0.0

    intervals, pages = _walk(records, session.start, end)
    for interval in intervals:
        values[_INDEX[f"ts.page.{interval.page.value}"]] += interval.minutes

    on_page = Counter(pages)
    expands = Counter(p for p, r in zip(pages, records) if r.kind is ActionKind.EXPAND_PAGE)
    for page in PAGE_KINDS:
        values[_INDEX[f"f.act.page.{page.value}"]] = on_page[page] / window
        values[_INDEX[f"f.act.expand.page.{page.value}"]] = expands[page] / window
        values[_INDEX[f"f.act.non.expand.page.{page.value}"]] = (
            on_page[page] - expands[page]) / window

    values[_INDEX["n.act.person"]] = len({r.target.person_id for r in interactive})
    for stat, value in zip(VISIT_STATISTICS, _visit_statistics(records)):
        values[_INDEX[f"n.act.person.{stat}"]] = value

    return FeatureVector(values, window)


def extract_whole(session):
    """Whole-session features, ignoring any window recorded on the session."""
    window = max(session.span_minutes, 1.0)
    return extract(session, window)


def observe(session, window):
    """Features the streaming detector computes for ``session`` at window ``window``.

    A session that reaches the window end is scored over exactly ``window``
    minutes; one that ends earlier is scored over its own elapsed time.
    """
    deadline = session.start + window * MS_PER_MINUTE
    if session.records and session.records[-1].timestamp >= deadline:
        return extract(truncate(session, window), window)
    return extract_whole(session)


def feature_matrix(sessions, window=None):
    """Feature-matrix frame: session_id, every feature name, then label.

    Windowed rows go through ``observe`` so they match what the detector scores.
    """
    rows = []
    for session in sessions:
        vector = extract_whole(session) if window is None else observe(session, window)
        rows.append(vector.values)
    frame = pd.DataFrame(np.array(rows).reshape(len(rows), N_FEATURES), columns=FEATURE_NAMES)
    frame.insert(0, "session_id", [s.session_id for s in sessions])
    frame["label"] = pd.array(
        [s.label.binary if s.label is not None else None for s in sessions], dtype="Int64")
    logger.info("Extracted %d x %d feature matrix (window=%s)", len(rows), N_FEATURES, window)
    return frame


def write_feature_matrix(frame, path):
    frame.to_csv(path, index=False, float_format="%.17g")


def read_feature_matrix(path):
    """Load a feature-matrix CSV; returns (frame, X, y) with y None when unlabeled."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Feature matrix not found at {path}")
    frame = pd.read_csv(path, dtype={"session_id": str}, float_precision="round_trip")
    names = [c for c in frame.columns if c not in ("session_id", "label")]
    if names != FEATURE_NAMES:
        raise FeatureError(f"{path} does not carry the {N_FEATURES}-feature registry header")
    X = frame[FEATURE_NAMES].to_numpy(dtype=float)
    y = None
    if "label" in frame.columns and frame["label"].notna().all() and len(frame):
        y = frame["label"].to_numpy(dtype=int)
        if not set(np.unique(y)) <= {-1, 1}:
            raise FeatureError("labels must be -1 or +1")
    return frame, X, y
