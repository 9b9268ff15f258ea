#!/usr/bin/env python3
"""
Session log handling for feedwatch
Parses, validates, cleans and windows decoded social-network action logs
"""

import io
import json
import logging
import math
import re
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Optional

import pandas as pd

logger = logging.getLogger(__name__)

CSV_COLUMNS = ["session_id", "timestamp_ms", "action", "person_id", "target_class"]
MS_PER_MINUTE = 60000.0


class SessionLogError(ValueError):
    """Raised for malformed action logs; ``line`` is 1-based when known."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ActionKind(Enum):
    """The 18 collected action types, in the order of the action taxonomy table."""

    EXPAND_COMMENTS = "Expand_Comments"
    LIKES = "Likes"
    VIEW_CARDS = "View_Cards"
    VIEW_LIKES = "View_Likes"
    VIEW_MESSAGES = "View_Messages"
    VIEW_PHOTOS = "View_Photos"
    TO_FRIEND_LIST_PAGE = "To_Friend_List_Page"
    TO_NOTE_PAGE = "To_Note_Page"
    TO_PHOTO_PAGE = "To_Photo_Page"
    TO_WALL_PAGE = "To_Wall_Page"
    TO_FAN_PAGE = "To_Fan_Page"
    TO_FEED_PAGE = "To_Feed_Page"
    TO_GROUP_PAGE = "To_Group_Page"
    TO_MESSAGE_PAGE = "To_Message_Page"
    ADD_COMMENTS = "Add_Comments"
    DELETE_COMMENTS = "Delete_Comments"
    CLICK_HYPERLINKS = "Click_Hyperlinks"
    EXPAND_PAGE = "Expand_Page"

    @property
    def interactive(self):
        return self in _INTERACTIVE

    @property
    def page_switching(self):
        return self in _PAGE_SWITCHING

    @property
    def person_page(self):
        """Page switch into a person's pages (wall, friend list, notes, photos)."""
        return self.interactive and self.page_switching

    @property
    def slug(self):
        """Lower-case name used in feature names, e.g. ``view_cards``."""
        return self.value.lower()

    @classmethod
    def from_name(cls, name):
        try:
            return _BY_NAME[name]
        except KeyError:
            raise SessionLogError(f"unknown action name '{name}'") from None


ACTION_KINDS = list(ActionKind)
_INTERACTIVE = frozenset(ACTION_KINDS[:10])
_PAGE_SWITCHING = frozenset(ACTION_KINDS[6:14])
_BY_NAME = {kind.value: kind for kind in ACTION_KINDS}
# literal spelling of the hyperlink row in the taxonomy table
_BY_NAME["Click_Hyper-links"] = ActionKind.CLICK_HYPERLINKS
INTERACTIVE_KINDS = [kind for kind in ACTION_KINDS if kind.interactive]


class TargetClass(Enum):
    SELF_OWNER = "self"
    FRIEND = "friend"
    NON_FRIEND = "nonfriend"

    @classmethod
    def from_name(cls, name):
        try:
            return cls(name)
        except ValueError:
            raise SessionLogError(f"unknown target class '{name}'") from None


TARGET_CLASSES = list(TargetClass)


class RoleLabel(Enum):
    OWNER = "owner"
    ACQUAINTANCE = "acquaintance"
    STRANGER = "stranger"

    @property
    def binary(self):
        """Owner is -1, both stalker roles are +1."""
        return -1 if self is RoleLabel.OWNER else 1

    @classmethod
    def from_name(cls, name):
        try:
            return cls(name)
        except ValueError:
            raise SessionLogError(f"unknown role '{name}'") from None


@dataclass(frozen=True)
class Target:
    person_id: str
    target_class: TargetClass


@dataclass(frozen=True)
class ActionRecord:
    timestamp: float
    kind: ActionKind
    target: Optional[Target] = None

    def __post_init__(self):
        if not math.isfinite(self.timestamp) or self.timestamp < 0:
            raise SessionLogError(f"invalid timestamp {self.timestamp!r}")
        if self.kind.interactive and self.target is None:
            raise SessionLogError(f"interactive action {self.kind.value} missing target")
        if not self.kind.interactive and self.target is not None:
            raise SessionLogError(f"non-interactive action carries target ({self.kind.value})")


@dataclass(frozen=True)
class Session:
    session_id: str
    records: tuple = field(default_factory=tuple)
    label: Optional[RoleLabel] = None
    window_minutes: Optional[float] = None

    @property
    def start(self):
        return self.records[0].timestamp if self.records else 0.0

    @property
    def span_minutes(self):
        if not self.records:
            return 0.0
        return (self.records[-1].timestamp - self.records[0].timestamp) / MS_PER_MINUTE


@dataclass
class CleaningResult:
    sessions: list
    dropped: int


def make_record(timestamp, action, person_id="", target_class="", line=None):
    """Build a validated ActionRecord from raw field strings."""
    try:
        kind = ActionKind.from_name(action)
        try:
            ts = float(timestamp)
        except (TypeError, ValueError):
            raise SessionLogError(f"bad timestamp '{timestamp}'") from None
        person_id = person_id or ""
        target_class = target_class or ""
        if kind.interactive:
            if not person_id or not target_class:
                raise SessionLogError(f"interactive action {kind.value} missing target")
            target = Target(person_id, TargetClass.from_name(target_class))
        else:
            if person_id or target_class:
                raise SessionLogError("non-interactive action carries target")
            target = None
        return ActionRecord(ts, kind, target)
    except SessionLogError as e:
        if line is not None and e.line is None:
            raise SessionLogError(str(e), line=line) from None
        raise


def _group(rows):
    grouped = {}
    for session_id, record in rows:
        grouped.setdefault(session_id, []).append(record)
    # sorted() is stable: equal timestamps keep arrival order
    return [
        Session(sid, tuple(sorted(records, key=lambda r: r.timestamp)))
        for sid, records in grouped.items()
    ]


def _read_bytes(stream):
    if isinstance(stream, (str, Path)):
        path = Path(stream)
        if not path.exists():
            raise FileNotFoundError(f"Action log not found at {path}")
        return path.read_bytes()
    data = stream.read()
    return data.encode("utf-8") if isinstance(data, str) else data


def _decode(data):
    try:
        return data.decode("utf-8")
    except UnicodeDecodeError as e:
        line = data.count(b"\n", 0, e.start) + 1
        raise SessionLogError(f"invalid UTF-8 at byte {e.start}", line=line) from None


def _parse_csv(data):
    if not data.strip():
        return []
    _decode(data)
    try:
        frame = pd.read_csv(io.BytesIO(data), dtype=str, keep_default_na=False,
                            encoding="utf-8", skip_blank_lines=False)
    except pd.errors.ParserError as e:
        found = re.search(r"line (\d+)", str(e))
        raise SessionLogError(f"malformed row: {e}", line=int(found.group(1)) if found else None) from None
    missing = [c for c in CSV_COLUMNS if c not in frame.columns]
    if missing:
        raise SessionLogError(f"missing columns {missing}", line=1)
    frame = frame.fillna("")
    rows = []
    for offset, row in enumerate(frame[CSV_COLUMNS].itertuples(index=False)):
        line = offset + 2
        if not any(row):
            continue
        if not row.session_id:
            raise SessionLogError("empty session_id", line=line)
        record = make_record(row.timestamp_ms, row.action, row.person_id,
                             row.target_class, line=line)
        rows.append((row.session_id, record))
    return rows


def _parse_jsonl(data):
    rows = []
    for line_no, raw in enumerate(_decode(data).splitlines(), 1):
        if not raw.strip():
            continue
        try:
            obj = json.loads(raw)
        except json.JSONDecodeError as e:
            raise SessionLogError(f"malformed row: {e.msg}", line=line_no) from None
        if not isinstance(obj, dict) or "session_id" not in obj:
            raise SessionLogError("malformed row: expected object with session_id", line=line_no)
        record = make_record(obj.get("timestamp_ms"), obj.get("action"),
                             obj.get("person_id") or "", obj.get("target_class") or "",
                             line=line_no)
        rows.append((str(obj["session_id"]), record))
    return rows


def parse_action_log(stream, format="csv"):
    """Parse a CSV or JSONL action log into sessions sorted by timestamp."""
    data = _read_bytes(stream)
    if format == "csv":
        rows = _parse_csv(data)
    elif format == "jsonl":
        rows = _parse_jsonl(data)
    else:
        raise SessionLogError(f"unknown log format '{format}'")
    sessions = _group(rows)
    logger.info("Parsed %d records into %d sessions", len(rows), len(sessions))
    return sessions


def _record_row(session_id, record):
    target = record.target
    return {
        "session_id": session_id,
        # repr() is the shortest exact round-trip form of the float
        "timestamp_ms": repr(float(record.timestamp)),
        "action": record.kind.value,
        "person_id": target.person_id if target else "",
        "target_class": target.target_class.value if target else "",
    }


def write_action_log(sessions, target, format="csv"):
    """Serialize sessions in the CSV or JSONL action-log format."""
    rows = [_record_row(s.session_id, r) for s in sessions for r in s.records]
    if format == "csv":
        frame = pd.DataFrame(rows, columns=CSV_COLUMNS)
        frame.to_csv(target, index=False, encoding="utf-8")
    elif format == "jsonl":
        lines = []
        for row in rows:
            row = dict(row, timestamp_ms=float(row["timestamp_ms"]))
            lines.append(json.dumps(row, sort_keys=True))
        text = "".join(line + "\n" for line in lines)
        if isinstance(target, (str, Path)):
            Path(target).write_text(text, encoding="utf-8")
        else:
            target.write(text)
    else:
        raise SessionLogError(f"unknown log format '{format}'")


def read_labels(path):
    """Read the ``session_id,role`` sidecar into {session_id: RoleLabel}."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Label file not found at {path}")
    frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    if list(frame.columns[:2]) != ["session_id", "role"]:
        raise SessionLogError("label sidecar must have header session_id,role", line=1)
    return {row.session_id: RoleLabel.from_name(row.role) for row in frame.itertuples(index=False)}


def write_labels(sessions, path):
    rows = [{"session_id": s.session_id, "role": s.label.value}
            for s in sessions if s.label is not None]
    pd.DataFrame(rows, columns=["session_id", "role"]).to_csv(path, index=False)


def attach_labels(sessions, labels):
    return [replace(s, label=labels.get(s.session_id, s.label)) for s in sessions]


def clean_sessions(sessions, max_idle=5.0):
    """Drop sessions with any idle gap strictly longer than ``max_idle`` minutes.

    Empty sessions are dropped as well; survivors keep their input order.
    """
    limit = max_idle * MS_PER_MINUTE
    survivors = []
    for session in sessions:
        records = session.records
        if not records:
            continue
        if any(b.timestamp - a.timestamp > limit for a, b in zip(records, records[1:])):
            continue
        survivors.append(session)
    dropped = len(sessions) - len(survivors)
    if dropped:
        logger.info("Dropped %d noisy sessions (idle gap > %s min)", dropped, max_idle)
    return CleaningResult(survivors, dropped)


def truncate(session, window):
    """Keep the records within ``window`` minutes of the session's first record."""
    if not window > 0:
        raise ValueError(f"window must be positive, got {window}")
    if session.window_minutes is not None:
        window = min(window, session.window_minutes)
    if not session.records:
        return replace(session, window_minutes=window)
    cutoff = session.start + window * MS_PER_MINUTE
    kept = tuple(r for r in session.records if r.timestamp <= cutoff)
    return replace(session, records=kept, window_minutes=window)
