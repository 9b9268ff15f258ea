#!/usr/bin/env python3
"""
Streaming detector for feedwatch
Buffers each session's actions for the observation period, then scores it once
"""

import bisect
import json
import logging
from dataclasses import asdict, dataclass, field
from enum import Enum

from feature_registry import N_FEATURES, observe
from session_log import MS_PER_MINUTE, Session, SessionLogError, make_record
from svm_core import decision

logger = logging.getLogger(__name__)


class DetectorError(ValueError):
    def __init__(self, message, code="protocol"):
        self.code = code
        super().__init__(message)


class Status(Enum):
    OBSERVING = "observing"
    DECIDED = "decided"


@dataclass
class SessionState:
    session_id: str
    records: list = field(default_factory=list)
    status: Status = Status.OBSERVING

    @property
    def first_timestamp(self):
        return self.records[0].timestamp

    def add(self, record):
        # insort keeps ties in arrival order
        position = bisect.bisect_right([r.timestamp for r in self.records], record.timestamp)
        self.records.insert(position, record)


@dataclass(frozen=True)
class Verdict:
    session_id: str
    label: str
    score: float
    window_minutes: float
    decided_at: float

    def to_json(self):
        return json.dumps(asdict(self), sort_keys=True)


@dataclass
class EngineStats:
    events: int = 0
    ignored: int = 0
    verdicts: int = 0
    active: int = 0


def make_verdict(model, session, window, decided_at):
    """Score ``session`` the way the engine does at decision time."""
    vector = observe(session, window)
    score = decision(model, vector.values)
    label = "stalker" if score >= 0 else "owner"
    return Verdict(session.session_id, label, score, vector.window_minutes, decided_at)


def score_session(model, session, window):
    """Batch counterpart of streaming the whole session through an engine."""
    deadline = session.start + window * MS_PER_MINUTE
    trigger = next((r.timestamp for r in session.records if r.timestamp >= deadline), None)
    decided_at = trigger if trigger is not None else session.records[-1].timestamp
    return make_verdict(model, session, window, decided_at)


class DetectionEngine:
    """Per-session observation windows over an interleaved action stream.

    Decided session ids are remembered so late events can be ignored. With
    ``max_decided`` set, only that many are kept (oldest forgotten first); an
    event for a forgotten id opens a new observation.
    """

    def __init__(self, model, window, max_decided=None):
        if not window > 0:
            raise DetectorError(f"window must be positive, got {window}")
        if max_decided is not None and max_decided < 1:
            raise DetectorError(f"max_decided must be at least 1, got {max_decided}")
        if model.input_dim != N_FEATURES:
            raise DetectorError(
                f"model expects {model.input_dim} features, registry has {N_FEATURES}",
                code="dimension_mismatch")
        self.model = model
        self.window = float(window)
        self.sessions = {}
        self.decided = {}
        self.max_decided = max_decided
        self.stats = EngineStats()

    def _decide(self, state, decided_at):
        session = Session(state.session_id, tuple(state.records))
        verdict = make_verdict(self.model, session, self.window, decided_at)
        state.status = Status.DECIDED
        del self.sessions[state.session_id]
        self.decided[state.session_id] = None
        if self.max_decided is not None and len(self.decided) > self.max_decided:
            del self.decided[next(iter(self.decided))]
        self.stats.verdicts += 1
        self.stats.active = len(self.sessions)
        logger.debug("Session %s decided: %s (%.6g)", verdict.session_id, verdict.label, verdict.score)
        return verdict

    def ingest(self, session_id, record):
        """Buffer one action; returns a Verdict when it closes the observation window."""
        self.stats.events += 1
        if session_id in self.decided:
            self.stats.ignored += 1
            logger.debug("Ignoring event for decided session %s", session_id)
            return None
        state = self.sessions.get(session_id)
        if state is None:
            state = self.sessions[session_id] = SessionState(session_id)
            self.stats.active = len(self.sessions)
        state.add(record)
        deadline = state.first_timestamp + self.window * MS_PER_MINUTE
        if record.timestamp >= deadline:
            return self._decide(state, record.timestamp)
        return None

    def finalize(self, session_id, at=None):
        """Decide now on whatever the session has buffered."""
        if session_id in self.decided:
            raise DetectorError(f"session {session_id} already decided", code="already_decided")
        state = self.sessions.get(session_id)
        if state is None:
            raise DetectorError(f"unknown session {session_id}", code="unknown_session")
        decided_at = state.records[-1].timestamp
        if at is not None:
            decided_at = max(decided_at, float(at))
        return self._decide(state, decided_at)

    def ingest_event(self, event):
        """Handle one stream-protocol object (an action or an end marker)."""
        if not isinstance(event, dict) or "session_id" not in event:
            raise DetectorError("event must be an object with session_id")
        session_id = str(event["session_id"])
        if event.get("end"):
            if session_id in self.decided:
                self.stats.ignored += 1
                return None
            return self.finalize(session_id, event.get("timestamp_ms"))
        try:
            record = make_record(event.get("timestamp_ms"), event.get("action"),
                                 event.get("person_id") or "", event.get("target_class") or "")
        except SessionLogError as e:
            code = "unknown_action" if "unknown action" in str(e) else "protocol"
            raise DetectorError(str(e), code=code) from None
        return self.ingest(session_id, record)

    def flush(self):
        """Finalize every observing session in first-arrival order."""
        return [self.finalize(session_id) for session_id in list(self.sessions)]


def ingest(event, engine):
    return engine.ingest_event(event)


def finalize(session_id, engine):
    return engine.finalize(session_id)


def replay(sessions):
    """Stream-protocol objects for ``sessions``: each session's actions, then its end marker."""
    for session in sessions:
        for record in session.records:
            target = record.target
            yield {
                "session_id": session.session_id,
                "timestamp_ms": record.timestamp,
                "action": record.kind.value,
                "person_id": target.person_id if target else "",
                "target_class": target.target_class.value if target else "",
            }
        yield {"session_id": session.session_id, "end": True}


def run_stream(lines, engine, out):
    """Feed newline-delimited events through ``engine``, writing one verdict per line."""
    written = 0
    for line_no, raw in enumerate(lines, 1):
        if not raw.strip():
            continue
        try:
            event = json.loads(raw)
        except json.JSONDecodeError as e:
            raise DetectorError(f"line {line_no}: malformed event ({e.msg})") from None
        try:
            verdict = engine.ingest_event(event)
        except DetectorError as e:
            raise DetectorError(f"line {line_no}: {e}", code=e.code) from None
        if verdict is not None:
            out.write(verdict.to_json() + "\n")
            written += 1
    for verdict in engine.flush():
        out.write(verdict.to_json() + "\n")
        written += 1
    return written
