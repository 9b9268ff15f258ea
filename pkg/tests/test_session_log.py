#!/usr/bin/env python3
"""
Session log tests for feedwatch
Parsing, validation, cleaning and windowing of action logs
"""

import io

import pytest

from conftest import BASE_MS, rec
from session_log import (
    ACTION_KINDS,
    ActionKind,
    RoleLabel,
    Session,
    SessionLogError,
    TargetClass,
    attach_labels,
    clean_sessions,
    parse_action_log,
    read_labels,
    truncate,
    write_action_log,
    write_labels,
)

HEADER = "session_id,timestamp_ms,action,person_id,target_class\n"


def parse_csv(text):
    return parse_action_log(io.StringIO(text), "csv")


class TestActionTaxonomy:
    """The 18 action kinds and their flags"""

    def test_eighteen_kinds_in_table_order(self):
        assert len(ACTION_KINDS) == 18
        assert ACTION_KINDS[0] is ActionKind.EXPAND_COMMENTS
        assert ACTION_KINDS[-1] is ActionKind.EXPAND_PAGE

    def test_interactive_and_page_switching_flags(self):
        interactive = [k for k in ACTION_KINDS if k.interactive]
        switching = [k for k in ACTION_KINDS if k.page_switching]
        assert interactive == ACTION_KINDS[:10]
        assert switching == ACTION_KINDS[6:14]
        assert switching[0] is ActionKind.TO_FRIEND_LIST_PAGE
        assert switching[-1] is ActionKind.TO_MESSAGE_PAGE

    def test_person_pages(self):
        person = {k for k in ACTION_KINDS if k.person_page}
        assert person == {ActionKind.TO_FRIEND_LIST_PAGE, ActionKind.TO_NOTE_PAGE,
                          ActionKind.TO_PHOTO_PAGE, ActionKind.TO_WALL_PAGE}

    def test_hyperlink_alias(self):
        assert ActionKind.from_name("Click_Hyper-links") is ActionKind.CLICK_HYPERLINKS

    def test_role_binary_projection(self):
        assert RoleLabel.OWNER.binary == -1
        assert RoleLabel.ACQUAINTANCE.binary == 1
        assert RoleLabel.STRANGER.binary == 1


class TestParseActionLog:
    """CSV and JSONL parsing"""

    def test_single_likes_row(self):
        sessions = parse_csv(HEADER + "s1,1345837539249.47,Likes,pA,friend\n")
        assert len(sessions) == 1
        record = sessions[0].records[0]
        assert sessions[0].session_id == "s1"
        assert record.timestamp == 1345837539249.47
        assert record.kind is ActionKind.LIKES
        assert record.target.person_id == "pA"
        assert record.target.target_class is TargetClass.FRIEND

    def test_empty_stream(self):
        assert parse_csv("") == []
        assert parse_action_log(io.StringIO(""), "jsonl") == []

    def test_non_interactive_with_target_rejected(self):
        with pytest.raises(SessionLogError, match="non-interactive action carries target") as info:
            parse_csv(HEADER + "s1,10,Likes,pA,friend\ns1,20,Expand_Page,pA,friend\n")
        assert info.value.line == 3

    def test_interactive_without_target_rejected(self):
        with pytest.raises(SessionLogError, match="missing target"):
            parse_csv(HEADER + "s1,10,View_Cards,,\n")

    def test_unknown_action_rejected(self):
        with pytest.raises(SessionLogError, match="unknown action"):
            parse_csv(HEADER + "s1,10,Poke,,\n")

    def test_unsorted_records_are_sorted_stably(self):
        text = HEADER + "s1,30,To_Feed_Page,,\ns1,10,Expand_Page,,\ns1,10,To_Fan_Page,,\n"
        kinds = [r.kind for r in parse_csv(text)[0].records]
        assert kinds == [ActionKind.EXPAND_PAGE, ActionKind.TO_FAN_PAGE, ActionKind.TO_FEED_PAGE]

    def test_sessions_keep_first_appearance_order(self):
        text = HEADER + "b,1,Expand_Page,,\na,2,Expand_Page,,\nb,3,Expand_Page,,\n"
        assert [s.session_id for s in parse_csv(text)] == ["b", "a"]

    def test_jsonl_line_numbers(self):
        text = '{"session_id": "s1", "timestamp_ms": 1, "action": "Expand_Page"}\n{bad\n'
        with pytest.raises(SessionLogError) as info:
            parse_action_log(io.StringIO(text), "jsonl")
        assert info.value.line == 2

    def test_csv_extra_field_line_number(self):
        text = HEADER + "s1,1,Expand_Page,,\ns1,2,Expand_Page,,,extra\n"
        with pytest.raises(SessionLogError, match="malformed row") as info:
            parse_csv(text)
        assert info.value.line == 3

    @pytest.mark.parametrize("fmt", ["csv", "jsonl"])
    def test_invalid_utf8(self, fmt):
        rows = {"csv": HEADER.encode() + b"s1,1,Likes,\xff\xfe,friend\n",
                "jsonl": b'{"session_id": "s1", "timestamp_ms": 1, "action": "Expand_Page"}\n\xff\n'}
        with pytest.raises(SessionLogError, match="invalid UTF-8") as info:
            parse_action_log(io.BytesIO(rows[fmt]), fmt)
        assert info.value.line == 2

    def test_missing_file(self, temp_dir):
        with pytest.raises(FileNotFoundError):
            parse_action_log(temp_dir / "absent.csv")


class TestRoundTrip:
    """Serialization back to the log formats"""

    def test_csv_round_trip_is_exact(self, golden_session, temp_dir):
        path = temp_dir / "actions.csv"
        odd = Session("odd", (rec(0.0, "Expand_Page"),
                              rec(1.0 / 3.0, "Likes", "p,q", "nonfriend")))
        write_action_log([golden_session, odd], path)
        parsed = parse_action_log(path)
        assert [s.records for s in parsed] == [golden_session.records, odd.records]

    def test_jsonl_round_trip(self, golden_session, temp_dir):
        path = temp_dir / "actions.jsonl"
        write_action_log([golden_session], path, format="jsonl")
        assert parse_action_log(path, "jsonl")[0].records == golden_session.records

    def test_labels_sidecar(self, golden_session, temp_dir):
        path = temp_dir / "labels.csv"
        write_labels([golden_session], path)
        labels = read_labels(path)
        assert labels == {"golden": RoleLabel.OWNER}
        bare = Session("golden", golden_session.records)
        assert attach_labels([bare], labels)[0].label is RoleLabel.OWNER


class TestCleanSessions:
    """Idle-gap filtering"""

    def session(self, minutes):
        return Session("s", tuple(rec(m, "Expand_Page") for m in minutes))

    def test_gaps_below_threshold_kept(self):
        result = clean_sessions([self.session([0.0, 4.9, 6.9])])
        assert len(result.sessions) == 1
        assert result.dropped == 0

    def test_gap_above_threshold_dropped(self):
        result = clean_sessions([self.session([0.0, 5.01])])
        assert result.sessions == []
        assert result.dropped == 1

    def test_exact_threshold_kept(self):
        assert len(clean_sessions([self.session([0.0, 5.0])]).sessions) == 1

    def test_corpus_counts(self):
        noisy = [self.session([0.0, 6.0]) for _ in range(33)]
        clean = [self.session([0.0, 1.0]) for _ in range(278)]
        result = clean_sessions(noisy + clean)
        assert len(result.sessions) == 278
        assert result.dropped == 33

    def test_idempotent(self):
        sessions = [self.session([0.0, 6.0]), self.session([0.0, 2.0])]
        once = clean_sessions(sessions).sessions
        assert clean_sessions(once).sessions == once


class TestTruncate:
    """Observation windows"""

    def test_boundary(self):
        session = Session("s", (rec(0, "Expand_Page"), rec(1, "Expand_Page"), rec(3, "Expand_Page")))
        kept = truncate(session, 2)
        assert [r.timestamp for r in kept.records] == [BASE_MS, BASE_MS + 60000.0]
        assert kept.window_minutes == 2

    def test_window_beyond_span_is_noop(self, golden_session):
        assert truncate(golden_session, 30).records == golden_session.records

    def test_composition_takes_minimum(self, golden_session):
        assert truncate(truncate(golden_session, 3), 4) == truncate(golden_session, 3)
        assert truncate(truncate(golden_session, 4), 2) == truncate(golden_session, 2)

    def test_non_positive_window(self, golden_session):
        with pytest.raises(ValueError):
            truncate(golden_session, 0)
