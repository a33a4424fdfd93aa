"""Event log tests: sequence discipline, durability, fan-out, parsing."""

import pytest

from relayhouse.events import (
    EventLog,
    EventLogError,
    EventRecord,
    RecordKind,
    read_event_log,
)


def test_first_record_gets_seq_1(tmp_path):
    log = EventLog(tmp_path / "events.jsonl")
    record = log.emit(0, RecordKind.COMMAND, {"command": "arm"})
    assert record.seq == 1
    assert log.last_seq == 1


def test_append_rejects_gap():
    log = EventLog(None)
    log.emit(0, RecordKind.WARNING, {"reason": "x"})
    with pytest.raises(EventLogError, match="sequence gap"):
        log.append(EventRecord(3, 0, RecordKind.WARNING, {}))


def test_append_rejects_duplicate_seq():
    log = EventLog(None)
    record = log.emit(0, RecordKind.WARNING, {"reason": "x"})
    with pytest.raises(EventLogError):
        log.append(record)


def test_file_roundtrip(tmp_path):
    path = tmp_path / "events.jsonl"
    log = EventLog(path)
    for i in range(5):
        log.emit(i * 50, RecordKind.DATA_WRITE, {"byte": i})
    log.close()
    records = read_event_log(path)
    assert len(records) == 5
    assert [r.seq for r in records] == [1, 2, 3, 4, 5]
    assert records[3].payload == {"byte": 3}
    assert records[3].kind is RecordKind.DATA_WRITE


def test_lines_are_flushed_immediately(tmp_path):
    path = tmp_path / "events.jsonl"
    log = EventLog(path)
    log.emit(0, RecordKind.ALERT, {"sensor_id": "ir1", "episode": 1})
    # no close: the line must already be on disk
    assert len(read_event_log(path)) == 1


def test_reader_detects_gap(tmp_path):
    path = tmp_path / "events.jsonl"
    r1 = EventRecord(1, 0, RecordKind.WARNING, {})
    r3 = EventRecord(3, 0, RecordKind.WARNING, {})
    path.write_text(r1.to_json_line() + "\n" + r3.to_json_line() + "\n")
    with pytest.raises(EventLogError, match="line 2"):
        read_event_log(path)


def test_since_filters_by_seq():
    log = EventLog(None)
    for i in range(4):
        log.emit(0, RecordKind.WARNING, {"n": i})
    assert [r.seq for r in log.since(2)] == [3, 4]
    assert log.since(99) == []


def test_subscribers_receive_records():
    log = EventLog(None)
    q = log.subscribe()
    record = log.emit(10, RecordKind.ALERT, {"sensor_id": "ir1", "episode": 1})
    assert q.get_nowait() == record
    log.unsubscribe(q)
    log.emit(20, RecordKind.WARNING, {})
    assert q.empty()


def test_serialization_is_stable():
    a = EventRecord(1, 50, RecordKind.SENSOR_RAW, {"sensor_id": "ir1", "raw": True})
    b = EventRecord(1, 50, RecordKind.SENSOR_RAW, {"sensor_id": "ir1", "raw": True})
    assert a.to_json_line() == b.to_json_line()
    assert EventRecord.from_json_line(a.to_json_line()) == a
