"""
relayhouse.events - Append-only JSON Lines event log with gapless sequence numbers.

One record per line, flushed as written so the audit trail survives a
crash mid-run.  Records are immutable; live consumers subscribe to a
fan-out of queues.  Sequence numbers start at 1 and never skip within a
file, which makes replays byte-comparable.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from queue import SimpleQueue
from typing import Any, Dict, List, Optional


class RecordKind(Enum):
    SENSOR_RAW = "sensor_raw"
    ALARM_TRANSITION = "alarm_transition"
    ALERT = "alert"
    COMMAND = "command"
    DATA_WRITE = "data_write"
    POWER_CHANGE = "power_change"
    WARNING = "warning"


class EventLogError(RuntimeError):
    """Sequence discipline violated; indicates a programming error."""


@dataclass(frozen=True)
class EventRecord:
    seq: int
    ts_ms: int
    kind: RecordKind
    payload: Dict[str, Any]

    def to_json_line(self) -> str:
        return json.dumps(
            {
                "seq": self.seq,
                "ts_ms": self.ts_ms,
                "kind": self.kind.value,
                "payload": self.payload,
            },
            separators=(",", ":"),
        )

    @classmethod
    def from_json_line(cls, line: str) -> "EventRecord":
        obj = json.loads(line)
        return cls(
            seq=int(obj["seq"]),
            ts_ms=int(obj["ts_ms"]),
            kind=RecordKind(obj["kind"]),
            payload=dict(obj.get("payload", {})),
        )


class EventLog:
    """In-memory record list plus optional JSONL file, plus live fan-out.

    Appends happen only from the control loop; subscribers read from
    their own queues, so no consumer can stall the loop.
    """

    def __init__(self, path: Optional[str | Path] = None):
        self.path = Path(path) if path else None
        self._fh = None
        if self.path:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self._fh = open(self.path, "w", encoding="utf-8")
        self._records: List[EventRecord] = []
        self._subscribers: List[SimpleQueue] = []
        self._lock = threading.Lock()

    @property
    def last_seq(self) -> int:
        return self._records[-1].seq if self._records else 0

    def append(self, record: EventRecord) -> None:
        """Durably append one record; seq must be exactly last + 1."""
        if record.seq != self.last_seq + 1:
            raise EventLogError(
                f"sequence gap: got {record.seq}, expected {self.last_seq + 1}"
            )
        if self._fh:
            self._fh.write(record.to_json_line() + "\n")
            self._fh.flush()
        with self._lock:
            self._records.append(record)
            subscribers = list(self._subscribers)
        for q in subscribers:
            q.put(record)

    def emit(self, ts_ms: int, kind: RecordKind, payload: Dict[str, Any]) -> EventRecord:
        record = EventRecord(self.last_seq + 1, ts_ms, kind, payload)
        self.append(record)
        return record

    def since(self, seq: int) -> List[EventRecord]:
        with self._lock:
            return [r for r in self._records if r.seq > seq]

    def subscribe(self) -> SimpleQueue:
        q: SimpleQueue = SimpleQueue()
        with self._lock:
            self._subscribers.append(q)
        return q

    def unsubscribe(self, q: SimpleQueue) -> None:
        with self._lock:
            if q in self._subscribers:
                self._subscribers.remove(q)

    def close(self) -> None:
        if self._fh:
            self._fh.close()
            self._fh = None


def read_event_log(path: str | Path) -> List[EventRecord]:
    """Parse a JSONL event log, checking the no-gap sequence invariant."""
    records: List[EventRecord] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            record = EventRecord.from_json_line(line)
            expected = records[-1].seq + 1 if records else 1
            if record.seq != expected:
                raise EventLogError(
                    f"line {lineno}: sequence gap, got {record.seq}, expected {expected}"
                )
            records.append(record)
    return records
