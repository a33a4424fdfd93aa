"""
relayhouse.sim - Deterministic virtual hardware behind the HAL contract.

One SimWorld bundles the relay card, the port wires, the infrared sensor
and a millisecond clock that only moves when step() is called.  Stimuli
(intrusions, power events, stuck lines) arrive as timed scenario events,
applied in (time, insertion) order, so identical inputs always replay to
identical traces.  The world never touches the wall clock or randomness.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from enum import Enum
from typing import Dict, List, Optional, Tuple

from . import card as card_model
from . import port
from .house import HouseConfig
from .port import HalBackend, Level, LineLevels, PortRegisters


class ScenarioError(ValueError):
    """Malformed scenario document or event."""


class ScenarioKind(Enum):
    IR_DISTURBANCE = "ir_disturbance"
    POWER_LOSS = "power_loss"
    POWER_RESTORE = "power_restore"
    LINE_STUCK = "line_stuck"
    LINE_RELEASE = "line_release"


# Required extra fields per kind, beyond t_ms.
_KIND_FIELDS = {
    ScenarioKind.IR_DISTURBANCE: {"sensor_id", "duration_ms"},
    ScenarioKind.POWER_LOSS: set(),
    ScenarioKind.POWER_RESTORE: set(),
    ScenarioKind.LINE_STUCK: {"line", "level"},
    ScenarioKind.LINE_RELEASE: {"line"},
}


@dataclass(frozen=True)
class ScenarioEvent:
    """A timed stimulus for the simulated hardware."""
    t_ms: int
    kind: ScenarioKind
    sensor_id: Optional[str] = None
    duration_ms: Optional[int] = None
    line: Optional[str] = None
    level: Optional[Level] = None

    def __post_init__(self):
        if self.t_ms < 0:
            raise ScenarioError("t_ms cannot be negative")
        needed = _KIND_FIELDS[self.kind]
        if "sensor_id" in needed and not self.sensor_id:
            raise ScenarioError(f"{self.kind.value} requires sensor_id")
        if "duration_ms" in needed and (self.duration_ms is None or self.duration_ms <= 0):
            raise ScenarioError(f"{self.kind.value} requires duration_ms > 0")
        if "line" in needed:
            if self.line not in port.LINES_BY_NAME:
                raise ScenarioError(f"{self.kind.value} requires a known line")
        if "level" in needed and self.level is None:
            raise ScenarioError(f"{self.kind.value} requires level")

    def to_dict(self) -> dict:
        out: dict = {"t_ms": self.t_ms, "kind": self.kind.value}
        if self.sensor_id is not None:
            out["sensor_id"] = self.sensor_id
        if self.duration_ms is not None:
            out["duration_ms"] = self.duration_ms
        if self.line is not None:
            out["line"] = self.line
        if self.level is not None:
            out["level"] = self.level.name.lower()
        return out


def event_from_dict(obj: dict, where: str = "event") -> ScenarioEvent:
    if not isinstance(obj, dict):
        raise ScenarioError(f"{where}: expected an object")
    allowed = {"t_ms", "kind", "sensor_id", "duration_ms", "line", "level"}
    unknown = set(obj) - allowed
    if unknown:
        raise ScenarioError(f"{where}: unknown keys {sorted(unknown)}")
    try:
        kind = ScenarioKind(obj["kind"])
    except (KeyError, ValueError) as exc:
        raise ScenarioError(f"{where}: missing or unknown kind") from exc
    level = None
    if "level" in obj:
        try:
            level = Level[str(obj["level"]).upper()]
        except KeyError as exc:
            raise ScenarioError(f"{where}: level must be high or low") from exc
    try:
        return ScenarioEvent(
            t_ms=int(obj["t_ms"]),
            kind=kind,
            sensor_id=obj.get("sensor_id"),
            duration_ms=int(obj["duration_ms"]) if "duration_ms" in obj else None,
            line=obj.get("line"),
            level=level,
        )
    except KeyError as exc:
        raise ScenarioError(f"{where}: missing key {exc}") from exc
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"{where}: {exc}") from exc


def load_scenario(text: str) -> List[ScenarioEvent]:
    """Parse a scenario document: a JSON array of timed events.

    Events come back sorted by t_ms, ties keeping file order.  Any
    malformed entry fails the whole parse, naming its index.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"scenario is not valid JSON: {exc}") from exc
    if not isinstance(doc, list):
        raise ScenarioError("scenario must be a JSON array")
    events = [event_from_dict(entry, f"entry {i}") for i, entry in enumerate(doc)]
    indexed = sorted(enumerate(events), key=lambda pair: (pair[1].t_ms, pair[0]))
    return [e for _, e in indexed]


def load_scenario_file(path) -> List[ScenarioEvent]:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return load_scenario(fh.read())
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario {path}: {exc}") from exc


class SimWorld(HalBackend):
    """Single-owner virtual hardware; the daemon serializes all access."""

    def __init__(
        self,
        house: HouseConfig,
        powered: bool = True,
        events: Tuple[ScenarioEvent, ...] | List[ScenarioEvent] = (),
    ):
        self.house = house
        self.clock_ms = 0
        self.card = card_model.new_card(powered=powered)
        self.regs = PortRegisters()
        self.sensor_active_until: Dict[str, int] = {}
        self.stuck: Dict[str, Level] = {}
        self.applied_count = 0
        # Chronological record of applied events and warnings, consumed
        # by the daemon for its own log.  Never trimmed.
        self.journal: List[dict] = []
        self._pending: List[Tuple[int, int, ScenarioEvent]] = []
        self._inject_seq = 0
        self._line_sensors: Dict[str, List[str]] = {}
        for binding in house.sensors:
            self._line_sensors.setdefault(binding.line, []).append(binding.sensor_id)
        for e in events:
            self.inject(e)

    # -- stimulus plumbing ---------------------------------------------------

    def inject(self, e: ScenarioEvent) -> ScenarioEvent:
        """Queue a stimulus; past-dated events are clamped to the current clock."""
        if e.t_ms < self.clock_ms:
            self.journal.append(
                {
                    "warning": "inject_clamped",
                    "requested_t_ms": e.t_ms,
                    "clock_ms": self.clock_ms,
                    "kind": e.kind.value,
                }
            )
            e = replace(e, t_ms=self.clock_ms)
        self._pending.append((e.t_ms, self._inject_seq, e))
        self._inject_seq += 1
        self._pending.sort(key=lambda item: (item[0], item[1]))
        return e

    @property
    def pending(self) -> List[ScenarioEvent]:
        return [e for _, _, e in self._pending]

    def step(self, dt_ms: int) -> None:
        """Advance the clock, applying every due stimulus in order."""
        if dt_ms <= 0:
            raise ValueError("dt_ms must be positive")
        self.clock_ms += dt_ms
        while self._pending and self._pending[0][0] <= self.clock_ms:
            _, _, event = self._pending.pop(0)
            self._apply(event)

    def _apply(self, e: ScenarioEvent) -> None:
        entry = {"applied": e.kind.value, "t_ms": e.t_ms, "at_ms": self.clock_ms}
        if e.kind is ScenarioKind.IR_DISTURBANCE:
            until = e.t_ms + e.duration_ms
            prev = self.sensor_active_until.get(e.sensor_id, 0)
            self.sensor_active_until[e.sensor_id] = max(prev, until)
            entry.update(sensor_id=e.sensor_id, duration_ms=e.duration_ms)
        elif e.kind is ScenarioKind.POWER_LOSS:
            self.card = card_model.set_power(self.card, False)
            entry["powered"] = False
        elif e.kind is ScenarioKind.POWER_RESTORE:
            self.card = card_model.set_power(self.card, True)
            entry["powered"] = True
        elif e.kind is ScenarioKind.LINE_STUCK:
            self.stuck[e.line] = e.level
            entry.update(line=e.line, level=e.level.name.lower())
        elif e.kind is ScenarioKind.LINE_RELEASE:
            self.stuck.pop(e.line, None)
            entry["line"] = e.line
        self.applied_count += 1
        self.journal.append(entry)

    # -- wire truth ----------------------------------------------------------

    def _sensor_active(self, sensor_id: str) -> bool:
        return self.clock_ms < self.sensor_active_until.get(sensor_id, 0)

    def status_levels(self) -> LineLevels:
        """Physical status-line levels at the current instant."""
        levels: LineLevels = {}
        for name in port.STATUS_LINE_NAMES:
            if name in self.stuck:
                levels[name] = self.stuck[name]
                continue
            sensors = self._line_sensors.get(name, ())
            high = any(self._sensor_active(s) for s in sensors)
            levels[name] = Level.HIGH if high else Level.LOW
        return levels

    def levels(self) -> LineLevels:
        """All 16 line levels: data and control from the registers, status from the world."""
        out = port.data_line_levels(self.regs.data)
        out.update(port.control_line_levels(self.regs.control))
        out.update(self.status_levels())
        for name, lvl in self.stuck.items():
            out[name] = lvl
        return out

    # -- HAL contract ----------------------------------------------------------

    def write_data(self, value: int) -> None:
        self.regs, _ = port.write_data(self.regs, value)
        self.card = card_model.apply_data(self.card, value)

    def read_status(self) -> int:
        return port.encode_status(self.status_levels())

    def write_control(self, value: int) -> None:
        if value & ~port.CONTROL_MASK:
            self.journal.append(
                {"warning": "control_bits_masked", "value": value}
            )
        self.regs, _ = port.write_control(self.regs, value)

    # -- inspection ------------------------------------------------------------

    def snapshot(self) -> dict:
        """Full observable state, for determinism comparisons in tests."""
        return {
            "clock_ms": self.clock_ms,
            "card": self.card,
            "regs": self.regs,
            "sensor_active_until": dict(self.sensor_active_until),
            "stuck": dict(self.stuck),
            "pending": tuple(self._pending),
            "applied_count": self.applied_count,
        }
