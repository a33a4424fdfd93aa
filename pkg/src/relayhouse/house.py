"""
relayhouse.house - Zones, sensor wiring and the lights<->byte codec.

The controlled floor is six rooms plus one lobby, each wired to one
relay channel; the spare eighth channel drives the alarm siren.  The
infrared sensor sits on the building shell (external layer) and feeds
one of the five status lines back to the computer.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Tuple

from . import port


class ConfigError(ValueError):
    """Malformed or inconsistent house configuration."""


class Layer(Enum):
    EXTERNAL = "external"
    INTERNAL = "internal"
    DEEP_INTERNAL = "deep_internal"


class ZoneKind(Enum):
    ROOM = "room"
    LOBBY = "lobby"


class SensorTechnology(Enum):
    INFRARED = "infrared"


@dataclass(frozen=True)
class Zone:
    """A controllable area wired to one relay channel."""
    id: str
    name: str
    kind: ZoneKind
    channel: int
    layer: Layer = Layer.INTERNAL


@dataclass(frozen=True)
class SensorBinding:
    """An intrusion sensor feeding one parallel-port status line."""
    sensor_id: str
    line: str
    technology: SensorTechnology = SensorTechnology.INFRARED
    layer: Layer = Layer.EXTERNAL


@dataclass(frozen=True)
class HouseConfig:
    zones: Tuple[Zone, ...]
    sensors: Tuple[SensorBinding, ...]
    siren_channel: Optional[int] = None
    poll_interval_ms: int = 50
    debounce_samples: int = 2

    def zone(self, zone_id: str) -> Zone:
        for z in self.zones:
            if z.id == zone_id:
                return z
        raise ConfigError(f"unknown zone id {zone_id!r}")


def default_house() -> HouseConfig:
    """Six rooms on channels 0-5, the lobby on 6, siren on 7, IR on ACK."""
    rooms = tuple(
        Zone(f"room{i + 1}", f"Room {i + 1}", ZoneKind.ROOM, channel=i)
        for i in range(6)
    )
    lobby = (Zone("lobby", "Lobby", ZoneKind.LOBBY, channel=6),)
    sensors = (SensorBinding("ir1", line="ACK"),)
    return HouseConfig(zones=rooms + lobby, sensors=sensors, siren_channel=7)


def validate_config(cfg: HouseConfig) -> List[str]:
    """Return every violation found; an empty list means the config is good."""
    violations: List[str] = []

    seen_channels: Dict[int, str] = {}
    seen_ids = set()
    for z in cfg.zones:
        if z.id in seen_ids:
            violations.append(f"duplicate zone id {z.id!r}")
        seen_ids.add(z.id)
        if not 0 <= z.channel <= 7:
            violations.append(f"zone {z.id!r} channel {z.channel} outside 0..7")
        elif z.channel in seen_channels:
            violations.append(f"duplicate channel {z.channel}")
        else:
            seen_channels[z.channel] = z.id
        if z.layer is not Layer.INTERNAL:
            violations.append(f"zone {z.id!r} must sit on the internal layer")

    if cfg.siren_channel is not None:
        if not 0 <= cfg.siren_channel <= 7:
            violations.append(f"siren channel {cfg.siren_channel} outside 0..7")
        elif cfg.siren_channel in seen_channels:
            violations.append(f"duplicate channel {cfg.siren_channel}")

    lobbies = sum(1 for z in cfg.zones if z.kind is ZoneKind.LOBBY)
    if lobbies != 1:
        violations.append(f"expected exactly one lobby zone, found {lobbies}")

    if not cfg.sensors:
        violations.append("at least one sensor is required")
    for s in cfg.sensors:
        if s.line not in port.STATUS_LINE_NAMES:
            violations.append(f"sensor {s.sensor_id!r} requires a status line, got {s.line!r}")
        if s.layer is not Layer.EXTERNAL:
            violations.append(f"sensor {s.sensor_id!r} must sit on the external layer")

    if cfg.poll_interval_ms <= 0:
        violations.append("poll_interval_ms must be positive")
    if cfg.debounce_samples <= 0:
        violations.append("debounce_samples must be positive")

    return violations


def compose_data_byte(
    cfg: HouseConfig, lights: Mapping[str, bool], siren: bool = False
) -> int:
    """Pack per-zone light states plus the siren into the output byte.

    The mapping must cover exactly the configured zones.
    """
    zone_ids = {z.id for z in cfg.zones}
    extra = set(lights) - zone_ids
    missing = zone_ids - set(lights)
    if extra or missing:
        raise ConfigError(
            "lights map does not match zones"
            + (f"; unknown: {sorted(extra)}" if extra else "")
            + (f"; missing: {sorted(missing)}" if missing else "")
        )
    value = 0
    for z in cfg.zones:
        if lights[z.id]:
            value |= 1 << z.channel
    if siren and cfg.siren_channel is not None:
        value |= 1 << cfg.siren_channel
    return value


def decompose_data_byte(cfg: HouseConfig, value: int) -> Tuple[Dict[str, bool], bool]:
    """Inverse of compose_data_byte; bits outside configured channels are ignored."""
    if not 0 <= value <= 0xFF:
        raise ConfigError(f"data byte out of range: {value!r}")
    lights = {z.id: bool((value >> z.channel) & 1) for z in cfg.zones}
    siren = (
        bool((value >> cfg.siren_channel) & 1)
        if cfg.siren_channel is not None
        else False
    )
    return lights, siren


# --- JSON codec ------------------------------------------------------------
#
# The on-disk document mirrors HouseConfig field for field; unknown keys
# are rejected so typos cannot silently change behavior.

def _take(obj: dict, allowed: set, what: str) -> None:
    unknown = set(obj) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in {what}: {sorted(unknown)}")


def _zone_from_dict(obj: dict, idx: int) -> Zone:
    _take(obj, {"id", "name", "kind", "channel", "layer"}, f"zones[{idx}]")
    try:
        return Zone(
            id=str(obj["id"]),
            name=str(obj["name"]),
            kind=ZoneKind(obj["kind"]),
            channel=int(obj["channel"]),
            layer=Layer(obj.get("layer", "internal")),
        )
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"zones[{idx}]: {exc}") from exc


def _sensor_from_dict(obj: dict, idx: int) -> SensorBinding:
    _take(obj, {"sensor_id", "line", "technology", "layer"}, f"sensors[{idx}]")
    try:
        return SensorBinding(
            sensor_id=str(obj["sensor_id"]),
            line=str(obj["line"]),
            technology=SensorTechnology(obj.get("technology", "infrared")),
            layer=Layer(obj.get("layer", "external")),
        )
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"sensors[{idx}]: {exc}") from exc


def house_from_dict(obj: dict) -> HouseConfig:
    if not isinstance(obj, dict):
        raise ConfigError("house config must be a JSON object")
    _take(
        obj,
        {"zones", "sensors", "siren_channel", "poll_interval_ms", "debounce_samples"},
        "house config",
    )
    try:
        zones = tuple(_zone_from_dict(z, i) for i, z in enumerate(obj["zones"]))
        sensors = tuple(_sensor_from_dict(s, i) for i, s in enumerate(obj["sensors"]))
    except KeyError as exc:
        raise ConfigError(f"house config missing key: {exc}") from exc
    siren = obj.get("siren_channel")
    return HouseConfig(
        zones=zones,
        sensors=sensors,
        siren_channel=int(siren) if siren is not None else None,
        poll_interval_ms=int(obj.get("poll_interval_ms", 50)),
        debounce_samples=int(obj.get("debounce_samples", 2)),
    )


def house_to_dict(cfg: HouseConfig) -> dict:
    return {
        "zones": [
            {
                "id": z.id,
                "name": z.name,
                "kind": z.kind.value,
                "channel": z.channel,
                "layer": z.layer.value,
            }
            for z in cfg.zones
        ],
        "sensors": [
            {
                "sensor_id": s.sensor_id,
                "line": s.line,
                "technology": s.technology.value,
                "layer": s.layer.value,
            }
            for s in cfg.sensors
        ],
        "siren_channel": cfg.siren_channel,
        "poll_interval_ms": cfg.poll_interval_ms,
        "debounce_samples": cfg.debounce_samples,
    }


def load_house(path: str | Path) -> HouseConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read house config {path}: {exc}") from exc
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"house config {path} is not valid JSON: {exc}") from exc
    return house_from_dict(obj)
