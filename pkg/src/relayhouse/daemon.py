"""
relayhouse.daemon - The polling control loop that runs the house.

Each tick: read the status byte, debounce the sensors, advance the alarm
machine (consuming at most one queued operator command), translate its
actions, and write the composed data byte when it changed.  One thread
owns all mutable state; other threads talk to it only through submit(),
which carries a command and a reply queue.

A failed tick is skipped wholesale: the hardware fault is logged and no
state advances, so a transient glitch cannot half-apply a transition.
Three consecutive faults abort the daemon.
"""

from __future__ import annotations

import logging
import queue
import time
from collections import deque
from dataclasses import dataclass
from typing import Deque, Dict, List, Optional, Tuple, Union

from . import alarm as alarm_model
from . import port
from .alarm import (
    REASON_DISARMED_DISTURBANCE,
    AlarmCommand,
    AlarmMode,
    AlarmState,
    AllLightsOn,
    Debouncer,
    LogOnly,
    RaiseAlert,
    SirenOff,
    SirenOn,
)
from .events import EventLog, RecordKind
from .house import HouseConfig, compose_data_byte
from .port import HalBackend, Level
from .sim import ScenarioEvent, SimWorld

log = logging.getLogger(__name__)
log.addHandler(logging.NullHandler())

ALL_ON_BYTE = 0xFF
MAX_CONSECUTIVE_HAL_FAILURES = 3


class DaemonError(RuntimeError):
    """Unrecoverable daemon failure; the process should exit nonzero."""


# -- operator commands --------------------------------------------------------

@dataclass(frozen=True)
class SetLight:
    zone_id: str
    on: bool


@dataclass(frozen=True)
class Arm:
    pass


@dataclass(frozen=True)
class Disarm:
    pass


@dataclass(frozen=True)
class Reset:
    pass


@dataclass(frozen=True)
class GetState:
    pass


@dataclass(frozen=True)
class Inject:
    event: ScenarioEvent


Command = Union[SetLight, Arm, Disarm, Reset, GetState, Inject]


@dataclass(frozen=True)
class CommandResult:
    """HTTP-ish outcome of a command: status code plus JSON body."""
    status: int
    body: dict


# Alarm commands gate on the current mode; anything else is a no-op.
_ALARM_COMMANDS = {
    Arm: ("arm", AlarmCommand.ARM, AlarmMode.DISARMED),
    Disarm: ("disarm", AlarmCommand.DISARM, AlarmMode.ARMED),
    Reset: ("reset", AlarmCommand.RESET, AlarmMode.TRIGGERED),
}


class ControlLoop:
    """Owns the daemon state and the HAL; see module docstring for the tick."""

    def __init__(
        self,
        house: HouseConfig,
        backend: HalBackend,
        event_log: Optional[EventLog] = None,
        arm_on_start: bool = True,
    ):
        self.house = house
        self.hal = backend
        self.world: Optional[SimWorld] = backend if isinstance(backend, SimWorld) else None
        self.log = event_log if event_log is not None else EventLog(None)

        self.alarm = AlarmState(AlarmMode.ARMED if arm_on_start else AlarmMode.DISARMED)
        self.debouncers: Dict[str, Debouncer] = {
            s.sensor_id: Debouncer(threshold=house.debounce_samples)
            for s in house.sensors
        }
        self.desired_lights: Dict[str, bool] = {z.id: False for z in house.zones}
        self.siren = False
        self.forced_all_on = False
        self.last_written_byte = 0x00   # the card powers up with a cleared latch
        self.last_status_byte: Optional[int] = None
        self.tick_count = 0
        self.card_powered = self.world.card.powered if self.world else True

        self._last_raw: Dict[str, bool] = {s.sensor_id: False for s in house.sensors}
        self._last_disturbance = False
        self._alarm_cmds: Deque[AlarmCommand] = deque()
        self._requests: "queue.Queue[Tuple[Command, queue.SimpleQueue]]" = queue.Queue()
        self._hal_failures = 0
        self._journal_seen = 0
        self._start_monotonic = time.monotonic()

    # -- time base -------------------------------------------------------------

    def now_ms(self) -> int:
        if self.world is not None:
            return self.world.clock_ms
        return int((time.monotonic() - self._start_monotonic) * 1000)

    # -- command entry point (any thread) ---------------------------------------

    def submit(self, command: Command, timeout: float = 5.0) -> CommandResult:
        """Hand a command to the loop thread and wait for its reply."""
        reply: queue.SimpleQueue = queue.SimpleQueue()
        self._requests.put((command, reply))
        try:
            return reply.get(timeout=timeout)
        except queue.Empty:
            raise DaemonError("control loop is not responding") from None

    # -- loop drivers ------------------------------------------------------------

    def run_until(self, until_ms: int) -> None:
        """Drive the simulated clock to until_ms as fast as possible."""
        if self.world is None:
            raise DaemonError("run_until needs the simulator backend")
        try:
            while self.world.clock_ms < until_ms:
                self._drain_requests()
                self.tick_once()
            self._drain_requests()
        except OSError as exc:
            self._storage_failure(exc)

    def run_forever(self, stop) -> None:
        """Tick at the configured poll interval until `stop` is set."""
        poll_s = self.house.poll_interval_ms / 1000.0
        deadline = time.monotonic() + poll_s
        try:
            while not stop.is_set():
                remaining = deadline - time.monotonic()
                if remaining > 0:
                    try:
                        request = self._requests.get(timeout=remaining)
                    except queue.Empty:
                        pass
                    else:
                        self._answer(request)
                        continue
                self.tick_once()
                deadline += poll_s
            self._drain_requests()
        except OSError as exc:
            self._storage_failure(exc)

    def tick_once(self) -> None:
        """Advance the world one poll interval and run one control tick."""
        if self.world is not None:
            self.world.step(self.house.poll_interval_ms)
            self._consume_journal()
        self._tick()

    def _storage_failure(self, exc: OSError) -> None:
        try:
            self.log.emit(
                self.now_ms(),
                RecordKind.WARNING,
                {"reason": "storage_failure", "error": str(exc)},
            )
        except Exception:
            pass
        raise DaemonError(f"event log storage failure: {exc}") from exc

    # -- request handling (loop thread only) --------------------------------------

    def _drain_requests(self) -> None:
        while True:
            try:
                request = self._requests.get_nowait()
            except queue.Empty:
                return
            self._answer(request)

    def _answer(self, request: Tuple[Command, queue.SimpleQueue]) -> None:
        command, reply = request
        try:
            result = self.handle_command(command)
        except OSError:
            reply.put(CommandResult(500, {"error": "event log storage failure"}))
            raise
        except Exception as exc:
            log.exception("command failed: %r", command)
            result = CommandResult(500, {"error": str(exc)})
        reply.put(result)

    def handle_command(self, command: Command) -> CommandResult:
        """Apply one operator command.  Loop-thread only; others use submit()."""
        now = self.now_ms()

        if isinstance(command, GetState):
            return CommandResult(200, self.state_snapshot())

        if isinstance(command, SetLight):
            if command.zone_id not in self.desired_lights:
                return CommandResult(
                    404, {"error": f"zone {command.zone_id!r} not found"}
                )
            self.desired_lights[command.zone_id] = command.on
            self.log.emit(
                now,
                RecordKind.COMMAND,
                {
                    "command": "set_light",
                    "zone_id": command.zone_id,
                    "on": command.on,
                    "result": "ok",
                },
            )
            return CommandResult(
                200, {"status": "ok", "zone_id": command.zone_id, "on": command.on}
            )

        if type(command) in _ALARM_COMMANDS:
            name, alarm_cmd, required_mode = _ALARM_COMMANDS[type(command)]
            if self.alarm.mode is required_mode:
                self._alarm_cmds.append(alarm_cmd)
                self.log.emit(
                    now, RecordKind.COMMAND, {"command": name, "result": "queued"}
                )
                return CommandResult(200, {"status": "queued", "command": name})
            self.log.emit(
                now, RecordKind.COMMAND, {"command": name, "result": "no-op"}
            )
            self.log.emit(
                now,
                RecordKind.WARNING,
                {"reason": "redundant_command", "command": name},
            )
            return CommandResult(200, {"status": "no-op", "command": name})

        if isinstance(command, Inject):
            if self.world is None:
                return CommandResult(
                    409, {"error": "inject requires the simulator backend"}
                )
            normalized = self.world.inject(command.event)
            self.log.emit(
                now,
                RecordKind.COMMAND,
                {"command": "inject", "event": normalized.to_dict(), "result": "ok"},
            )
            return CommandResult(202, {"status": "ok", "event": normalized.to_dict()})

        return CommandResult(400, {"error": f"unknown command {command!r}"})

    # -- the tick -------------------------------------------------------------------

    def _consume_journal(self) -> None:
        """Turn freshly applied simulator stimuli into log records."""
        assert self.world is not None
        entries = self.world.journal[self._journal_seen:]
        self._journal_seen = len(self.world.journal)
        now = self.now_ms()
        for entry in entries:
            if entry.get("applied") in ("power_loss", "power_restore"):
                self.card_powered = entry["powered"]
                self.log.emit(
                    now,
                    RecordKind.POWER_CHANGE,
                    {"powered": entry["powered"], "t_ms": entry["t_ms"]},
                )
            elif entry.get("applied") == "line_stuck":
                self.log.emit(
                    now,
                    RecordKind.WARNING,
                    {"reason": "line_stuck", "line": entry["line"], "level": entry["level"]},
                )
            elif entry.get("applied") == "line_release":
                self.log.emit(
                    now,
                    RecordKind.WARNING,
                    {"reason": "line_released", "line": entry["line"]},
                )
            elif "warning" in entry:
                payload = {"reason": entry["warning"]}
                payload.update(
                    {k: v for k, v in entry.items() if k != "warning"}
                )
                self.log.emit(now, RecordKind.WARNING, payload)
            # ir_disturbance applications surface through sensor edges

    def _tick(self) -> None:
        """One poll cycle.  State commits only if every HAL call succeeded."""
        now = self.now_ms()
        staged: List[Tuple[RecordKind, dict]] = []

        try:
            status = self.hal.read_status()
            levels = port.decode_status(status)
        except Exception as exc:
            self._hal_failure(now, exc)
            return

        new_raw: Dict[str, bool] = {}
        new_debouncers: Dict[str, Debouncer] = {}
        stable_sensors: List[str] = []
        for binding in self.house.sensors:
            raw = levels.get(binding.line, Level.LOW) is Level.HIGH
            advanced, stable = alarm_model.debounce(
                self.debouncers[binding.sensor_id], raw
            )
            new_raw[binding.sensor_id] = raw
            new_debouncers[binding.sensor_id] = advanced
            if stable:
                stable_sensors.append(binding.sensor_id)
            if raw != self._last_raw[binding.sensor_id]:
                staged.append(
                    (
                        RecordKind.SENSOR_RAW,
                        {
                            "sensor_id": binding.sensor_id,
                            "raw": raw,
                            "run_length": advanced.run_length,
                            "stable": stable,
                        },
                    )
                )

        disturbance = bool(stable_sensors)
        cmd = self._alarm_cmds.popleft() if self._alarm_cmds else AlarmCommand.NONE
        new_alarm, actions = alarm_model.step(
            self.alarm,
            disturbance,
            cmd,
            sensor_id=stable_sensors[0] if stable_sensors else None,
        )

        if new_alarm.mode is not self.alarm.mode:
            staged.append(
                (
                    RecordKind.ALARM_TRANSITION,
                    {
                        "from": self.alarm.mode.value,
                        "to": new_alarm.mode.value,
                        "episode": new_alarm.episode,
                    },
                )
            )

        new_siren = self.siren
        for action in actions:
            if isinstance(action, RaiseAlert):
                staged.append(
                    (
                        RecordKind.ALERT,
                        {"sensor_id": action.sensor_id, "episode": action.episode},
                    )
                )
            elif isinstance(action, SirenOn):
                new_siren = True
            elif isinstance(action, SirenOff):
                new_siren = False
            elif isinstance(action, AllLightsOn):
                pass  # realized by the forced byte below
            elif isinstance(action, LogOnly):
                if action.reason == REASON_DISARMED_DISTURBANCE and self._last_disturbance:
                    continue  # log one record per stimulus, not one per tick
                staged.append((RecordKind.WARNING, {"reason": action.reason}))

        forced = new_alarm.mode is AlarmMode.TRIGGERED
        composed = (
            ALL_ON_BYTE
            if forced
            else compose_data_byte(self.house, self.desired_lights, new_siren)
        )
        wrote: Optional[int] = None
        if composed != self.last_written_byte:
            try:
                self.hal.write_data(composed)
            except Exception as exc:
                self._hal_failure(now, exc)
                return
            staged.append((RecordKind.DATA_WRITE, {"byte": composed}))
            wrote = composed

        # commit
        self._hal_failures = 0
        self.debouncers = new_debouncers
        self._last_raw = new_raw
        self._last_disturbance = disturbance
        self.alarm = new_alarm
        self.siren = new_siren
        self.forced_all_on = forced
        self.last_status_byte = status
        if wrote is not None:
            self.last_written_byte = wrote
        self.tick_count += 1
        for kind, payload in staged:
            self.log.emit(now, kind, payload)

    def _hal_failure(self, now: int, exc: Exception) -> None:
        self.tick_count += 1
        self._hal_failures += 1
        self.log.emit(
            now,
            RecordKind.WARNING,
            {
                "reason": "hal_failure",
                "error": str(exc),
                "consecutive": self._hal_failures,
            },
        )
        log.warning("tick skipped after hardware fault: %s", exc)
        if self._hal_failures >= MAX_CONSECUTIVE_HAL_FAILURES:
            raise DaemonError(
                f"{self._hal_failures} consecutive hardware faults, giving up"
            )

    # -- snapshots ----------------------------------------------------------------

    def state_snapshot(self) -> dict:
        zones = []
        for z in self.house.zones:
            lit = bool((self.last_written_byte >> z.channel) & 1)
            zones.append(
                {
                    "id": z.id,
                    "name": z.name,
                    "kind": z.kind.value,
                    "channel": z.channel,
                    "light": self.desired_lights[z.id],
                    "led": self.card_powered and lit,
                }
            )
        return {
            "backend": "sim" if self.world is not None else "hw",
            "tick": self.tick_count,
            "clock_ms": self.now_ms(),
            "alarm": {"mode": self.alarm.mode.value, "episode": self.alarm.episode},
            "siren": self.siren,
            "forced_all_on": self.forced_all_on,
            "card_powered": self.card_powered,
            "last_written_byte": self.last_written_byte,
            "last_status_byte": self.last_status_byte,
            "zones": zones,
        }
