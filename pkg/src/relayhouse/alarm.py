"""
relayhouse.alarm - Latching intrusion alarm with debounced sensor input.

The machine has three modes.  Armed plus a confirmed disturbance latches
into Triggered, floods the lights and starts the siren; only an explicit
Reset releases the latch, and it lands in Disarmed so the owner re-arms
consciously.  Everything here is a pure function over value types.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum
from typing import Optional, Tuple, Union


class AlarmMode(Enum):
    DISARMED = "disarmed"
    ARMED = "armed"
    TRIGGERED = "triggered"


class AlarmCommand(Enum):
    ARM = "arm"
    DISARM = "disarm"
    RESET = "reset"
    NONE = "none"


@dataclass(frozen=True)
class AlarmState:
    mode: AlarmMode = AlarmMode.DISARMED
    episode: int = 0   # counts armed->triggered transitions


@dataclass(frozen=True)
class Debouncer:
    """Requires `threshold` consecutive asserted samples before reporting true."""
    threshold: int = 2
    run_length: int = 0

    def __post_init__(self):
        if self.threshold < 1:
            raise ValueError("debounce threshold must be at least 1")


def debounce(d: Debouncer, raw: bool) -> Tuple[Debouncer, bool]:
    """Feed one raw sample; returns the advanced debouncer and the stable output."""
    run = d.run_length + 1 if raw else 0
    nxt = replace(d, run_length=run)
    return nxt, run >= d.threshold


# Side effects requested by a step, executed by the daemon.

@dataclass(frozen=True)
class RaiseAlert:
    sensor_id: Optional[str]
    episode: int


@dataclass(frozen=True)
class AllLightsOn:
    pass


@dataclass(frozen=True)
class SirenOn:
    pass


@dataclass(frozen=True)
class SirenOff:
    pass


@dataclass(frozen=True)
class LogOnly:
    reason: str


AlarmAction = Union[RaiseAlert, AllLightsOn, SirenOn, SirenOff, LogOnly]

REASON_REDUNDANT = "redundant"
REASON_DISARMED_DISTURBANCE = "disturbance_while_disarmed"

# Command transitions; anything absent is a redundant no-op.
_COMMAND_TABLE = {
    (AlarmMode.DISARMED, AlarmCommand.ARM): AlarmMode.ARMED,
    (AlarmMode.ARMED, AlarmCommand.DISARM): AlarmMode.DISARMED,
    (AlarmMode.TRIGGERED, AlarmCommand.RESET): AlarmMode.DISARMED,
}


def step(
    s: AlarmState,
    disturbance: bool,
    cmd: AlarmCommand = AlarmCommand.NONE,
    sensor_id: Optional[str] = None,
) -> Tuple[AlarmState, Tuple[AlarmAction, ...]]:
    """Advance the machine one poll step.

    The command is applied first; the disturbance is then evaluated
    against the post-command mode.  Returns the new state and the
    actions the controller must carry out, in order.
    """
    actions: list[AlarmAction] = []
    mode = s.mode
    episode = s.episode

    if cmd is not AlarmCommand.NONE:
        target = _COMMAND_TABLE.get((mode, cmd))
        if target is None:
            actions.append(LogOnly(REASON_REDUNDANT))
        else:
            if mode is AlarmMode.TRIGGERED and cmd is AlarmCommand.RESET:
                actions.append(SirenOff())
            mode = target

    if disturbance:
        if mode is AlarmMode.ARMED:
            mode = AlarmMode.TRIGGERED
            episode += 1
            actions.extend(
                (RaiseAlert(sensor_id, episode), AllLightsOn(), SirenOn())
            )
        elif mode is AlarmMode.DISARMED:
            actions.append(LogOnly(REASON_DISARMED_DISTURBANCE))
        # Triggered stays triggered with no new actions

    return AlarmState(mode=mode, episode=episode), tuple(actions)
