"""
relayhouse.port - Standard parallel port (SPP) line and register model.

The port drives eight data outputs, reads five status inputs and drives
three control outputs through the classic DB-25 pin layout.  Three bits
are hardware-inverted: the register value is the logical NOT of the wire
level (BUSY on the status side, AUTOFD and SLCTIN on the control side).

Everything in this module is pure bit arithmetic; actual wires belong to
a HalBackend implementation (see relayhouse.sim for the virtual one).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from enum import Enum
from typing import Dict

log = logging.getLogger(__name__)
log.addHandler(logging.NullHandler())


class Level(Enum):
    """Physical wire level."""
    LOW = 0
    HIGH = 1


class LineGroup(Enum):
    DATA = "data"
    STATUS = "status"
    CONTROL = "control"


@dataclass(frozen=True)
class Line:
    """One connector line: name, group, DB-25 pin and inversion flag."""
    name: str
    group: LineGroup
    pin: int
    inverted: bool = False


# The 16 modeled lines.  STROBE (pin 1, control bit 0) is deliberately
# left out and its register bit is reserved-always-0.
LINES = (
    Line("D0", LineGroup.DATA, 2),
    Line("D1", LineGroup.DATA, 3),
    Line("D2", LineGroup.DATA, 4),
    Line("D3", LineGroup.DATA, 5),
    Line("D4", LineGroup.DATA, 6),
    Line("D5", LineGroup.DATA, 7),
    Line("D6", LineGroup.DATA, 8),
    Line("D7", LineGroup.DATA, 9),
    Line("ERROR", LineGroup.STATUS, 15),
    Line("SLCT", LineGroup.STATUS, 13),
    Line("PE", LineGroup.STATUS, 12),
    Line("ACK", LineGroup.STATUS, 10),
    Line("BUSY", LineGroup.STATUS, 11, inverted=True),
    Line("AUTOFD", LineGroup.CONTROL, 14, inverted=True),
    Line("INIT", LineGroup.CONTROL, 16),
    Line("SLCTIN", LineGroup.CONTROL, 17, inverted=True),
)

LINES_BY_NAME: Dict[str, Line] = {line.name: line for line in LINES}

DATA_LINE_NAMES = tuple(l.name for l in LINES if l.group is LineGroup.DATA)
STATUS_LINE_NAMES = tuple(l.name for l in LINES if l.group is LineGroup.STATUS)
CONTROL_LINE_NAMES = tuple(l.name for l in LINES if l.group is LineGroup.CONTROL)

# Register bit positions.  Status bits 0-2 and control bits 0 and 4-7
# always read 0.
STATUS_BITS = {"ERROR": 3, "SLCT": 4, "PE": 5, "ACK": 6, "BUSY": 7}
CONTROL_BITS = {"AUTOFD": 1, "INIT": 2, "SLCTIN": 3}

STATUS_RESERVED_MASK = 0x07
CONTROL_MASK = 0x0E

# Mapping from line name to physical level.
LineLevels = Dict[str, Level]


class MalformedStatusError(ValueError):
    """A status byte had reserved (always-zero) bits set."""


class PortError(ValueError):
    """A register value outside the 0..255 byte range."""


@dataclass(frozen=True)
class PortRegisters:
    """Software view of the port: last written data byte and control bits.

    The status register is not stored here because it is derived
    read-only state; encode it from line levels with encode_status().
    """
    data: int = 0x00
    control: int = 0x00


def pin_of_line(name: str) -> int:
    """Return the DB-25 connector hole number for a line name."""
    return LINES_BY_NAME[name].pin


def _check_byte(value: int) -> int:
    if not isinstance(value, int) or not 0 <= value <= 0xFF:
        raise PortError("byte value out of range: %r" % (value,))
    return value


def data_line_levels(value: int) -> LineLevels:
    """Levels of D0..D7 for a data byte (outputs are never inverted)."""
    _check_byte(value)
    return {
        name: Level.HIGH if (value >> i) & 1 else Level.LOW
        for i, name in enumerate(DATA_LINE_NAMES)
    }


def write_data(regs: PortRegisters, value: int) -> tuple[PortRegisters, LineLevels]:
    """Latch a data byte; return new registers and the driven data-line levels."""
    _check_byte(value)
    return replace(regs, data=value), data_line_levels(value)


def read_data(regs: PortRegisters) -> int:
    """The data register reads back exactly the last written byte."""
    return regs.data


def encode_status(levels: LineLevels) -> int:
    """Build the status register byte from physical status-line levels.

    Bit is set when the wire is HIGH, except BUSY whose bit reads the
    NOT of the wire.  Lines missing from the mapping count as LOW, so
    an all-quiet port reads 0x80.
    """
    value = 0
    for name, bit in STATUS_BITS.items():
        physical_high = levels.get(name, Level.LOW) is Level.HIGH
        if physical_high != LINES_BY_NAME[name].inverted:
            value |= 1 << bit
    return value


def decode_status(value: int) -> LineLevels:
    """Recover physical status-line levels from a status register byte.

    Raises MalformedStatusError when any of the reserved bits 0-2 is set.
    """
    _check_byte(value)
    if value & STATUS_RESERVED_MASK:
        raise MalformedStatusError(
            "status byte 0x%02X has reserved low bits set" % value
        )
    levels: LineLevels = {}
    for name, bit in STATUS_BITS.items():
        bit_set = bool((value >> bit) & 1)
        physical_high = bit_set != LINES_BY_NAME[name].inverted
        levels[name] = Level.HIGH if physical_high else Level.LOW
    return levels


def control_line_levels(value: int) -> LineLevels:
    """Levels of AUTOFD/INIT/SLCTIN for a control register value."""
    levels: LineLevels = {}
    for name, bit in CONTROL_BITS.items():
        bit_set = bool((value >> bit) & 1)
        physical_high = bit_set != LINES_BY_NAME[name].inverted
        levels[name] = Level.HIGH if physical_high else Level.LOW
    return levels


def write_control(regs: PortRegisters, value: int) -> tuple[PortRegisters, LineLevels]:
    """Latch control bits 1-3; extra bits are masked off with a warning."""
    _check_byte(value)
    masked = value & CONTROL_MASK
    if masked != value:
        log.warning("control write 0x%02X: bits outside 0x0E masked", value)
    return replace(regs, control=masked), control_line_levels(masked)


def all_lines_low() -> LineLevels:
    """A fresh level map with every modeled line LOW."""
    return {line.name: Level.LOW for line in LINES}


class HalBackend:
    """Hardware boundary contract: the only channel to the port wires.

    Implementations must keep read_status() free of side effects and
    make the write operations idempotent for equal arguments.
    """

    def write_data(self, value: int) -> None:
        raise NotImplementedError

    def read_status(self) -> int:
        raise NotImplementedError

    def write_control(self, value: int) -> None:
        raise NotImplementedError


class RealParallelPort(HalBackend):
    """Placeholder for a physical-port backend.

    Driving a real LPT port needs an OS-level driver (ppdev, inpout32);
    none is wired up here, so every operation raises.
    """

    def __init__(self, device: str = "/dev/parport0"):
        self.device = device

    def _unavailable(self):
        raise NotImplementedError(
            "physical parallel port backend is not implemented; use the simulator"
        )

    def write_data(self, value: int) -> None:
        self._unavailable()

    def read_status(self) -> int:
        self._unavailable()

    def write_control(self, value: int) -> None:
        self._unavailable()
