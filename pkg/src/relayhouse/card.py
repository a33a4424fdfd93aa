"""
relayhouse.card - Behavioral model of the eight-channel relay driver card.

Each of the eight sub-circuits holds a relay between two terminals: the
transistor's forward bias rests the relay at T1; a pulse on the matching
data line reverse-biases it, the relay swings to T2 and the channel LED
lights.  Loss of the 12 V rail de-energizes every relay back to T1 while
the latched byte is remembered for re-application on power-up.

State transitions are value-semantics: every operation returns a new
CardState and never mutates its argument.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional, Tuple


class Bias(Enum):
    FORWARD = "forward"
    REVERSE = "reverse"


class Terminal(Enum):
    T1 = "t1"
    T2 = "t2"


class FaultKind(Enum):
    OVER_CURRENT = "over_current"
    OVER_VOLTAGE = "over_voltage"


@dataclass(frozen=True)
class ComponentRatings:
    """Nameplate limits of the card's parts, used for load validation."""
    relay_coil_volts: float = 12.0
    contact_max_volts: float = 220.0       # AC across the switched contact
    contact_max_amps: float = 5.0
    transistor_model: str = "C945"
    transistor_min_volts: float = 1.0
    transistor_max_volts: float = 1.5
    transistor_max_amps: float = 0.3
    resistor_ohms: Tuple[int, ...] = (1000, 4700)
    capacitor_farads: float = 2200e-6
    capacitor_max_volts: float = 25.0
    transformer_volts_ac: float = 12.0
    transformer_amps: float = 1.0
    mains_volts_ac: float = 220.0

    def __post_init__(self):
        numeric = (
            self.relay_coil_volts, self.contact_max_volts, self.contact_max_amps,
            self.transistor_min_volts, self.transistor_max_volts,
            self.transistor_max_amps, self.capacitor_farads,
            self.capacitor_max_volts, self.transformer_volts_ac,
            self.transformer_amps, self.mains_volts_ac,
        )
        if any(v <= 0 for v in numeric):
            raise ValueError("component ratings must be strictly positive")
        if set(self.resistor_ohms) != {1000, 4700}:
            raise ValueError("resistor set must be exactly 1k and 4.7k")


DEFAULT_RATINGS = ComponentRatings()

NUM_CHANNELS = 8


@dataclass(frozen=True)
class RelayChannel:
    """One sub-circuit: bias state, selected terminal and indicator LED."""
    index: int
    bias: Bias = Bias.FORWARD
    terminal: Terminal = Terminal.T1
    led: bool = False


@dataclass(frozen=True)
class LoadFault:
    kind: FaultKind
    channel: int
    observed: float
    unit: str


@dataclass(frozen=True)
class CardState:
    powered: bool = False
    dc_rail_volts: float = 0.0
    latched_data: int = 0x00
    channels: Tuple[RelayChannel, ...] = field(
        default_factory=lambda: _derive_channels(False, 0x00)
    )


def rectify(ac_rms_volts: float) -> float:
    """Idealized bridge + smoothing capacitor: 12 V AC in, 12 V DC out.

    Ripple and diode drops are not modeled, so the DC rail equals the
    RMS input.
    """
    if ac_rms_volts < 0:
        raise ValueError("AC input voltage cannot be negative")
    return float(ac_rms_volts)


def _channel_for_bit(index: int, energized: bool) -> RelayChannel:
    if energized:
        return RelayChannel(index, Bias.REVERSE, Terminal.T2, led=True)
    return RelayChannel(index, Bias.FORWARD, Terminal.T1, led=False)


def _derive_channels(powered: bool, latched_data: int) -> Tuple[RelayChannel, ...]:
    return tuple(
        _channel_for_bit(i, powered and bool((latched_data >> i) & 1))
        for i in range(NUM_CHANNELS)
    )


def _check_byte(value: int) -> int:
    if not isinstance(value, int) or not 0 <= value <= 0xFF:
        raise ValueError("data byte out of range: %r" % (value,))
    return value


def new_card(powered: bool = False, latched_data: int = 0x00) -> CardState:
    _check_byte(latched_data)
    return CardState(
        powered=powered,
        dc_rail_volts=rectify(DEFAULT_RATINGS.transformer_volts_ac) if powered else 0.0,
        latched_data=latched_data,
        channels=_derive_channels(powered, latched_data),
    )


def apply_data(card: CardState, value: int) -> CardState:
    """Latch a data byte; on a powered card each set bit swings its relay to T2."""
    _check_byte(value)
    return replace(
        card,
        latched_data=value,
        channels=_derive_channels(card.powered, value),
    )


def set_power(card: CardState, on: bool) -> CardState:
    """Switch the 12 V rail; channels re-derive from the latched byte."""
    return replace(
        card,
        powered=on,
        dc_rail_volts=rectify(DEFAULT_RATINGS.transformer_volts_ac) if on else 0.0,
        channels=_derive_channels(on, card.latched_data),
    )


def validate_load(
    ratings: ComponentRatings,
    volts_ac: float,
    amps: float,
    channel: int = 0,
) -> Optional[LoadFault]:
    """Check a switched load against the relay contact ratings.

    Returns None when the load is within limits (boundary values are
    fine) or a LoadFault for the exceeded dimension; when both limits
    are exceeded the current fault wins.
    """
    if volts_ac < 0 or amps < 0:
        raise ValueError("load figures cannot be negative")
    if amps > ratings.contact_max_amps:
        return LoadFault(FaultKind.OVER_CURRENT, channel, amps, "A")
    if volts_ac > ratings.contact_max_volts:
        return LoadFault(FaultKind.OVER_VOLTAGE, channel, volts_ac, "V")
    return None
