"""Simulator tests: clock evolution, stimuli, HAL behavior, determinism."""

import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from relayhouse.card import Terminal
from relayhouse.house import default_house
from relayhouse.port import Level
from relayhouse.sim import (
    ScenarioError,
    ScenarioEvent,
    ScenarioKind,
    SimWorld,
    load_scenario,
)

IR = ScenarioKind.IR_DISTURBANCE


def world(events=(), powered=True):
    return SimWorld(default_house(), powered=powered, events=list(events))


def ir(t_ms, duration_ms=200, sensor_id="ir1"):
    return ScenarioEvent(t_ms, IR, sensor_id=sensor_id, duration_ms=duration_ms)


def test_step_requires_positive_dt():
    w = world()
    with pytest.raises(ValueError):
        w.step(0)


def test_empty_step_only_advances_clock():
    w = world()
    before = w.snapshot()
    w.step(50)
    after = w.snapshot()
    assert after["clock_ms"] == 50
    for key in ("card", "regs", "sensor_active_until", "stuck", "applied_count"):
        assert after[key] == before[key]


def test_disturbance_window():
    w = world([ir(500, 200)])
    w.step(520)
    assert w.status_levels()["ACK"] is Level.HIGH
    w.step(280)  # now at 800, window [500, 700) passed
    assert w.status_levels()["ACK"] is Level.LOW


def test_disturbance_expiry_boundary():
    w = world([ir(500, 200)])
    w.step(699)
    assert w.status_levels()["ACK"] is Level.HIGH
    w.step(1)
    assert w.status_levels()["ACK"] is Level.LOW


def test_power_loss_and_restore():
    w = world()
    w.write_data(0x41)
    active = {ch.index for ch in w.card.channels if ch.terminal is Terminal.T2}
    assert active == {0, 6}
    w.inject(ScenarioEvent(100, ScenarioKind.POWER_LOSS))
    w.step(100)
    assert not w.card.powered
    assert all(ch.terminal is Terminal.T1 for ch in w.card.channels)
    w.inject(ScenarioEvent(200, ScenarioKind.POWER_RESTORE))
    w.step(100)
    active = {ch.index for ch in w.card.channels if ch.terminal is Terminal.T2}
    assert active == {0, 6}


def test_inject_past_dated_clamps_with_warning():
    w = world()
    w.step(300)
    e = w.inject(ir(100))
    assert e.t_ms == 300
    assert any(j.get("warning") == "inject_clamped" for j in w.journal)
    w.step(1)
    assert w.status_levels()["ACK"] is Level.HIGH


def test_equal_time_events_apply_in_injection_order():
    w = world()
    w.inject(ScenarioEvent(50, ScenarioKind.POWER_LOSS))
    w.inject(ScenarioEvent(50, ScenarioKind.POWER_RESTORE))
    w.step(60)
    assert w.card.powered  # restore came second
    applied = [j["applied"] for j in w.journal if "applied" in j]
    assert applied == ["power_loss", "power_restore"]


def test_line_stuck_and_release():
    w = world()
    w.inject(ScenarioEvent(10, ScenarioKind.LINE_STUCK, line="PE", level=Level.HIGH))
    w.step(20)
    assert w.status_levels()["PE"] is Level.HIGH
    w.inject(ScenarioEvent(30, ScenarioKind.LINE_RELEASE, line="PE"))
    w.step(20)
    assert w.status_levels()["PE"] is Level.LOW


def test_line_stuck_low_masks_sensor():
    w = world([ir(100, 500)])
    w.inject(ScenarioEvent(50, ScenarioKind.LINE_STUCK, line="ACK", level=Level.LOW))
    w.step(200)
    assert w.read_status() == 0x80


def test_hal_write_data_drives_card():
    w = world()
    w.write_data(0x41)
    active = {ch.index for ch in w.card.channels if ch.terminal is Terminal.T2}
    assert active == {0, 6}
    assert w.regs.data == 0x41


def test_hal_read_status_quiet_is_0x80():
    assert world().read_status() == 0x80


def test_hal_read_status_during_disturbance():
    w = world([ir(500, 200)])
    w.step(520)
    assert w.read_status() == 0xC0


def test_read_status_has_no_side_effects():
    w = world([ir(500, 200)])
    w.step(520)
    before = w.snapshot()
    assert w.read_status() == w.read_status()
    assert w.snapshot() == before


def test_write_data_idempotent():
    w = world()
    w.write_data(0x33)
    before = w.snapshot()
    w.write_data(0x33)
    assert w.snapshot() == before


def test_write_control_masks_and_journals():
    w = world()
    w.write_control(0xFF)
    assert w.regs.control == 0x0E
    assert any(j.get("warning") == "control_bits_masked" for j in w.journal)
    assert w.levels()["AUTOFD"] is Level.LOW
    assert w.levels()["INIT"] is Level.HIGH


def test_data_line_levels_track_register():
    w = world()
    w.write_data(0x05)
    levels = w.levels()
    assert levels["D0"] is Level.HIGH
    assert levels["D1"] is Level.LOW
    assert levels["D2"] is Level.HIGH


@given(st.lists(st.integers(1, 400), min_size=1, max_size=8))
def test_clock_additivity(chunks):
    scenario = [ir(100, 150), ir(400, 80, "ir1")]
    split = SimWorld(default_house(), events=scenario)
    for dt in chunks:
        split.step(dt)
    merged = SimWorld(default_house(), events=scenario)
    merged.step(sum(chunks))
    assert split.snapshot() == merged.snapshot()


def test_deterministic_replay_identical_traces():
    scenario = [
        ir(100, 150),
        ScenarioEvent(200, ScenarioKind.POWER_LOSS),
        ScenarioEvent(400, ScenarioKind.POWER_RESTORE),
    ]

    def trace():
        w = SimWorld(default_house(), events=scenario)
        out = []
        for _ in range(10):
            w.step(50)
            w.write_data(0x07)
            out.append((w.read_status(), w.snapshot()))
        return out

    assert trace() == trace()


# -- scenario parsing ---------------------------------------------------------

def test_load_scenario_empty():
    assert load_scenario("[]") == []


def test_load_scenario_sorts_stable():
    text = json.dumps(
        [
            {"t_ms": 100, "kind": "power_loss"},
            {"t_ms": 50, "kind": "ir_disturbance", "sensor_id": "ir1", "duration_ms": 10},
            {"t_ms": 100, "kind": "power_restore"},
        ]
    )
    events = load_scenario(text)
    assert [e.t_ms for e in events] == [50, 100, 100]
    assert events[1].kind is ScenarioKind.POWER_LOSS
    assert events[2].kind is ScenarioKind.POWER_RESTORE


def test_load_scenario_zero_duration_names_index():
    text = json.dumps(
        [
            {"t_ms": 0, "kind": "power_loss"},
            {"t_ms": 10, "kind": "ir_disturbance", "sensor_id": "ir1", "duration_ms": 0},
        ]
    )
    with pytest.raises(ScenarioError, match="entry 1"):
        load_scenario(text)


def test_load_scenario_unknown_kind():
    with pytest.raises(ScenarioError, match="entry 0"):
        load_scenario('[{"t_ms": 0, "kind": "earthquake"}]')


def test_load_scenario_negative_time():
    with pytest.raises(ScenarioError):
        load_scenario('[{"t_ms": -5, "kind": "power_loss"}]')


def test_load_scenario_unknown_key():
    with pytest.raises(ScenarioError, match="unknown keys"):
        load_scenario('[{"t_ms": 0, "kind": "power_loss", "boom": 1}]')


def test_load_scenario_not_a_list():
    with pytest.raises(ScenarioError):
        load_scenario('{"t_ms": 0}')


def test_event_dict_roundtrip():
    e = ScenarioEvent(40, ScenarioKind.LINE_STUCK, line="PE", level=Level.HIGH)
    from relayhouse.sim import event_from_dict

    assert event_from_dict(e.to_dict()) == e
