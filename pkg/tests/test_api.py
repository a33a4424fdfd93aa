"""Wire API tests over a real HTTP socket with a live control loop."""

import dataclasses
import json
import threading
import time
import urllib.error
import urllib.request

import pytest

from relayhouse.api import ApiServer
from relayhouse.daemon import ControlLoop
from relayhouse.house import default_house
from relayhouse.port import HalBackend
from relayhouse.sim import SimWorld


class QuietBackend(HalBackend):
    """Non-simulator backend double: always-quiet status, writes accepted."""

    def read_status(self):
        return 0x80

    def write_data(self, value):
        pass

    def write_control(self, value):
        pass


def request(addr, method, path, body=None):
    data = json.dumps(body).encode() if body is not None else None
    req = urllib.request.Request(
        f"http://{addr}{path}",
        data=data,
        method=method,
        headers={"Content-Type": "application/json"} if data else {},
    )
    try:
        with urllib.request.urlopen(req, timeout=10) as resp:
            return resp.status, json.loads(resp.read() or b"{}"), dict(resp.headers)
    except urllib.error.HTTPError as exc:
        return exc.code, json.loads(exc.read() or b"{}"), dict(exc.headers)


def wait_for(predicate, timeout=5.0, interval=0.02):
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        if predicate():
            return True
        time.sleep(interval)
    return False


def start_daemon(backend_factory, arm_on_start=False):
    house = dataclasses.replace(default_house(), poll_interval_ms=10)
    backend = backend_factory(house)
    loop = ControlLoop(house, backend, arm_on_start=arm_on_start)
    stop = threading.Event()
    thread = threading.Thread(target=loop.run_forever, args=(stop,), daemon=True)
    server = ApiServer(loop, "127.0.0.1", 0)
    server.start()
    thread.start()
    return f"127.0.0.1:{server.port}", loop, (stop, thread, server)


def stop_daemon(handle):
    stop, thread, server = handle
    stop.set()
    thread.join(timeout=5)
    server.stop()


@pytest.fixture
def sim_daemon():
    addr, loop, handle = start_daemon(lambda house: SimWorld(house))
    yield addr, loop
    stop_daemon(handle)


@pytest.fixture
def hw_daemon():
    addr, loop, handle = start_daemon(lambda house: QuietBackend())
    yield addr, loop
    stop_daemon(handle)


def test_get_state(sim_daemon):
    addr, _ = sim_daemon
    status, body, headers = request(addr, "GET", "/v1/state")
    assert status == 200
    assert headers["Access-Control-Allow-Origin"] == "*"
    assert len(body["zones"]) == 7
    assert body["backend"] == "sim"
    assert body["alarm"]["mode"] == "disarmed"


def test_light_read_your_write(sim_daemon):
    addr, _ = sim_daemon
    status, body, _ = request(addr, "POST", "/v1/zones/room1/light", {"on": True})
    assert status == 200 and body["status"] == "ok"

    def lit():
        _, snap, _ = request(addr, "GET", "/v1/state")
        zone = next(z for z in snap["zones"] if z["id"] == "room1")
        return zone["light"] and zone["led"]

    assert wait_for(lit)


def test_light_unknown_zone_404(sim_daemon):
    addr, _ = sim_daemon
    status, body, _ = request(addr, "POST", "/v1/zones/garage/light", {"on": True})
    assert status == 404
    assert "not found" in body["error"]


def test_light_malformed_body_400(sim_daemon):
    addr, _ = sim_daemon
    status, body, _ = request(addr, "POST", "/v1/zones/room1/light", {"on": "yes"})
    assert status == 400
    assert body["violations"]
    status, body, _ = request(addr, "POST", "/v1/zones/room1/light", {})
    assert status == 400
    assert any("missing" in v for v in body["violations"])


def test_alarm_arm_then_state(sim_daemon):
    addr, _ = sim_daemon
    status, body, _ = request(addr, "POST", "/v1/alarm/arm")
    assert status == 200 and body["status"] == "queued"

    def armed():
        _, snap, _ = request(addr, "GET", "/v1/state")
        return snap["alarm"]["mode"] == "armed"

    assert wait_for(armed)


def test_reset_while_disarmed_is_noop(sim_daemon):
    addr, _ = sim_daemon
    status, body, _ = request(addr, "POST", "/v1/alarm/reset")
    assert status == 200
    assert body["status"] == "no-op"


def test_events_replay_in_order(sim_daemon):
    addr, _ = sim_daemon
    request(addr, "POST", "/v1/zones/room1/light", {"on": True})
    request(addr, "POST", "/v1/alarm/arm")
    assert wait_for(
        lambda: len(request(addr, "GET", "/v1/events?since=0")[1]["events"]) >= 3
    )
    _, body, _ = request(addr, "GET", "/v1/events?since=0")
    seqs = [e["seq"] for e in body["events"]]
    assert seqs == list(range(1, len(seqs) + 1))
    _, tail, _ = request(addr, "GET", f"/v1/events?since={seqs[-2]}")
    assert [e["seq"] for e in tail["events"]] == [seqs[-1]]


def test_inject_and_stream_alert(sim_daemon):
    addr, _ = sim_daemon
    request(addr, "POST", "/v1/alarm/arm")
    status, body, _ = request(
        addr,
        "POST",
        "/v1/sim/inject",
        {"t_ms": 0, "kind": "ir_disturbance", "sensor_id": "ir1", "duration_ms": 500},
    )
    assert status == 202
    assert body["event"]["kind"] == "ir_disturbance"

    records = []
    stream = urllib.request.urlopen(
        urllib.request.Request(f"http://{addr}/v1/stream?since=0"), timeout=10
    )
    with stream:
        for raw in stream:
            line = raw.decode().strip()
            if line.startswith("data: "):
                records.append(json.loads(line[6:]))
                if records[-1]["kind"] == "alert":
                    break
    kinds = [r["kind"] for r in records]
    assert "alert" in kinds
    assert "alarm_transition" in kinds
    seqs = [r["seq"] for r in records]
    assert seqs == sorted(seqs)


def test_inject_rejected_on_non_sim_backend(hw_daemon):
    addr, _ = hw_daemon
    status, body, _ = request(
        addr, "POST", "/v1/sim/inject", {"t_ms": 0, "kind": "power_loss"}
    )
    assert status == 409
    assert "simulator" in body["error"]


def test_inject_malformed_event_400(sim_daemon):
    addr, _ = sim_daemon
    status, body, _ = request(
        addr, "POST", "/v1/sim/inject", {"t_ms": 0, "kind": "earthquake"}
    )
    assert status == 400


def test_unknown_path_404(sim_daemon):
    addr, _ = sim_daemon
    status, _, _ = request(addr, "GET", "/v1/nope")
    assert status == 404
    status, _, _ = request(addr, "POST", "/v1/alarm/panic")
    assert status == 404


def test_options_preflight(sim_daemon):
    addr, _ = sim_daemon
    req = urllib.request.Request(f"http://{addr}/v1/state", method="OPTIONS")
    with urllib.request.urlopen(req, timeout=5) as resp:
        assert resp.status == 204
        assert "POST" in resp.headers["Access-Control-Allow-Methods"]
