"""
relayhouse.cli - Operator command line.

    relayhouse run     --config daemon.json [--scenario s.json] [--until-ms N]
    relayhouse replay  --config daemon.json --until-ms N [--scenario s.json] [--log out.jsonl]
    relayhouse status | light | arm | disarm | reset | events   (against a running daemon)

Exit codes: 0 success, 1 runtime or API failure, 2 usage or config error.
"""

from __future__ import annotations

import argparse
import json
import signal
import sys
import threading
import urllib.error
import urllib.request
from typing import Optional

from .api import ApiServer
from .config import DEFAULT_BIND, load_daemon_config, parse_bind
from .daemon import ControlLoop, DaemonError
from .events import EventLog
from .house import ConfigError
from .sim import ScenarioError, SimWorld, load_scenario_file

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2


class ApiError(Exception):
    def __init__(self, message: str):
        super().__init__(message)


# -- daemon-side subcommands ------------------------------------------------------

def _build_loop(args, with_log=True):
    cfg = load_daemon_config(args.config)
    scenario_path = getattr(args, "scenario", None) or cfg.scenario
    events = load_scenario_file(scenario_path) if scenario_path else []
    log_path = getattr(args, "log", None) or (cfg.log_path if with_log else None)
    world = SimWorld(cfg.house, events=events)
    event_log = EventLog(log_path)
    loop = ControlLoop(cfg.house, world, event_log, arm_on_start=cfg.arm_on_start)
    return cfg, loop, event_log


def _print_summary(loop: ControlLoop):
    for zone in loop.house.zones:
        state = "on" if loop.desired_lights[zone.id] else "off"
        print(f"{zone.id}={state}")
    print(f"alarm={loop.alarm.mode.value}")
    print(f"tick={loop.tick_count}")
    print(f"clock_ms={loop.now_ms()}")
    print(f"events={loop.log.last_seq}")


def cmd_run(args) -> int:
    try:
        cfg, loop, event_log = _build_loop(args)
        host, port = parse_bind(args.bind or cfg.bind)
    except (ConfigError, ScenarioError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    server = ApiServer(loop, host, port, ui_dir=args.ui)
    server.start()
    print(f"listening on {server.host}:{server.port}", flush=True)
    try:
        if args.until_ms is not None:
            loop.run_until(args.until_ms)
            _print_summary(loop)
            return EXIT_OK
        stop = threading.Event()
        for signum in (signal.SIGINT, signal.SIGTERM):
            signal.signal(signum, lambda *_: stop.set())
        loop.run_forever(stop)
        return EXIT_OK
    except KeyboardInterrupt:
        return EXIT_OK
    except DaemonError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    finally:
        server.stop()
        event_log.close()


def cmd_replay(args) -> int:
    try:
        _, loop, event_log = _build_loop(args)
    except (ConfigError, ScenarioError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        loop.run_until(args.until_ms)
        _print_summary(loop)
        return EXIT_OK
    except DaemonError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    finally:
        event_log.close()


# -- client-side subcommands ---------------------------------------------------------

def _resolve_addr(args) -> str:
    if args.addr:
        return args.addr
    if args.config:
        return load_daemon_config(args.config).bind
    return DEFAULT_BIND


def _request(addr: str, method: str, path: str, body: Optional[dict] = None):
    data = json.dumps(body).encode("utf-8") if body is not None else None
    request = urllib.request.Request(
        f"http://{addr}{path}",
        data=data,
        method=method,
        headers={"Content-Type": "application/json"} if data else {},
    )
    try:
        with urllib.request.urlopen(request, timeout=10) as response:
            return json.loads(response.read() or b"{}")
    except urllib.error.HTTPError as exc:
        try:
            detail = json.loads(exc.read()).get("error", exc.reason)
        except Exception:
            detail = exc.reason
        raise ApiError(f"{detail} (HTTP {exc.code})") from exc
    except (urllib.error.URLError, OSError) as exc:
        raise ApiError(f"cannot reach daemon at {addr}: {exc}") from exc


def cmd_status(args) -> int:
    snapshot = _request(_resolve_addr(args), "GET", "/v1/state")
    if args.format == "json":
        print(json.dumps(snapshot, indent=2))
        return EXIT_OK
    for zone in snapshot["zones"]:
        print(f"{zone['id']}={'on' if zone['light'] else 'off'}")
    print(f"alarm={snapshot['alarm']['mode']}")
    print(f"tick={snapshot['tick']}")
    return EXIT_OK


def cmd_light(args) -> int:
    on = args.state == "on"
    body = _request(
        _resolve_addr(args), "POST", f"/v1/zones/{args.zone}/light", {"on": on}
    )
    print(f"{args.zone} {'on' if on else 'off'} ({body.get('status', 'ok')})")
    return EXIT_OK


def _alarm_command(args, name: str) -> int:
    body = _request(_resolve_addr(args), "POST", f"/v1/alarm/{name}")
    print(body.get("status", "ok"))
    return EXIT_OK


def _print_event(record: dict, fmt: str):
    if fmt == "json":
        print(json.dumps(record, separators=(",", ":")))
    else:
        payload = json.dumps(record.get("payload", {}), separators=(",", ":"))
        print(f"{record['seq']} {record['ts_ms']} {record['kind']} {payload}")


def cmd_events(args) -> int:
    addr = _resolve_addr(args)
    if not args.follow:
        body = _request(addr, "GET", f"/v1/events?since={args.since}")
        for record in body["events"]:
            _print_event(record, args.format)
        return EXIT_OK

    request = urllib.request.Request(f"http://{addr}/v1/stream?since={args.since}")
    try:
        with urllib.request.urlopen(request, timeout=30) as response:
            for raw in response:
                line = raw.decode("utf-8").strip()
                if line.startswith("data: "):
                    _print_event(json.loads(line[6:]), args.format)
                    sys.stdout.flush()
    except KeyboardInterrupt:
        return EXIT_OK
    except (urllib.error.URLError, OSError) as exc:
        raise ApiError(f"stream from {addr} failed: {exc}") from exc
    return EXIT_OK


# -- argument parsing ------------------------------------------------------------------

def _add_client_flags(parser):
    parser.add_argument("--addr", help="daemon address host:port")
    parser.add_argument("--config", help="daemon config file (for its bind address)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="relayhouse",
        description="house lighting and alarm controller over a relay card",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    run = sub.add_parser("run", help="start the daemon")
    run.add_argument("--config", required=True)
    run.add_argument("--scenario", help="scenario file (overrides the config)")
    run.add_argument("--until-ms", type=int, default=None,
                     help="drive the simulated clock to N ms, print a summary and exit")
    run.add_argument("--bind", help="override the config bind address")
    run.add_argument("--ui", help="serve this directory as the dashboard at /")
    run.add_argument("--log", help="override the event log path")
    run.set_defaults(func=cmd_run)

    replay = sub.add_parser("replay", help="headless deterministic run, no API server")
    replay.add_argument("--config", required=True)
    replay.add_argument("--scenario", help="scenario file (overrides the config)")
    replay.add_argument("--until-ms", type=int, required=True)
    replay.add_argument("--log", help="override the event log path")
    replay.set_defaults(func=cmd_replay)

    status = sub.add_parser("status", help="print zones, alarm mode and tick")
    status.add_argument("--format", choices=("text", "json"), default="text")
    _add_client_flags(status)
    status.set_defaults(func=cmd_status)

    light = sub.add_parser("light", help="switch one zone's light")
    light.add_argument("zone")
    light.add_argument("state", choices=("on", "off"))
    _add_client_flags(light)
    light.set_defaults(func=cmd_light)

    for name in ("arm", "disarm", "reset"):
        p = sub.add_parser(name, help=f"{name} the alarm")
        _add_client_flags(p)
        p.set_defaults(func=lambda args, name=name: _alarm_command(args, name))

    events = sub.add_parser("events", help="dump or follow the event log")
    events.add_argument("--since", type=int, default=0)
    events.add_argument("--follow", action="store_true")
    events.add_argument("--format", choices=("text", "json"), default="text")
    _add_client_flags(events)
    events.set_defaults(func=cmd_events)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ApiError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def entry():
    sys.exit(main())


if __name__ == "__main__":
    entry()
