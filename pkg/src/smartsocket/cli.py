"""Command line entry points: serve, simulate, replay, report."""
from __future__ import annotations

import argparse
import asyncio
import dataclasses
import logging
import shutil
import sys
from pathlib import Path

from . import codec, model, store
from .config import load_config
from .engine import EngineParams
from .errors import ConfigError, Corrupt, SmartSocketError, UnknownSocket
from .gateway import Gateway, rebuild, serve_file, serve_tcp
from .scenario import ScenarioError, Simulation, drive, parse_scenario
from .socket_sim import DEFAULT_DEBOUNCE, DEFAULT_I_ON

logger = logging.getLogger("smartsocket")

EXIT_OK, EXIT_CONFIG, EXIT_IO = 0, 1, 2


def _fail(code: int, msg: str) -> int:
    print(f"error: {msg}", file=sys.stderr)
    return code


def _engine_params(args) -> EngineParams:
    if args.config:
        base = load_config(args.config).params
    else:
        base = EngineParams()
    overrides = {k: v for k, v in (("bin_size_minutes", args.bin_size),
                                   ("pattern_days", args.pattern_days),
                                   ("grace_minutes", args.grace)) if v is not None}
    return dataclasses.replace(base, **overrides)


def _alarm_line(a: model.Alarm) -> str:
    return f"alarm={a.dedupe_key} raised_at={model.format_ts(a.raised_at)}"


def cmd_serve(args) -> int:
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, str(exc))
    if cfg.input is None and cfg.listen is None:
        return _fail(EXIT_CONFIG, "config needs either input= or listen=")
    try:
        gw = Gateway(cfg)
    except Corrupt as exc:
        return _fail(EXIT_IO, str(exc))
    except OSError as exc:
        return _fail(EXIT_IO, f"cannot open state files: {exc}")
    try:
        if cfg.input is not None:
            serve_file(gw, cfg.input)
        else:
            host, port = cfg.listen
            asyncio.run(serve_tcp(gw, host, port))
    except OSError as exc:
        return _fail(EXIT_IO, str(exc))
    finally:
        gw.close()
    return EXIT_OK


def _reset_state(cfg) -> None:
    for path in (cfg.log_path, cfg.journal_path, cfg.dead_letter_path):
        Path(path).unlink(missing_ok=True)
    if Path(cfg.outbox_dir).is_dir():
        shutil.rmtree(cfg.outbox_dir)


def cmd_simulate(args) -> int:
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, str(exc))
    cfg.clock = "logical"
    try:
        with open(args.scenario, encoding="ascii", errors="replace") as fh:
            scenario = parse_scenario(fh)
    except ScenarioError as exc:
        return _fail(EXIT_CONFIG, str(exc))
    except OSError as exc:
        return _fail(EXIT_CONFIG, f"cannot read scenario: {exc}")
    if args.fresh:
        _reset_state(cfg)
    try:
        gw = Gateway(cfg)
    except (Corrupt, OSError) as exc:
        return _fail(EXIT_IO, str(exc))

    def direct_send(destination: str, env: codec.Envelope) -> None:
        # DIRECT sockets text the watcher themselves; only the outbox stub is shared
        gw.router.resolve(destination).send(destination, env.body, env.received_at)

    sim = Simulation(cfg.server_address, direct_send, i_on=args.i_on,
                     debounce_seconds=args.debounce)
    try:
        result = sim.run(scenario)
        drive(gw, result.inputs)
    except ScenarioError as exc:
        return _fail(EXIT_CONFIG, str(exc))
    finally:
        gw.close()
    print(f"events={result.events}")
    print(f"notifications={result.notifications}")
    print(f"direct={result.direct}")
    print(f"dropped={result.dropped}")
    print(f"dead_letters={gw.counters['dead_letters']}")
    print(f"alarms={len(gw.alarms)}")
    for a in gw.alarms:
        print(_alarm_line(a))
    return EXIT_OK


def cmd_replay(args) -> int:
    try:
        params = _engine_params(args)
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, str(exc))
    try:
        _, alarms, logged = rebuild(args.log, params)
    except Corrupt as exc:
        return _fail(EXIT_CONFIG, f"Corrupt: {exc}")
    if {a.dedupe_key for a in logged} - {a.dedupe_key for a in alarms}:
        logger.warning("some logged alarms were not reproduced with these engine parameters")
    for a in alarms:
        print(_alarm_line(a))
    print(f"alarms={len(alarms)}")
    return EXIT_OK


def cmd_report(args) -> int:
    try:
        params = _engine_params(args)
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, str(exc))
    try:
        engine, alarms, _ = rebuild(args.log, params)
        states = engine.snapshot(args.socket)
    except Corrupt as exc:
        return _fail(EXIT_CONFIG, f"Corrupt: {exc}")
    except UnknownSocket as exc:
        return _fail(EXIT_CONFIG, str(exc))
    for s in states:
        print(s.render(params.bin_size_minutes))
    if args.figure:
        from .plotting import report_figure

        events = [model.parse_ts(r.payload) for r in store.replay(args.log)
                  if r.kind is store.Kind.EVENT and r.socket == args.socket]
        report_figure(args.socket, events, states,
                      [a for a in alarms if a.socket == args.socket],
                      params.bin_size_minutes, params.pattern_days, args.figure)
        logger.info("figure written to %s", args.figure)
    return EXIT_OK


def _add_engine_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="service config supplying engine parameters")
    p.add_argument("--bin-size", type=int, help="bin size in minutes (default 60)")
    p.add_argument("--pattern-days", type=int, help="consecutive days forming a pattern (default 3)")
    p.add_argument("--grace", type=int, help="grace period in minutes (default 15)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="smartsocket", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("serve", help="run the middleware service")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("simulate", help="run virtual sockets and the middleware on a scenario")
    p.add_argument("--scenario", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--i-on", type=float, default=DEFAULT_I_ON, help="switch-on current in amps")
    p.add_argument("--debounce", type=int, default=DEFAULT_DEBOUNCE, help="debounce in seconds")
    p.add_argument("--fresh", action="store_true",
                   help="delete existing log, journal, dead letters and outboxes first")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("replay", help="recompute alarms from a log; routes nothing")
    p.add_argument("--log", required=True)
    _add_engine_flags(p)
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("report", help="print the pattern table for one socket")
    p.add_argument("--log", required=True)
    p.add_argument("--socket", required=True)
    p.add_argument("--figure", help="also write a PNG/PDF figure to this path")
    _add_engine_flags(p)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except SmartSocketError as exc:
        return _fail(EXIT_CONFIG, str(exc))


if __name__ == "__main__":
    sys.exit(main())
