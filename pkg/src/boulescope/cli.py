"""Command-line driver.

Subcommands:
    table2     reproduce the published indoor/outdoor accuracy table
    calibrate  fit a noise sigma to a target mean max-abs deviation
    play       run a full match against the emulator via the service API
    serve      launch the scoring service plus an in-process device emulator
    device     run a standalone device emulator
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from . import bench, sensor
from .api import make_server
from .device import DeviceEmulator, serve_forever as device_serve
from .sensor import EnvironmentConfig
from .service import ScoringService

DEFAULT_ADDR = "127.0.0.1:8750"
DEFAULT_DEVICE_ADDR = "127.0.0.1:9750"
DEFAULT_LOG_DIR = "./boulescope_logs"

DEMO_SCENE = {
    "P1-1": 200.0, "P1-2": 300.0, "P1-3": 400.0,
    "P2-1": 400.0, "P2-2": 400.0, "P2-3": 400.0,
}


def split_addr(text: str) -> tuple[str, int]:
    host, _, port = text.rpartition(":")
    if not host or not port.isdigit():
        raise argparse.ArgumentTypeError(f"expected host:port, got {text!r}")
    return host, int(port)


def environment_for(name: str) -> EnvironmentConfig:
    if name == "indoor":
        return EnvironmentConfig.indoor()
    if name == "outdoor":
        return EnvironmentConfig.outdoor()
    return EnvironmentConfig.noiseless()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="boulescope")
    sub = parser.add_subparsers(dest="command", required=True)

    t2 = sub.add_parser("table2", help="reproduce the published accuracy table")
    t2.add_argument("--trials", type=int, default=10000)
    t2.add_argument("--seed", type=int, default=1)
    t2.add_argument("--sigma-indoor", type=float, default=sensor.CALIBRATED_SIGMA_INDOOR)
    t2.add_argument("--sigma-outdoor", type=float, default=sensor.CALIBRATED_SIGMA_OUTDOOR)
    t2.add_argument("--bias-indoor", type=float, default=0.0)
    t2.add_argument("--bias-outdoor", type=float, default=sensor.OUTDOOR_BIAS_CM)
    t2.add_argument(
        "--extra-distance", type=float, action="append", default=[],
        help="additional actual distances beyond the published 3/5/10/15 cm grid",
    )
    t2.add_argument("--json", action="store_true", help="machine-readable report")

    cal = sub.add_parser("calibrate", help="fit sigma to a deviation target")
    cal.add_argument("--target", type=float, required=True, help="mean max-abs deviation, cm")
    cal.add_argument("--samples", type=int, default=3, help="readings per batch")
    cal.add_argument("--trials", type=int, default=20000)
    cal.add_argument("--seed", type=int, default=1)
    cal.add_argument("--bias", type=float, default=0.0, help="constant reading bias, cm")
    cal.add_argument("--quantum", type=float, default=0.01)

    play = sub.add_parser("play", help="play a full match through the service")
    src = play.add_mutually_exclusive_group(required=True)
    src.add_argument("--scene", help="JSON file mapping boule id to true distance (cm)")
    src.add_argument("--random-seed", type=int, help="randomize a fresh scene per round")
    play.add_argument("--players", nargs=2, default=["P1", "P2"], metavar=("P1", "P2"))
    play.add_argument("--boules", type=int, default=3)
    play.add_argument("--target-score", type=int, default=13)
    play.add_argument("--env", choices=["noiseless", "indoor", "outdoor"], default="noiseless")
    play.add_argument("--seed", type=int, default=0, help="device noise seed")

    srv = sub.add_parser("serve", help="run service + in-process device emulator")
    srv.add_argument(
        "--addr", type=split_addr,
        default=os.environ.get("BOULESCOPE_ADDR", DEFAULT_ADDR),
        help=f"API listen address (env BOULESCOPE_ADDR, default {DEFAULT_ADDR})",
    )
    srv.add_argument(
        "--log-dir",
        default=os.environ.get("BOULESCOPE_LOG_DIR", DEFAULT_LOG_DIR),
        help=f"event log directory (env BOULESCOPE_LOG_DIR, default {DEFAULT_LOG_DIR})",
    )
    srv.add_argument("--scene", help="JSON scene file (default: built-in demo scene)")
    srv.add_argument("--env", choices=["noiseless", "indoor", "outdoor"], default="indoor")
    srv.add_argument("--seed", type=int, default=0)
    srv.add_argument("--latency-ms", type=float, default=0.0,
                     help="artificial reply delay for demos (0-5000)")
    srv.add_argument("--verbose", action="store_true")

    dev = sub.add_parser("device", help="run a standalone device emulator")
    dev.add_argument("--addr", type=split_addr, default=DEFAULT_DEVICE_ADDR)
    dev.add_argument("--scene", required=True, help="JSON scene file")
    dev.add_argument("--env", choices=["noiseless", "indoor", "outdoor"], default="indoor")
    dev.add_argument("--seed", type=int, default=0)
    dev.add_argument("--latency-ms", type=float, default=0.0)

    return parser


def cmd_table2(args) -> int:
    distances = bench.REFERENCE_DISTANCES + tuple(args.extra_distance)
    try:
        report = bench.run_table2(
            trials=args.trials,
            seed=args.seed,
            sigma_indoor=args.sigma_indoor,
            sigma_outdoor=args.sigma_outdoor,
            distances=distances,
            bias_indoor=args.bias_indoor,
            bias_outdoor=args.bias_outdoor,
        )
    except bench.BenchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.json:
        print(json.dumps(report.to_json(), indent=2))
    else:
        print(bench.render_report(report))
    return 0


def cmd_calibrate(args) -> int:
    try:
        sigma = sensor.calibrate_sigma(
            args.target,
            args.samples,
            trials=args.trials,
            seed=args.seed,
            bias_cm=args.bias,
            quantum_cm=args.quantum,
        )
    except (sensor.CalibrationError, ValueError) as exc:
        print(f"calibration failed: {exc}", file=sys.stderr)
        return 2
    achieved = sensor.estimate_mean_max_abs_deviation(
        sigma, args.samples, trials=max(args.trials, 10000), seed=args.seed + 1,
        bias_cm=args.bias, quantum_cm=args.quantum,
    )
    print(f"sigma = {sigma:.5f} cm (fresh Monte Carlo deviation {achieved:.5f}, "
          f"target {args.target})")
    return 0


def cmd_play(args) -> int:
    scene = bench.load_scene(args.scene) if args.scene else None
    runtime = bench.MatchRuntime(env=environment_for(args.env), seed=args.seed)
    try:
        transcript = bench.play_match(
            scene=scene,
            random_seed=args.random_seed,
            players=tuple(args.players),
            boules_per_player=args.boules,
            target_score=args.target_score,
            runtime=runtime,
        )
    except bench.BenchError as exc:
        print(f"match failed: {exc}", file=sys.stderr)
        return 2
    finally:
        runtime.close()
    for line in transcript.lines():
        print(line)
    return 1 if transcript.violations else 0


def cmd_serve(args) -> int:
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    scene = bench.load_scene(args.scene) if args.scene else dict(DEMO_SCENE)
    addr = args.addr if isinstance(args.addr, tuple) else split_addr(args.addr)
    device = DeviceEmulator(scene, environment_for(args.env), seed=args.seed,
                            latency_ms=args.latency_ms)
    dev_host, dev_port = device.start()
    service = ScoringService(args.log_dir)
    server = make_server(service, addr[0], addr[1], verbose=args.verbose)
    print(f"device emulator: {dev_host}:{dev_port} "
          f"({args.env}, seed {args.seed}, latency {args.latency_ms} ms)")
    print(f"scoring service: {server.url}  (logs in {args.log_dir})")
    print('create a session with:')
    print(f'  curl -s -X POST {server.url}/sessions -d '
          f'\'{{"device_address":"{dev_host}:{dev_port}"}}\'', flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.shutdown()
        server.server_close()
        service.shutdown()
        device.stop()
    return 0


def cmd_device(args) -> int:
    scene = bench.load_scene(args.scene)
    addr = args.addr if isinstance(args.addr, tuple) else split_addr(args.addr)
    device_serve(scene, environment_for(args.env), addr[0], addr[1],
                 seed=args.seed, latency_ms=args.latency_ms)
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    commands = {
        "table2": cmd_table2,
        "calibrate": cmd_calibrate,
        "play": cmd_play,
        "serve": cmd_serve,
        "device": cmd_device,
    }
    return commands[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
