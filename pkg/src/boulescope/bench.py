"""Accuracy benchmark and match driver.

Reproduces the published indoor/outdoor accuracy table of the prototype jack
(max absolute deviation of 3-reading batches over a 3-15 cm grid) and drives
complete matches against the emulated device through the scoring service's
HTTP API.
"""

from __future__ import annotations

import json
import random
import tempfile
import threading
import urllib.error
import urllib.request
from dataclasses import dataclass, field
from pathlib import Path

from . import sensor
from .api import make_server
from .device import DeviceEmulator
from .sensor import EnvironmentConfig, INDOOR, OUTDOOR, quantize
from .service import ScoringService

# Distance grid of the published accuracy test, mimicking the play area.
REFERENCE_DISTANCES = (3.0, 5.0, 10.0, 15.0)

# The published 3-reading batches per actual distance, used as a verbatim
# fixture for the deviation statistic.
REFERENCE_READINGS = {
    INDOOR: {
        3.0: (3.01, 3.00, 3.00),
        5.0: (5.00, 5.00, 5.04),
        10.0: (10.04, 10.01, 10.02),
        15.0: (15.03, 15.03, 15.01),
    },
    OUTDOOR: {
        3.0: (3.01, 3.03, 3.03),
        5.0: (5.05, 5.04, 5.02),
        10.0: (10.04, 10.05, 10.04),
        15.0: (15.06, 15.03, 14.99),
    },
}

READINGS_PER_BATCH = 3


class BenchError(Exception):
    pass


def deviation_stat(actual_cm: float, readings: list[float] | tuple[float, ...]) -> float:
    """Max absolute deviation from the actual distance, rounded to 0.01 cm."""
    if not readings:
        raise ValueError("readings must not be empty")
    return quantize(max(abs(r - actual_cm) for r in readings), 0.01)


@dataclass(frozen=True)
class AccuracyRow:
    actual_cm: float
    environment: str
    readings: tuple[float, ...]  # first sampled batch, for display
    max_abs_dev_cm: float  # deviation_stat of that batch
    mean_max_abs_dev_cm: float  # mean of deviation_stat over all trials


@dataclass(frozen=True)
class AccuracyReport:
    rows: tuple[AccuracyRow, ...]
    mean_max_abs_dev_indoor_cm: float
    mean_max_abs_dev_outdoor_cm: float
    trials: int
    seed: int
    sigma_indoor_cm: float
    sigma_outdoor_cm: float

    def to_json(self) -> dict:
        return {
            "trials": self.trials,
            "seed": self.seed,
            "sigma_indoor_cm": self.sigma_indoor_cm,
            "sigma_outdoor_cm": self.sigma_outdoor_cm,
            "rows": [
                {
                    "actual_cm": r.actual_cm,
                    "environment": r.environment,
                    "readings": list(r.readings),
                    "max_abs_dev_cm": r.max_abs_dev_cm,
                    "mean_max_abs_dev_cm": r.mean_max_abs_dev_cm,
                }
                for r in self.rows
            ],
            "mean_max_abs_dev_indoor_cm": self.mean_max_abs_dev_indoor_cm,
            "mean_max_abs_dev_outdoor_cm": self.mean_max_abs_dev_outdoor_cm,
        }


def run_table2(
    trials: int,
    seed: int,
    sigma_indoor: float = sensor.CALIBRATED_SIGMA_INDOOR,
    sigma_outdoor: float = sensor.CALIBRATED_SIGMA_OUTDOOR,
    distances: tuple[float, ...] = REFERENCE_DISTANCES,
    bias_indoor: float = 0.0,
    bias_outdoor: float = sensor.OUTDOOR_BIAS_CM,
) -> AccuracyReport:
    """Monte Carlo reproduction of the published accuracy table.

    For each (distance, environment) cell, draws ``trials`` batches of three
    readings and averages the per-batch max absolute deviation.  Deterministic
    for a fixed seed.
    """
    if trials < 1:
        raise BenchError("trials must be >= 1")
    if sigma_indoor < 0 or sigma_outdoor < 0:
        raise BenchError("sigma must be >= 0 (zero means noiseless)")
    environments = {
        INDOOR: EnvironmentConfig(
            INDOOR, sensor.DEFAULT_TEMP_INDOOR_C, sigma_indoor, bias_cm=bias_indoor
        ),
        OUTDOOR: EnvironmentConfig(
            OUTDOOR, sensor.DEFAULT_TEMP_OUTDOOR_C, sigma_outdoor, bias_cm=bias_outdoor
        ),
    }
    rows = []
    means = {INDOOR: [], OUTDOOR: []}
    seq = 0
    for env_kind in (INDOOR, OUTDOOR):
        env = environments[env_kind]
        for actual in distances:
            stats = []
            sample: tuple[float, ...] | None = None
            for _ in range(trials):
                batch = []
                for _ in range(READINGS_PER_BATCH):
                    batch.append(sensor.measure(actual, env, seed, seq).distance_cm)
                    seq += 1
                if sample is None:
                    sample = tuple(batch)
                stats.append(deviation_stat(actual, batch))
            mean_stat = sum(stats) / trials
            assert sample is not None
            rows.append(
                AccuracyRow(
                    actual_cm=actual,
                    environment=env_kind,
                    readings=sample,
                    max_abs_dev_cm=deviation_stat(actual, sample),
                    mean_max_abs_dev_cm=mean_stat,
                )
            )
            means[env_kind].append(mean_stat)
    return AccuracyReport(
        rows=tuple(rows),
        mean_max_abs_dev_indoor_cm=sum(means[INDOOR]) / len(means[INDOOR]),
        mean_max_abs_dev_outdoor_cm=sum(means[OUTDOOR]) / len(means[OUTDOOR]),
        trials=trials,
        seed=seed,
        sigma_indoor_cm=sigma_indoor,
        sigma_outdoor_cm=sigma_outdoor,
    )


def render_report(report: AccuracyReport) -> str:
    lines = [
        f"accuracy benchmark: {report.trials} trials/cell, seed {report.seed}, "
        f"sigma indoor {report.sigma_indoor_cm:.4f} cm / outdoor {report.sigma_outdoor_cm:.4f} cm",
        f"{'actual':>7}  {'env':<8} {'sample batch':<21} {'batch dev':>9}  {'mean dev':>9}",
    ]
    for r in report.rows:
        batch = " ".join(f"{v:.2f}" for v in r.readings)
        lines.append(
            f"{r.actual_cm:>6.1f}  {r.environment:<8} {batch:<21} "
            f"{r.max_abs_dev_cm:>8.2f}  {r.mean_max_abs_dev_cm:>9.4f}"
        )
    lines.append(f"mean max-abs deviation indoor:  {report.mean_max_abs_dev_indoor_cm:.4f} cm")
    lines.append(f"mean max-abs deviation outdoor: {report.mean_max_abs_dev_outdoor_cm:.4f} cm")
    return "\n".join(lines)


# -- match driving over the HTTP API ------------------------------------------


class MatchError(BenchError):
    pass


class MatchRuntime:
    """In-process device emulator + scoring service + HTTP API, for demos and tests."""

    def __init__(
        self,
        env: EnvironmentConfig | None = None,
        seed: int = 0,
        log_dir: str | Path | None = None,
        latency_ms: float = 0.0,
    ):
        self.env = env or EnvironmentConfig.noiseless()
        self._tmp = None
        if log_dir is None:
            self._tmp = tempfile.TemporaryDirectory(prefix="boulescope-")
            log_dir = self._tmp.name
        self.device = DeviceEmulator({"warmup": 10.0}, self.env, seed=seed, latency_ms=latency_ms)
        self.device.start()
        self.service = ScoringService(log_dir)
        self.server = make_server(self.service)
        self._thread = threading.Thread(target=self.server.serve_forever, daemon=True)
        self._thread.start()

    @property
    def base_url(self) -> str:
        return self.server.url

    @property
    def device_address(self) -> str:
        return "%s:%d" % self.device.address

    def close(self) -> None:
        self.server.shutdown()
        self.server.server_close()
        self.service.shutdown()
        self.device.stop()
        if self._tmp is not None:
            self._tmp.cleanup()


def _call(method: str, url: str, body: dict | None = None) -> dict:
    data = json.dumps(body).encode() if body is not None else None
    req = urllib.request.Request(url, data=data, method=method)
    if data:
        req.add_header("Content-Type", "application/json")
    try:
        with urllib.request.urlopen(req, timeout=15) as resp:
            return json.loads(resp.read())
    except urllib.error.HTTPError as exc:
        detail = json.loads(exc.read())
        raise MatchError(f"{method} {url} -> {exc.code} {detail}") from None


@dataclass
class MatchTranscript:
    session_id: str
    log_path: str
    rounds: list[dict] = field(default_factory=list)
    winner: str | None = None
    scores: dict = field(default_factory=dict)
    violations: list[str] = field(default_factory=list)

    def lines(self) -> list[str]:
        out = []
        for r in self.rounds:
            if r["winner"] is None:
                out.append(f"round {r['round_no']}: tie, no points")
            else:
                out.append(
                    f"round {r['round_no']}: {r['winner']} scores {r['points']} "
                    f"({self._fmt_scores(r['scores'])})"
                )
        if self.winner:
            out.append(f"match winner: {self.winner} ({self._fmt_scores(self.scores)})")
        for v in self.violations:
            out.append(f"VIOLATION: {v}")
        return out

    @staticmethod
    def _fmt_scores(scores: dict) -> str:
        return " - ".join(f"{p} {s}" for p, s in scores.items())


def scene_for(players: tuple[str, str], boules_per_player: int, rng: random.Random) -> dict:
    return {
        f"{p}-{i}": quantize(rng.uniform(10.0, 390.0))
        for p in players
        for i in range(1, boules_per_player + 1)
    }


def play_match(
    scene: dict[str, float] | None = None,
    random_seed: int | None = None,
    players: tuple[str, str] = ("P1", "P2"),
    boules_per_player: int = 3,
    target_score: int = 13,
    runtime: MatchRuntime | None = None,
    max_rounds: int = 400,
    throw_retries: int = 8,
) -> MatchTranscript:
    """Drive one full game to completion through the HTTP API.

    Feeds the device a fixed scene, or a freshly randomized scene per round
    when ``random_seed`` is given.  Raises MatchError on unrecoverable service
    failures; rule/termination violations are collected on the transcript.
    """
    if (scene is None) == (random_seed is None):
        raise MatchError("exactly one of scene / random_seed is required")
    rng = random.Random(random_seed)
    needed = [f"{p}-{i}" for p in players for i in range(1, boules_per_player + 1)]
    if scene is not None:
        missing = [bid for bid in needed if bid not in scene]
        if missing:
            raise MatchError(f"scene is missing boules: {missing}")

    owns_runtime = runtime is None
    if owns_runtime:
        runtime = MatchRuntime()
    try:
        round_scene = dict(scene) if scene is not None else scene_for(
            players, boules_per_player, rng
        )
        runtime.device.set_scene(round_scene)
        created = _call(
            "POST",
            f"{runtime.base_url}/sessions",
            {
                "players": list(players),
                "boules_per_player": boules_per_player,
                "target_score": target_score,
                "device_address": runtime.device_address,
            },
        )
        sid = created["session_id"]
        session = runtime.service.get_session(sid)
        transcript = MatchTranscript(session_id=sid, log_path=str(session.log_path))

        state = created["state"]
        rounds = 0
        while state["phase"] != "game_complete":
            if rounds >= max_rounds:
                transcript.violations.append(f"no winner after {max_rounds} rounds")
                break
            state = _play_round(runtime, sid, transcript, throw_retries)
            rounds += 1
            if state["phase"] != "game_complete" and random_seed is not None:
                runtime.device.set_scene(scene_for(players, boules_per_player, rng))
        transcript.scores = state["scores"]
        transcript.winner = state["winner"]
        if state["phase"] == "game_complete":
            at_target = [p for p, s in state["scores"].items() if s >= target_score]
            if len(at_target) != 1:
                transcript.violations.append(f"winners at target: {at_target}")
        runtime.service.close_session(sid)
        return transcript
    finally:
        if owns_runtime:
            runtime.close()


def _play_round(runtime: MatchRuntime, sid: str, transcript: MatchTranscript,
                throw_retries: int) -> dict:
    state = _call("GET", f"{runtime.base_url}/sessions/{sid}")
    throws = []
    while state["phase"] == "throwing":
        player = state["next_player"]
        body = None
        for attempt in range(throw_retries):
            try:
                body = _call(
                    "POST", f"{runtime.base_url}/sessions/{sid}/throws", {"player": player}
                )
                break
            except MatchError as exc:
                if "measurement_failed" not in str(exc) or attempt == throw_retries - 1:
                    raise
        assert body is not None
        throws.append(player)
        state = body["state"]
    expected = 2 * state["boules_per_player"]
    if len(throws) != expected:
        transcript.violations.append(f"round recorded {len(throws)} throws, wanted {expected}")
    if any(throws[i] == throws[i + 1] for i in range(len(throws) - 1)):
        transcript.violations.append(f"throw order not alternating: {throws}")

    round_no = state["round_no"]
    scored = _call("POST", f"{runtime.base_url}/sessions/{sid}/score")
    result, state = scored["result"], scored["state"]
    transcript.rounds.append(
        {
            "round_no": round_no,
            "winner": result["winner"],
            "points": result["points"],
            "scores": state["scores"],
        }
    )
    return state


def load_scene(path: str | Path) -> dict[str, float]:
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    if not isinstance(raw, dict) or not raw:
        raise BenchError("scene file must be a non-empty JSON object")
    scene = {}
    for boule_id, cm in raw.items():
        if not isinstance(cm, (int, float)) or isinstance(cm, bool):
            raise BenchError(f"scene value for {boule_id!r} must be a number")
        scene[str(boule_id)] = float(cm)
    return scene
