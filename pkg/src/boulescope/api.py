"""HTTP/1.1 JSON API over the scoring service, plus the live event stream.

Endpoints:
    POST /sessions                    create a session (body: config + device_address)
    GET  /sessions/{id}               state view snapshot
    POST /sessions/{id}/throws        {"player": label}
    POST /sessions/{id}/remeasure     {"boule_id": "P1-1"}
    POST /sessions/{id}/score         score + apply the completed round
    GET  /sessions/{id}/events        server-sent event stream of GameEvents

Errors are {"error": code, "detail": text} with a matching status code.
"""

from __future__ import annotations

import json
import queue
import re
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from . import game, service
from .game import GameConfig, GameState, RoundResult
from .sensor import Measurement
from .service import ScoringService

STATUS_BY_CODE = {
    "not_found": 404,
    "invalid_config": 400,
    "malformed": 400,
    "out_of_turn": 409,
    "phase_error": 409,
    "no_measurement": 409,
    "incomplete_round": 409,
    "measurement_failed": 502,
    "device_unavailable": 503,
}

_SESSION = re.compile(r"^/sessions/([0-9a-f]{1,32})$")
_ACTION = re.compile(r"^/sessions/([0-9a-f]{1,32})/(throws|remeasure|score|events)$")

HEARTBEAT_SECONDS = 15.0


class BadRequest(Exception):
    pass


def measurement_view(m: Measurement, boule_id: str | None = None) -> dict:
    view = service.measurement_to_json(m)
    if boule_id is not None:
        view["boule_id"] = boule_id
    return view


def state_view(session_id: str, state: GameState, event_seq: int) -> dict:
    cfg = state.config
    boules = []
    for player in cfg.players:
        for i in range(1, cfg.boules_per_player + 1):
            record = state.boules[(player, i)]
            boules.append(
                {
                    "boule_id": game.boule_id_str((player, i)),
                    "player": player,
                    "index": i,
                    "distance_cm": record.distance_cm,
                    "measurements": len(record.measurement_history),
                }
            )
    return {
        "session_id": session_id,
        "phase": state.phase,
        "round_no": state.round_no,
        "next_player": state.next_player if state.phase == game.THROWING else None,
        "throws_made": state.throws_made,
        "players": list(cfg.players),
        "boules_per_player": cfg.boules_per_player,
        "target_score": cfg.target_score,
        "scores": dict(state.cumulative_scores),
        "winner": game.game_winner(state),
        "boules": boules,
        "event_seq": event_seq,
    }


def result_view(r: RoundResult) -> dict:
    return service.result_to_json(r)


def parse_address(text: str) -> tuple[str, int]:
    host, _, port = text.rpartition(":")
    if not host or not port.isdigit():
        raise BadRequest(f"bad device_address {text!r}, expected host:port")
    return host, int(port)


def config_from_body(body: dict) -> GameConfig:
    players = body.get("players", ["P1", "P2"])
    if not isinstance(players, list) or not all(isinstance(p, str) for p in players):
        raise BadRequest("players must be a list of labels")
    try:
        return GameConfig(
            players=tuple(players),
            boules_per_player=int(body.get("boules_per_player", 3)),
            target_score=int(body.get("target_score", 13)),
        )
    except (TypeError, ValueError) as exc:
        raise BadRequest(f"bad config: {exc}") from None


class ApiHandler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    server_version = "boulescope"

    @property
    def svc(self) -> ScoringService:
        return self.server.scoring_service  # type: ignore[attr-defined]

    def log_message(self, fmt, *args):  # quiet by default
        if getattr(self.server, "verbose", False):
            super().log_message(fmt, *args)

    # -- plumbing -------------------------------------------------------------

    def _send_json(self, status: int, payload: dict) -> None:
        body = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json; charset=utf-8")
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        self.wfile.write(body)

    def _send_error_json(self, code: str, detail: str) -> None:
        self._send_json(STATUS_BY_CODE.get(code, 500), {"error": code, "detail": detail})

    def _read_body(self) -> dict:
        length = int(self.headers.get("Content-Length") or 0)
        if length == 0:
            return {}
        raw = self.rfile.read(length)
        try:
            body = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise BadRequest(f"body is not JSON: {exc}") from None
        if not isinstance(body, dict):
            raise BadRequest("body must be a JSON object")
        return body

    def _dispatch(self, handler, *args) -> None:
        try:
            handler(*args)
        except BadRequest as exc:
            self._send_error_json("malformed", str(exc))
        except (game.GameError, service.ServiceError) as exc:
            self._send_error_json(exc.code, str(exc))
        except BrokenPipeError:
            pass

    # -- verbs ---------------------------------------------------------------

    def do_OPTIONS(self):
        self.send_response(204)
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
        self.send_header("Access-Control-Allow-Headers", "Content-Type, Last-Event-ID")
        self.send_header("Content-Length", "0")
        self.end_headers()

    def do_GET(self):
        path, _, query = self.path.partition("?")
        m = _SESSION.match(path)
        if m:
            return self._dispatch(self._get_state, m.group(1))
        m = _ACTION.match(path)
        if m and m.group(2) == "events":
            return self._dispatch(self._stream_events, m.group(1), query)
        self._send_error_json("not_found", f"no route for GET {path}")

    def do_POST(self):
        path = self.path.partition("?")[0]
        if path == "/sessions":
            return self._dispatch(self._create_session)
        m = _ACTION.match(path)
        if m:
            session_id, action = m.groups()
            if action == "throws":
                return self._dispatch(self._throw, session_id)
            if action == "remeasure":
                return self._dispatch(self._remeasure, session_id)
            if action == "score":
                return self._dispatch(self._score, session_id)
        self._send_error_json("not_found", f"no route for POST {path}")

    # -- handlers -------------------------------------------------------------

    def _create_session(self):
        body = self._read_body()
        address = body.get("device_address")
        if not isinstance(address, str):
            raise BadRequest("device_address is required (host:port)")
        config = config_from_body(body)
        session = self.svc.create_session(config, parse_address(address))
        self._send_json(
            201,
            {
                "session_id": session.session_id,
                "state": state_view(session.session_id, session.state, session.event_seq),
            },
        )

    def _get_state(self, session_id: str):
        session = self.svc.get_session(session_id)
        self._send_json(200, state_view(session_id, session.state, session.event_seq))

    def _throw(self, session_id: str):
        body = self._read_body()
        player = body.get("player")
        if not isinstance(player, str):
            raise BadRequest("player is required")
        m, state = self.svc.throw(session_id, player)
        session = self.svc.get_session(session_id)
        self._send_json(
            200,
            {
                "measurement": measurement_view(m),
                "state": state_view(session_id, state, session.event_seq),
            },
        )

    def _remeasure(self, session_id: str):
        body = self._read_body()
        boule_id = body.get("boule_id")
        if not isinstance(boule_id, str):
            raise BadRequest("boule_id is required")
        try:
            game.parse_boule_id(boule_id)
        except ValueError as exc:
            raise BadRequest(str(exc)) from None
        m, state = self.svc.remeasure(session_id, boule_id)
        session = self.svc.get_session(session_id)
        self._send_json(
            200,
            {
                "measurement": measurement_view(m, boule_id),
                "state": state_view(session_id, state, session.event_seq),
            },
        )

    def _score(self, session_id: str):
        result = self.svc.score_round(session_id)
        session = self.svc.get_session(session_id)
        self._send_json(
            200,
            {
                "result": result_view(result),
                "state": state_view(session_id, session.state, session.event_seq),
            },
        )

    def _stream_events(self, session_id: str, query: str):
        since = 0
        last_event_id = self.headers.get("Last-Event-ID")
        if last_event_id and last_event_id.isdigit():
            since = int(last_event_id)
        for part in query.split("&"):
            if part.startswith("since=") and part[6:].isdigit():
                since = int(part[6:])
        backlog, live = self.svc.subscribe(session_id, since=since)

        self.send_response(200)
        self.send_header("Content-Type", "text/event-stream")
        self.send_header("Cache-Control", "no-cache")
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Connection", "close")
        self.end_headers()
        try:
            last_sent = since
            for event in backlog:
                self._write_event(event)
                last_sent = event.seq
            while True:
                try:
                    event = live.get(timeout=HEARTBEAT_SECONDS)
                except queue.Empty:
                    self.wfile.write(b": keep-alive\n\n")
                    self.wfile.flush()
                    continue
                if event is None:
                    break  # session closed
                if event.seq <= last_sent:
                    continue
                self._write_event(event)
                last_sent = event.seq
        except (BrokenPipeError, ConnectionResetError):
            pass
        finally:
            self.svc.unsubscribe(session_id, live)
            self.close_connection = True

    def _write_event(self, event) -> None:
        self.wfile.write(f"id: {event.seq}\ndata: {event.to_json()}\n\n".encode("utf-8"))
        self.wfile.flush()


class ApiServer(ThreadingHTTPServer):
    daemon_threads = True
    allow_reuse_address = True

    def __init__(self, address: tuple[str, int], scoring_service: ScoringService,
                 verbose: bool = False):
        super().__init__(address, ApiHandler)
        self.scoring_service = scoring_service
        self.verbose = verbose

    @property
    def url(self) -> str:
        host, port = self.server_address[:2]
        return f"http://{host}:{port}"


def make_server(service_: ScoringService, host: str = "127.0.0.1", port: int = 0,
                verbose: bool = False) -> ApiServer:
    return ApiServer((host, port), service_, verbose=verbose)
