"""Session manager tying device measurements to the game engine.

Every state change appends one event (or the scored/applied pair) to a
per-session LF-delimited JSON log and fans it out to live subscribers.
Mutations on a session are serialized behind a lock; reads take a snapshot
of the immutable state without locking.  A session's final state is always
reconstructible from its log via :func:`replay`.
"""

from __future__ import annotations

import json
import queue
import socket
import threading
import time
import uuid
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

from . import game, protocol
from .game import GameConfig, GameState, RoundResult
from .sensor import Measurement


class ServiceError(Exception):
    code = "service_error"


class NotFoundError(ServiceError):
    code = "not_found"


class DeviceUnavailableError(ServiceError):
    code = "device_unavailable"


class MeasurementFailedError(ServiceError):
    """Retryable: the device could not produce a reading; state unchanged."""

    code = "measurement_failed"


class ReplayError(ServiceError):
    code = "replay_error"

    def __init__(self, line_no: int, reason: str):
        self.line_no = line_no
        self.reason = reason
        super().__init__(f"log line {line_no}: {reason}")


EVENT_KINDS = (
    "session_created",
    "throw_recorded",
    "remeasured",
    "round_scored",
    "round_applied",
    "game_won",
)


@dataclass(frozen=True)
class GameEvent:
    seq: int
    at: float
    kind: str
    payload: dict

    def to_json(self) -> str:
        return json.dumps(
            {"seq": self.seq, "at": self.at, "kind": self.kind, "payload": self.payload},
            separators=(",", ":"),
        )

    @classmethod
    def from_json(cls, line: str) -> GameEvent:
        obj = json.loads(line)
        return cls(obj["seq"], obj["at"], obj["kind"], obj["payload"])


# -- JSON codecs for payload fragments ----------------------------------------


def measurement_to_json(m: Measurement) -> dict:
    return {
        "echo_duration_us": m.echo_duration_us,
        "distance_cm": m.distance_cm,
        "environment": m.environment,
        "sequence_no": m.sequence_no,
        "timestamp": m.timestamp,
    }


def measurement_from_json(obj: dict) -> Measurement:
    return Measurement(
        echo_duration_us=obj["echo_duration_us"],
        distance_cm=obj["distance_cm"],
        environment=obj["environment"],
        sequence_no=obj["sequence_no"],
        timestamp=obj["timestamp"],
    )


def config_to_json(config: GameConfig) -> dict:
    return {
        "players": list(config.players),
        "boules_per_player": config.boules_per_player,
        "target_score": config.target_score,
        "turn_mode": config.turn_mode,
    }


def config_from_json(obj: dict) -> GameConfig:
    return GameConfig(
        players=tuple(obj["players"]),
        boules_per_player=obj["boules_per_player"],
        target_score=obj["target_score"],
        turn_mode=obj.get("turn_mode", "alternate"),
    )


def result_to_json(r: RoundResult) -> dict:
    return {
        "winner": r.winner,
        "points": r.points,
        "winning_boules": [game.boule_id_str(b) for b in r.winning_boules],
        "loser_best_cm": r.loser_best_cm,
    }


def result_from_json(obj: dict) -> RoundResult:
    return RoundResult(
        winner=obj["winner"],
        points=obj["points"],
        winning_boules=tuple(game.parse_boule_id(b) for b in obj["winning_boules"]),
        loser_best_cm=obj["loser_best_cm"],
    )


# -- device link ----------------------------------------------------------------


class DeviceLink:
    """One long-lived connection to a device emulator."""

    def __init__(self, sock: socket.socket, timeout: float):
        sock.settimeout(timeout)
        self._sock = sock
        self._r = sock.makefile("rb")
        self._w = sock.makefile("wb")
        self._request_no = 0
        self.hello: protocol.Hello | None = None

    @classmethod
    def connect(cls, address: tuple[str, int], timeout: float) -> DeviceLink:
        try:
            sock = socket.create_connection(address, timeout=timeout)
        except OSError as exc:
            raise DeviceUnavailableError(f"cannot reach device at {address}: {exc}") from None
        link = cls(sock, timeout)
        try:
            first = link._read_message()
        except MeasurementFailedError as exc:
            link.close()
            raise DeviceUnavailableError(f"no hello from {address}: {exc}") from None
        if not isinstance(first, protocol.Hello):
            link.close()
            raise DeviceUnavailableError(f"device at {address} did not say hello")
        link.hello = first
        return link

    def _read_message(self) -> protocol.ProtocolMessage:
        try:
            raw = self._r.readline()
        except (OSError, socket.timeout) as exc:
            raise MeasurementFailedError(f"device read failed: {exc}") from None
        if not raw:
            raise MeasurementFailedError("device closed the connection")
        try:
            return protocol.decode(raw)
        except protocol.ProtocolError as exc:
            raise MeasurementFailedError(f"bad device frame: {exc}") from None

    def request_measurement(self, boule_id: str) -> protocol.MeasurementReport:
        self._request_no += 1
        request_id = f"q{self._request_no}"
        try:
            self._w.write(protocol.encode(protocol.MeasureRequest(request_id, boule_id)))
            self._w.flush()
        except OSError as exc:
            raise MeasurementFailedError(f"device write failed: {exc}") from None
        reply = self._read_message()
        if isinstance(reply, protocol.DeviceError):
            raise MeasurementFailedError(f"device error {reply.code}: {reply.detail}")
        if not isinstance(reply, protocol.MeasurementReport) or reply.request_id != request_id:
            raise MeasurementFailedError(f"unexpected device reply {reply!r}")
        return reply

    def close(self) -> None:
        for closer in (self._r.close, self._w.close, self._sock.close):
            try:
                closer()
            except OSError:
                pass


class Session:
    def __init__(self, session_id: str, state: GameState, device_address: tuple[str, int],
                 link: DeviceLink, log_path: Path):
        self.session_id = session_id
        self.state = state
        self.device_address = device_address
        self.link = link
        self.log_path = log_path
        self.event_seq = 0
        self.measure_count = 0
        self.lock = threading.Lock()
        self.events: list[GameEvent] = []
        self.subscribers: list[queue.SimpleQueue] = []
        self.log_file = open(log_path, "x", encoding="utf-8")
        self.closed = False


class ScoringService:
    def __init__(self, log_dir: str | Path, measure_timeout: float = 5.0, clock=time.time):
        self.log_dir = Path(log_dir)
        self.log_dir.mkdir(parents=True, exist_ok=True)
        self.measure_timeout = measure_timeout
        self.clock = clock
        self._sessions: dict[str, Session] = {}
        self._registry_lock = threading.Lock()

    # -- lifecycle ---------------------------------------------------------------

    def create_session(self, config: GameConfig, device_address: tuple[str, int]) -> Session:
        link = DeviceLink.connect(device_address, self.measure_timeout)
        session_id = uuid.uuid4().hex[:12]
        state = game.new_game(config)
        session = Session(
            session_id, state, device_address, link, self.log_dir / f"{session_id}.jsonl"
        )
        with self._registry_lock:
            self._sessions[session_id] = session
        with session.lock:
            self._commit(
                session,
                state,
                [
                    (
                        "session_created",
                        {
                            "session_id": session_id,
                            "config": config_to_json(config),
                            "device": f"{device_address[0]}:{device_address[1]}",
                        },
                    )
                ],
            )
        return session

    def close_session(self, session_id: str) -> None:
        session = self._get(session_id)
        with session.lock:
            if session.closed:
                return
            session.closed = True
            session.link.close()
            session.log_file.close()
            for q in session.subscribers:
                q.put(None)

    def shutdown(self) -> None:
        with self._registry_lock:
            ids = list(self._sessions)
        for sid in ids:
            self.close_session(sid)

    def _get(self, session_id: str) -> Session:
        with self._registry_lock:
            session = self._sessions.get(session_id)
        if session is None:
            raise NotFoundError(f"no session {session_id!r}")
        return session

    # -- event plumbing -----------------------------------------------------------

    def _commit(self, session: Session, new_state: GameState,
                entries: list[tuple[str, dict]]) -> list[GameEvent]:
        """Append events and swap in the new state atomically (lock held)."""
        events = []
        seq = session.event_seq
        for kind, payload in entries:
            seq += 1
            events.append(GameEvent(seq=seq, at=self.clock(), kind=kind, payload=payload))
        for event in events:
            session.log_file.write(event.to_json() + "\n")
        session.log_file.flush()
        session.state = new_state
        session.event_seq = seq
        session.events.extend(events)
        for q in session.subscribers:
            for event in events:
                q.put(event)
        return events

    def subscribe(self, session_id: str, since: int = 0):
        """Backlog snapshot plus a live queue; every event delivered at least once."""
        session = self._get(session_id)
        with session.lock:
            backlog = [e for e in session.events if e.seq > since]
            q: queue.SimpleQueue = queue.SimpleQueue()
            if session.closed:
                q.put(None)
            else:
                session.subscribers.append(q)
        return backlog, q

    def unsubscribe(self, session_id: str, q) -> None:
        try:
            session = self._get(session_id)
        except NotFoundError:
            return
        with session.lock:
            if q in session.subscribers:
                session.subscribers.remove(q)

    # -- game operations -----------------------------------------------------------

    def _measure(self, session: Session, boule_id: game.BouleId) -> Measurement:
        report = session.link.request_measurement(game.boule_id_str(boule_id))
        session.measure_count += 1
        return Measurement(
            echo_duration_us=report.echo_duration_us,
            distance_cm=report.distance_cm,
            environment=report.environment,
            sequence_no=session.measure_count,
            timestamp=self.clock(),
        )

    def throw(self, session_id: str, player: str) -> tuple[Measurement, GameState]:
        session = self._get(session_id)
        with session.lock:
            state = session.state
            # engine preconditions first: no device traffic for an illegal throw
            if game.current_turn(state) != player:
                raise game.OutOfTurnError(f"it is {state.next_player}'s turn, not {player}'s")
            pending = state.unthrown(player)
            if not pending:
                raise game.OutOfTurnError(f"{player} has no boules left this round")
            m = self._measure(session, pending[0])
            new_state = game.record_throw(state, player, m)
            self._commit(
                session,
                new_state,
                [
                    (
                        "throw_recorded",
                        {
                            "player": player,
                            "boule_id": game.boule_id_str(pending[0]),
                            "measurement": measurement_to_json(m),
                            # post-transition facts so consoles never re-derive rules
                            "next_player": new_state.next_player
                            if new_state.phase == game.THROWING
                            else None,
                            "throws_made": new_state.throws_made,
                            "phase": new_state.phase,
                        },
                    )
                ],
            )
            return m, new_state

    def remeasure(self, session_id: str, boule_id: str) -> tuple[Measurement, GameState]:
        session = self._get(session_id)
        bid = game.parse_boule_id(boule_id)
        with session.lock:
            state = session.state
            # engine preconditions first: no device traffic for an illegal call
            if state.phase == game.GAME_COMPLETE:
                raise game.PhaseError("game already complete")
            record = state.boules.get(bid)
            if record is None or not record.measurement_history:
                raise game.NoMeasurementError(f"boule {boule_id} has not been thrown yet")
            m = self._measure(session, bid)
            new_state = game.remeasure(state, bid, m)
            self._commit(
                session,
                new_state,
                [
                    (
                        "remeasured",
                        {"boule_id": boule_id, "measurement": measurement_to_json(m)},
                    )
                ],
            )
            return m, new_state

    def score_round(self, session_id: str) -> RoundResult:
        session = self._get(session_id)
        with session.lock:
            state = session.state
            result = game.round_score(state)
            new_state = game.apply_round(state, result)
            entries = [
                (
                    "round_scored",
                    {"round_no": state.round_no, "result": result_to_json(result)},
                ),
                (
                    "round_applied",
                    {
                        "scores": dict(new_state.cumulative_scores),
                        "round_no": new_state.round_no,
                        "phase": new_state.phase,
                        "next_player": new_state.next_player
                        if new_state.phase == game.THROWING
                        else None,
                    },
                ),
            ]
            if new_state.phase == game.GAME_COMPLETE:
                entries.append(
                    (
                        "game_won",
                        {
                            "winner": game.game_winner(new_state),
                            "scores": dict(new_state.cumulative_scores),
                        },
                    )
                )
            self._commit(session, new_state, entries)
            return result

    def get_state(self, session_id: str) -> GameState:
        return self._get(session_id).state

    def get_session(self, session_id: str) -> Session:
        return self._get(session_id)


# -- replay --------------------------------------------------------------------


def read_events(log_path: str | Path) -> Iterator[tuple[int, GameEvent]]:
    with open(log_path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                yield line_no, GameEvent.from_json(line)
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise ReplayError(line_no, f"unreadable event: {exc}") from None


def replay(log_path: str | Path) -> GameState:
    """Fold a session log through the engine, reproducing the final state."""
    state: GameState | None = None
    pending_result: RoundResult | None = None
    expected_seq = 1
    for line_no, event in read_events(log_path):
        if event.seq != expected_seq:
            raise ReplayError(line_no, f"expected seq {expected_seq}, found {event.seq}")
        expected_seq += 1
        try:
            if event.kind == "session_created":
                if state is not None:
                    raise ReplayError(line_no, "duplicate session_created")
                state = game.new_game(config_from_json(event.payload["config"]))
                continue
            if state is None:
                raise ReplayError(line_no, f"{event.kind} before session_created")
            if event.kind == "throw_recorded":
                m = measurement_from_json(event.payload["measurement"])
                state = game.record_throw(state, event.payload["player"], m)
            elif event.kind == "remeasured":
                m = measurement_from_json(event.payload["measurement"])
                state = game.remeasure(state, game.parse_boule_id(event.payload["boule_id"]), m)
            elif event.kind == "round_scored":
                pending_result = result_from_json(event.payload["result"])
                live = game.round_score(state)
                if live != pending_result:
                    raise ReplayError(line_no, "logged round result disagrees with engine")
            elif event.kind == "round_applied":
                if pending_result is None:
                    raise ReplayError(line_no, "round_applied without round_scored")
                state = game.apply_round(state, pending_result)
                pending_result = None
            elif event.kind == "game_won":
                if state.phase != game.GAME_COMPLETE:
                    raise ReplayError(line_no, "game_won while game still open")
            else:
                raise ReplayError(line_no, f"unknown event kind {event.kind!r}")
        except game.GameError as exc:
            raise ReplayError(line_no, f"illegal transition: {exc}") from None
    if state is None:
        raise ReplayError(0, "log is empty (missing session_created)")
    return state
