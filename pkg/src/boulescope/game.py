"""Petanque round and game state machine.

Two players alternate throws of their boules; at the end of a round the side
holding the closest boule scores one point per boule strictly closer than the
opponent's best.  States are immutable values: every operation returns a new
GameState and never mutates its input.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .sensor import Measurement

THROWING = "throwing"
ROUND_COMPLETE = "round_complete"
GAME_COMPLETE = "game_complete"

BouleId = tuple[str, int]


class GameError(Exception):
    code = "game_error"


class ConfigError(GameError):
    code = "invalid_config"


class OutOfTurnError(GameError):
    code = "out_of_turn"


class PhaseError(GameError):
    code = "phase_error"


class NoMeasurementError(GameError):
    code = "no_measurement"


class IncompleteRoundError(GameError):
    code = "incomplete_round"


def boule_id_str(bid: BouleId) -> str:
    return f"{bid[0]}-{bid[1]}"


def parse_boule_id(text: str) -> BouleId:
    player, _, index = text.rpartition("-")
    if not player or not index.isdigit():
        raise ValueError(f"bad boule id {text!r}")
    return player, int(index)


@dataclass(frozen=True)
class GameConfig:
    players: tuple[str, str] = ("P1", "P2")
    boules_per_player: int = 3
    target_score: int = 13
    turn_mode: str = "alternate"

    def __post_init__(self):
        if len(self.players) != 2 or self.players[0] == self.players[1]:
            raise ConfigError("exactly two distinct player labels required")
        if self.boules_per_player < 1:
            raise ConfigError("boules_per_player must be >= 1")
        if self.target_score < 1:
            raise ConfigError("target_score must be >= 1")
        if self.turn_mode != "alternate":
            raise ConfigError(f"unsupported turn_mode {self.turn_mode!r}")


@dataclass(frozen=True)
class BouleRecord:
    boule_id: BouleId
    distance_cm: float | None = None
    measurement_history: tuple[Measurement, ...] = ()


@dataclass(frozen=True)
class GameState:
    config: GameConfig
    round_no: int
    boules: dict[BouleId, BouleRecord]
    next_player: str
    first_player: str  # first thrower of the current round
    throws_made: int
    phase: str
    cumulative_scores: dict[str, int]

    def other_player(self, player: str) -> str:
        a, b = self.config.players
        return b if player == a else a

    def unthrown(self, player: str) -> list[BouleId]:
        return [
            (player, i)
            for i in range(1, self.config.boules_per_player + 1)
            if self.boules[(player, i)].distance_cm is None
        ]


@dataclass(frozen=True)
class RoundResult:
    winner: str | None
    points: int
    winning_boules: tuple[BouleId, ...]
    loser_best_cm: float | None


def _fresh_boules(config: GameConfig) -> dict[BouleId, BouleRecord]:
    return {
        (player, i): BouleRecord(boule_id=(player, i))
        for player in config.players
        for i in range(1, config.boules_per_player + 1)
    }


def new_game(config: GameConfig) -> GameState:
    return GameState(
        config=config,
        round_no=1,
        boules=_fresh_boules(config),
        next_player=config.players[0],
        first_player=config.players[0],
        throws_made=0,
        phase=THROWING,
        cumulative_scores={p: 0 for p in config.players},
    )


def current_turn(state: GameState) -> str:
    if state.phase != THROWING:
        raise PhaseError(f"no turn in phase {state.phase}")
    return state.next_player


def record_throw(state: GameState, player: str, m: Measurement) -> GameState:
    if state.phase != THROWING:
        raise PhaseError(f"cannot throw in phase {state.phase}")
    if player not in state.config.players:
        raise OutOfTurnError(f"unknown player {player!r}")
    if player != state.next_player:
        raise OutOfTurnError(f"it is {state.next_player}'s turn, not {player}'s")
    pending = state.unthrown(player)
    if not pending:
        raise OutOfTurnError(f"{player} has no boules left this round")

    bid = pending[0]
    boules = dict(state.boules)
    boules[bid] = BouleRecord(bid, m.distance_cm, (m,))

    throws_made = state.throws_made + 1
    other = state.other_player(player)
    if any(boules[b].distance_cm is None for b in _ids_of(state.config, other)):
        next_player = other
    else:
        next_player = player  # opponent exhausted; finish own boules

    phase = state.phase
    if throws_made == 2 * state.config.boules_per_player:
        phase = ROUND_COMPLETE
    return replace(
        state, boules=boules, throws_made=throws_made, next_player=next_player, phase=phase
    )


def remeasure(state: GameState, boule_id: BouleId, m: Measurement) -> GameState:
    if state.phase == GAME_COMPLETE:
        raise PhaseError("game already complete")
    record = state.boules.get(boule_id)
    if record is None:
        raise NoMeasurementError(f"unknown boule {boule_id}")
    if not record.measurement_history:
        raise NoMeasurementError(f"boule {boule_id_str(boule_id)} has not been thrown yet")
    boules = dict(state.boules)
    boules[boule_id] = BouleRecord(
        boule_id, m.distance_cm, record.measurement_history + (m,)
    )
    return replace(state, boules=boules)


def round_score(state: GameState) -> RoundResult:
    if state.phase == THROWING:
        raise IncompleteRoundError(
            f"round {state.round_no} has {state.throws_made} of "
            f"{2 * state.config.boules_per_player} throws"
        )
    if state.phase != ROUND_COMPLETE:
        raise PhaseError(f"cannot score in phase {state.phase}")
    distances: dict[str, list[tuple[BouleId, float]]] = {p: [] for p in state.config.players}
    for bid, record in state.boules.items():
        if record.distance_cm is None:
            raise IncompleteRoundError(f"boule {boule_id_str(bid)} has no distance")
        distances[bid[0]].append((bid, record.distance_cm))

    a, b = state.config.players
    best = {p: min(d for _, d in distances[p]) for p in (a, b)}
    if best[a] == best[b]:
        return RoundResult(winner=None, points=0, winning_boules=(), loser_best_cm=None)
    winner = a if best[a] < best[b] else b
    loser_best = best[state.other_player(winner)]
    winning = tuple(sorted(bid for bid, d in distances[winner] if d < loser_best))
    return RoundResult(
        winner=winner,
        points=len(winning),
        winning_boules=winning,
        loser_best_cm=loser_best,
    )


def apply_round(state: GameState, r: RoundResult) -> GameState:
    if state.phase != ROUND_COMPLETE:
        raise PhaseError(f"cannot apply round result in phase {state.phase}")
    scores = dict(state.cumulative_scores)
    if r.winner is not None:
        scores[r.winner] += r.points
    if any(s >= state.config.target_score for s in scores.values()):
        return replace(state, cumulative_scores=scores, phase=GAME_COMPLETE)
    first = r.winner if r.winner is not None else state.first_player
    return replace(
        state,
        cumulative_scores=scores,
        round_no=state.round_no + 1,
        boules=_fresh_boules(state.config),
        next_player=first,
        first_player=first,
        throws_made=0,
        phase=THROWING,
    )


def game_winner(state: GameState) -> str | None:
    if state.phase != GAME_COMPLETE:
        return None
    return max(state.cumulative_scores, key=state.cumulative_scores.get)


def _ids_of(config: GameConfig, player: str) -> list[BouleId]:
    return [(player, i) for i in range(1, config.boules_per_player + 1)]
