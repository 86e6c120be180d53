// Pure view model: a fold over (snapshot, events).
//
// No game rules live here. Every field shown to the referee is a fact the
// service produced, either in the state snapshot or in an event payload.
// applyEvent is idempotent by sequence number, so at-least-once delivery and
// replay after reconnect cannot diverge the view.

import type { BouleTile, GameEvent, Measurement, Phase, RoundResult, StateView } from "./types.js";

export interface ConsoleView {
  sessionId: string;
  phase: Phase;
  roundNo: number;
  turn: string | null;
  throwsMade: number;
  players: string[];
  boulesPerPlayer: number;
  targetScore: number;
  scores: Record<string, number>;
  winner: string | null;
  tiles: BouleTile[];
  roundBanner: string | null;
  lastSeq: number;
}

export function fromSnapshot(snap: StateView): ConsoleView {
  return {
    sessionId: snap.session_id,
    phase: snap.phase,
    roundNo: snap.round_no,
    turn: snap.next_player,
    throwsMade: snap.throws_made,
    players: [...snap.players],
    boulesPerPlayer: snap.boules_per_player,
    targetScore: snap.target_score,
    scores: { ...snap.scores },
    winner: snap.winner,
    tiles: snap.boules.map((b) => ({ ...b })),
    roundBanner: null,
    lastSeq: snap.event_seq,
  };
}

function emptyTiles(players: string[], boulesPerPlayer: number): BouleTile[] {
  const tiles: BouleTile[] = [];
  for (const player of players) {
    for (let i = 1; i <= boulesPerPlayer; i++) {
      tiles.push({
        boule_id: `${player}-${i}`,
        player,
        index: i,
        distance_cm: null,
        measurements: 0,
      });
    }
  }
  return tiles;
}

function withTile(view: ConsoleView, bouleId: string, distance: number): ConsoleView {
  return {
    ...view,
    tiles: view.tiles.map((t) =>
      t.boule_id === bouleId
        ? { ...t, distance_cm: distance, measurements: t.measurements + 1 }
        : t,
    ),
  };
}

export function applyEvent(view: ConsoleView, ev: GameEvent): ConsoleView {
  if (ev.seq <= view.lastSeq) {
    return view; // duplicate or already folded into the snapshot
  }
  const p = ev.payload as Record<string, any>;
  let next: ConsoleView = { ...view, lastSeq: ev.seq };
  switch (ev.kind) {
    case "session_created": {
      const config = p.config as {
        players: string[];
        boules_per_player: number;
        target_score: number;
      };
      next = {
        ...next,
        sessionId: (p.session_id as string) ?? view.sessionId,
        phase: "throwing",
        roundNo: 1,
        turn: config.players[0],
        throwsMade: 0,
        players: [...config.players],
        boulesPerPlayer: config.boules_per_player,
        targetScore: config.target_score,
        scores: Object.fromEntries(config.players.map((pl) => [pl, 0])),
        winner: null,
        tiles: emptyTiles(config.players, config.boules_per_player),
        roundBanner: null,
      };
      break;
    }
    case "throw_recorded": {
      const m = p.measurement as Measurement;
      next = withTile(next, p.boule_id as string, m.distance_cm);
      next.throwsMade = (p.throws_made as number) ?? next.throwsMade + 1;
      next.phase = (p.phase as Phase) ?? next.phase;
      next.turn = (p.next_player as string | null) ?? null;
      break;
    }
    case "remeasured": {
      const m = p.measurement as Measurement;
      next = withTile(next, p.boule_id as string, m.distance_cm);
      break;
    }
    case "round_scored": {
      const result = p.result as RoundResult;
      const roundNo = p.round_no as number;
      next.roundBanner =
        result.winner === null
          ? `round ${roundNo} tied, no points`
          : `${result.winner} wins round ${roundNo}, ${result.points} point${
              result.points === 1 ? "" : "s"
            }`;
      break;
    }
    case "round_applied": {
      next.scores = { ...(p.scores as Record<string, number>) };
      next.roundNo = p.round_no as number;
      next.phase = p.phase as Phase;
      next.turn = (p.next_player as string | null) ?? null;
      if (next.phase === "throwing") {
        next.tiles = emptyTiles(next.players, next.boulesPerPlayer);
        next.throwsMade = 0;
      }
      break;
    }
    case "game_won": {
      next.winner = p.winner as string;
      next.scores = { ...(p.scores as Record<string, number>) };
      next.phase = "game_complete";
      next.turn = null;
      break;
    }
    default:
      break; // unknown event kinds are ignored, not guessed at
  }
  return next;
}

export function applyEvents(view: ConsoleView, events: GameEvent[]): ConsoleView {
  return events.reduce(applyEvent, view);
}

// Control enablement mirrors the service's phase machine; nothing is decided here.
export function throwEnabled(view: ConsoleView): boolean {
  return view.phase === "throwing";
}

export function scoreEnabled(view: ConsoleView): boolean {
  return view.phase === "round_complete";
}

export function remeasureVisible(tile: BouleTile): boolean {
  return tile.measurements > 0;
}
