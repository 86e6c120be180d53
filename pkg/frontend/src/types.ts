// Wire types of the scoring service HTTP API and event stream.

export type Phase = "throwing" | "round_complete" | "game_complete";

export interface BouleTile {
  boule_id: string;
  player: string;
  index: number;
  distance_cm: number | null;
  measurements: number;
}

export interface StateView {
  session_id: string;
  phase: Phase;
  round_no: number;
  next_player: string | null;
  throws_made: number;
  players: string[];
  boules_per_player: number;
  target_score: number;
  scores: Record<string, number>;
  winner: string | null;
  boules: BouleTile[];
  event_seq: number;
}

export interface Measurement {
  echo_duration_us: number;
  distance_cm: number;
  environment: string;
  sequence_no: number;
  timestamp: number;
}

export interface RoundResult {
  winner: string | null;
  points: number;
  winning_boules: string[];
  loser_best_cm: number | null;
}

export interface GameEvent {
  seq: number;
  at: number;
  kind: string;
  // kind-specific record; the console treats every field as a served fact
  payload: Record<string, unknown>;
}

export type ConnectionStatus = "connecting" | "live" | "reconnecting" | "closed";
