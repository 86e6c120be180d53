// Thin client for the documented scoring service endpoints. Nothing else.

import type { Measurement, RoundResult, StateView } from "./types.js";

export class ApiError extends Error {
  constructor(
    public code: string,
    public detail: string,
    public status: number,
  ) {
    super(`${code}: ${detail}`);
  }
}

export interface CreateSessionRequest {
  device_address: string;
  players?: string[];
  boules_per_player?: number;
  target_score?: number;
}

export class ApiClient {
  constructor(public readonly baseUrl: string) {}

  private async call<T>(method: string, path: string, body?: unknown): Promise<T> {
    const resp = await fetch(this.baseUrl + path, {
      method,
      headers: body === undefined ? {} : { "Content-Type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const parsed = (await resp.json()) as any;
    if (!resp.ok) {
      throw new ApiError(
        parsed?.error ?? "unknown_error",
        parsed?.detail ?? resp.statusText,
        resp.status,
      );
    }
    return parsed as T;
  }

  createSession(req: CreateSessionRequest) {
    return this.call<{ session_id: string; state: StateView }>("POST", "/sessions", req);
  }

  getState(sessionId: string) {
    return this.call<StateView>("GET", `/sessions/${sessionId}`);
  }

  throwBoule(sessionId: string, player: string) {
    return this.call<{ measurement: Measurement; state: StateView }>(
      "POST",
      `/sessions/${sessionId}/throws`,
      { player },
    );
  }

  remeasure(sessionId: string, bouleId: string) {
    return this.call<{ measurement: Measurement; state: StateView }>(
      "POST",
      `/sessions/${sessionId}/remeasure`,
      { boule_id: bouleId },
    );
  }

  scoreRound(sessionId: string) {
    return this.call<{ result: RoundResult; state: StateView }>(
      "POST",
      `/sessions/${sessionId}/score`,
    );
  }
}
