// Ties the API client, the event stream and the pure view model together.
//
// Actions follow optimistic-disable: a control press marks the console busy,
// fires the endpoint, and stays busy until the confirming event comes back
// over the stream (the POST response's event_seq tells us which one it is).
// The view itself is only ever advanced by events.

import { ApiClient, ApiError } from "./api.js";
import {
  applyEvent,
  fromSnapshot,
  scoreEnabled,
  throwEnabled,
  type ConsoleView,
} from "./model.js";
import { EventStreamClient } from "./sse.js";
import type { ConnectionStatus, GameEvent } from "./types.js";

export interface ConsoleState {
  view: ConsoleView | null;
  connection: ConnectionStatus;
  busy: boolean;
  error: string | null; // inline message; state untouched when set
  fatal: string | null; // e.g. session not found
}

export type Listener = (state: ConsoleState) => void;

export class RefereeConsole {
  private view: ConsoleView | null = null;
  private connection: ConnectionStatus = "connecting";
  private busy = false;
  private waitSeq = 0;
  private error: string | null = null;
  private fatal: string | null = null;
  private stream: EventStreamClient | null = null;

  private constructor(
    private readonly api: ApiClient,
    private readonly sessionId: string,
    private readonly listener: Listener,
  ) {}

  static async connect(
    api: ApiClient,
    sessionId: string,
    listener: Listener,
  ): Promise<RefereeConsole> {
    const console_ = new RefereeConsole(api, sessionId, listener);
    try {
      const snap = await api.getState(sessionId);
      console_.view = fromSnapshot(snap);
    } catch (err) {
      console_.fatal = err instanceof ApiError ? err.detail : String(err);
      console_.emit();
      return console_;
    }
    console_.stream = new EventStreamClient({
      baseUrl: api.baseUrl,
      sessionId,
      sinceProvider: () => console_.view?.lastSeq ?? 0,
      onEvent: (ev) => console_.handleEvent(ev),
      onStatus: (status) => {
        console_.connection = status;
        console_.emit();
      },
    });
    console_.stream.start();
    console_.emit();
    return console_;
  }

  close(): void {
    this.stream?.stop();
  }

  /** Test hook: drop the stream and resume from an arbitrary seq. */
  forceStreamReconnect(fromSeq?: number): void {
    this.stream?.forceReconnect(fromSeq);
  }

  state(): ConsoleState {
    return {
      view: this.view,
      connection: this.connection,
      busy: this.busy,
      error: this.error,
      fatal: this.fatal,
    };
  }

  async triggerThrow(player: string): Promise<void> {
    if (!this.view || this.busy || !throwEnabled(this.view)) {
      return;
    }
    await this.run(() => this.api.throwBoule(this.sessionId, player));
  }

  async triggerRemeasure(bouleId: string): Promise<void> {
    if (!this.view || this.busy) {
      return;
    }
    await this.run(() => this.api.remeasure(this.sessionId, bouleId));
  }

  async triggerScore(): Promise<void> {
    if (!this.view || this.busy || !scoreEnabled(this.view)) {
      return;
    }
    await this.run(() => this.api.scoreRound(this.sessionId));
  }

  private async run(
    action: () => Promise<{ state: { event_seq: number } }>,
  ): Promise<void> {
    this.busy = true;
    this.error = null;
    this.emit();
    try {
      const resp = await action();
      this.waitSeq = resp.state.event_seq;
      // stay busy until the confirming event arrives on the stream
      if (this.view && this.view.lastSeq >= this.waitSeq) {
        this.busy = false;
      }
    } catch (err) {
      this.error = err instanceof ApiError ? err.detail : String(err);
      this.busy = false;
    }
    this.emit();
  }

  private handleEvent(ev: GameEvent): void {
    if (!this.view) {
      return;
    }
    const next = applyEvent(this.view, ev);
    const changed = next !== this.view;
    this.view = next;
    if (this.busy && this.view.lastSeq >= this.waitSeq) {
      this.busy = false;
    }
    if (changed || !this.busy) {
      this.emit();
    }
  }

  private emit(): void {
    this.listener(this.state());
  }
}
