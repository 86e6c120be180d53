// Server-sent-events reader over fetch streams.
//
// Hand-rolled instead of window.EventSource so the exact same client runs in
// the browser and in the node test harness, and so reconnects can resume
// from the last applied sequence number (the server accepts ?since=).

import type { ConnectionStatus, GameEvent } from "./types.js";

export interface EventStreamOptions {
  baseUrl: string;
  sessionId: string;
  /** Seq to resume from on every (re)connect; normally the last applied seq. */
  sinceProvider: () => number;
  onEvent: (ev: GameEvent) => void;
  onStatus?: (status: ConnectionStatus) => void;
  retryMs?: number;
}

export class EventStreamClient {
  private stopped = false;
  private abort: AbortController | null = null;
  private overrideSince: number | null = null;

  constructor(private readonly opts: EventStreamOptions) {}

  start(): void {
    this.stopped = false;
    void this.loop();
  }

  stop(): void {
    this.stopped = true;
    this.abort?.abort();
    this.opts.onStatus?.("closed");
  }

  /** Drop the connection and reconnect; `fromSeq` forces duplicate delivery. */
  forceReconnect(fromSeq?: number): void {
    if (fromSeq !== undefined) {
      this.overrideSince = fromSeq;
    }
    this.abort?.abort();
  }

  private async loop(): Promise<void> {
    const retryMs = this.opts.retryMs ?? 1000;
    let first = true;
    while (!this.stopped) {
      this.opts.onStatus?.(first ? "connecting" : "reconnecting");
      first = false;
      const since = this.overrideSince ?? this.opts.sinceProvider();
      this.overrideSince = null;
      this.abort = new AbortController();
      try {
        const resp = await fetch(
          `${this.opts.baseUrl}/sessions/${this.opts.sessionId}/events?since=${since}`,
          { signal: this.abort.signal, headers: { Accept: "text/event-stream" } },
        );
        if (!resp.ok || !resp.body) {
          throw new Error(`event stream HTTP ${resp.status}`);
        }
        this.opts.onStatus?.("live");
        await this.consume(resp.body);
      } catch {
        // aborted or dropped; fall through to retry
      }
      if (!this.stopped) {
        await delay(retryMs);
      }
    }
  }

  private async consume(body: ReadableStream<Uint8Array>): Promise<void> {
    const reader = body.getReader();
    const decoder = new TextDecoder();
    let buffer = "";
    for (;;) {
      const { done, value } = await reader.read();
      if (done) {
        return;
      }
      buffer += decoder.decode(value, { stream: true });
      let sep: number;
      while ((sep = buffer.indexOf("\n\n")) >= 0) {
        const block = buffer.slice(0, sep);
        buffer = buffer.slice(sep + 2);
        this.handleBlock(block);
      }
    }
  }

  private handleBlock(block: string): void {
    const datas = block
      .split("\n")
      .filter((line) => line.startsWith("data:"))
      .map((line) => line.slice(5).trimStart());
    if (datas.length === 0) {
      return; // comment / keep-alive
    }
    try {
      this.opts.onEvent(JSON.parse(datas.join("\n")) as GameEvent);
    } catch {
      // unparseable frame: skip rather than corrupt the view
    }
  }
}

function delay(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}
