/**
 * Server-sent-events client on fetch streams, with automatic reconnect and
 * a heartbeat watchdog. The hub sends `: heartbeat` comments when idle, so
 * a silent connection longer than the timeout means the link is dead even
 * if the socket has not errored.
 */

export interface SseCallbacks {
  onEvent: (data: string) => void;
  onStatus?: (status: "connecting" | "connected" | "degraded") => void;
}

export interface SseOptions {
  retryDelayMs?: number;
  maxRetryDelayMs?: number;
  heartbeatTimeoutMs?: number;
}

/** Split one SSE frame into its data payload (comments yield null). */
export function parseFrame(frame: string): string | null {
  const dataLines: string[] = [];
  for (const line of frame.split("\n")) {
    if (line.startsWith("data:")) {
      dataLines.push(line.slice(5).trimStart());
    }
  }
  return dataLines.length ? dataLines.join("\n") : null;
}

/** Incremental splitter: feed chunks, get complete frames out. */
export class FrameBuffer {
  private buffer = "";

  push(chunk: string): string[] {
    this.buffer += chunk;
    const frames: string[] = [];
    let index;
    while ((index = this.buffer.indexOf("\n\n")) >= 0) {
      frames.push(this.buffer.slice(0, index));
      this.buffer = this.buffer.slice(index + 2);
    }
    return frames;
  }
}

export class EventStream {
  private stopped = false;
  private attempt = 0;
  private controller: AbortController | null = null;
  private watchdog: ReturnType<typeof setTimeout> | null = null;

  constructor(
    private url: string,
    private callbacks: SseCallbacks,
    private options: SseOptions = {},
  ) {}

  start(): void {
    this.stopped = false;
    void this.loop();
  }

  stop(): void {
    this.stopped = true;
    this.controller?.abort();
    this.clearWatchdog();
  }

  private status(s: "connecting" | "connected" | "degraded"): void {
    this.callbacks.onStatus?.(s);
  }

  private clearWatchdog(): void {
    if (this.watchdog !== null) {
      clearTimeout(this.watchdog);
      this.watchdog = null;
    }
  }

  private armWatchdog(): void {
    const timeout = this.options.heartbeatTimeoutMs ?? 30_000;
    this.clearWatchdog();
    this.watchdog = setTimeout(() => this.controller?.abort(), timeout);
  }

  private async loop(): Promise<void> {
    while (!this.stopped) {
      this.status(this.attempt === 0 ? "connecting" : "degraded");
      try {
        this.controller = new AbortController();
        const resp = await fetch(this.url, {
          signal: this.controller.signal,
          headers: { Accept: "text/event-stream" },
        });
        if (!resp.ok || !resp.body) {
          throw new Error(`events stream returned ${resp.status}`);
        }
        this.status("connected");
        this.attempt = 0;
        const reader = resp.body.getReader();
        const decoder = new TextDecoder();
        const frames = new FrameBuffer();
        this.armWatchdog();
        for (;;) {
          const { done, value } = await reader.read();
          if (done) {
            break;
          }
          this.armWatchdog();
          for (const frame of frames.push(decoder.decode(value, { stream: true }))) {
            const data = parseFrame(frame);
            if (data !== null) {
              this.callbacks.onEvent(data);
            }
          }
        }
      } catch {
        /* fall through to retry */
      }
      this.clearWatchdog();
      if (this.stopped) {
        return;
      }
      this.status("degraded");
      this.attempt += 1;
      const base = this.options.retryDelayMs ?? 1000;
      const cap = this.options.maxRetryDelayMs ?? 15_000;
      const delay = Math.min(cap, base * 2 ** Math.min(this.attempt - 1, 4));
      await new Promise((resolve) => setTimeout(resolve, delay));
    }
  }
}
