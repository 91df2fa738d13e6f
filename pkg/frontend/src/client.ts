// WebSocket client with a reconnect loop. Owns the socket and the seq
// counter; pushes every observable change through the reducer callback.
// Seq continuity is kept across reconnects (the server accepts any
// strictly increasing window per connection).

import { Backoff } from "./backoff.js";
import type { Command } from "./protocol.js";
import { parseServerMessage } from "./protocol.js";
import type { ConsoleEvent } from "./state.js";

type Dispatch = (event: ConsoleEvent) => void;

// minimal constructor surface so tests can inject a fake WebSocket
export interface SocketLike {
  onopen: ((ev: unknown) => void) | null;
  onclose: ((ev: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onerror: ((ev: unknown) => void) | null;
  readyState: number;
  send(data: string): void;
  close(): void;
}

export type SocketFactory = (url: string) => SocketLike;

const OPEN = 1;

export class ControlClient {
  private socket: SocketLike | null = null;
  private backoff = new Backoff();
  private retryTimer: ReturnType<typeof setTimeout> | null = null;
  private stopped = false;
  private seq = 1;

  constructor(
    private endpoint: string,
    private dispatch: Dispatch,
    private makeSocket: SocketFactory = (url) =>
      new WebSocket(url) as unknown as SocketLike,
  ) {}

  start(): void {
    this.stopped = false;
    this.connect();
  }

  stop(): void {
    this.stopped = true;
    if (this.retryTimer !== null) clearTimeout(this.retryTimer);
    this.socket?.close();
  }

  get connected(): boolean {
    return this.socket !== null && this.socket.readyState === OPEN;
  }

  nextSeq(): number {
    return this.seq;
  }

  /** Send a pre-shaped command, stamping it with the next seq. */
  send(shape: (seq: number) => Command): Command | null {
    if (!this.connected || this.socket === null) return null;
    const command = shape(this.seq);
    this.seq += 1;
    this.socket.send(JSON.stringify(command));
    this.dispatch({ kind: "command-sent", command });
    return command;
  }

  private connect(): void {
    this.dispatch({ kind: "socket-connecting", endpoint: this.endpoint });
    let socket: SocketLike;
    try {
      socket = this.makeSocket(this.endpoint);
    } catch {
      this.scheduleRetry();
      return;
    }
    this.socket = socket;
    socket.onopen = () => {
      this.backoff.reset();
      this.dispatch({ kind: "socket-open" });
    };
    socket.onmessage = (ev) => {
      const message = parseServerMessage(String(ev.data));
      if (message === null) return;
      const now = Date.now();
      if (message.type === "telemetry") {
        this.dispatch({ kind: "telemetry", frame: message, now });
      } else {
        this.dispatch({ kind: "reply", reply: message, now });
      }
    };
    socket.onerror = () => {
      // onclose follows; nothing to do here
    };
    socket.onclose = () => {
      this.socket = null;
      if (this.stopped) {
        this.dispatch({ kind: "socket-closed", willRetry: false });
        return;
      }
      this.scheduleRetry();
    };
  }

  private scheduleRetry(): void {
    const delayMs = this.backoff.nextDelayMs();
    this.dispatch({ kind: "socket-closed", willRetry: true, delayMs });
    this.retryTimer = setTimeout(() => this.connect(), delayMs);
  }
}

export function endpointFromLocation(search: string): string {
  const params = new URLSearchParams(search);
  const endpoint = params.get("endpoint");
  if (!endpoint) return "ws://127.0.0.1:3090/control";
  if (endpoint.startsWith("ws://") || endpoint.startsWith("wss://")) {
    return endpoint;
  }
  // bare host:port shorthand
  return `ws://${endpoint}/control`;
}
