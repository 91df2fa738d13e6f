import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";

import { BACKOFF_CAP_MS, Backoff } from "../src/backoff.js";
import { ControlClient, endpointFromLocation } from "../src/client.js";
import type { SocketLike } from "../src/client.js";
import { speedOverrideCommand } from "../src/protocol.js";
import type { ConsoleEvent } from "../src/state.js";

class FakeSocket implements SocketLike {
  onopen: ((ev: unknown) => void) | null = null;
  onclose: ((ev: unknown) => void) | null = null;
  onmessage: ((ev: { data: unknown }) => void) | null = null;
  onerror: ((ev: unknown) => void) | null = null;
  readyState = 0;
  sent: string[] = [];

  send(data: string): void {
    this.sent.push(data);
  }

  close(): void {
    this.readyState = 3;
    this.onclose?.({});
  }

  open(): void {
    this.readyState = 1;
    this.onopen?.({});
  }

  drop(): void {
    this.readyState = 3;
    this.onclose?.({});
  }
}

describe("Backoff", () => {
  it("doubles from 500 ms and caps at 8 s", () => {
    const backoff = new Backoff();
    const delays = Array.from({ length: 7 }, () => backoff.nextDelayMs());
    expect(delays).toEqual([500, 1000, 2000, 4000, 8000, 8000, 8000]);
    expect(delays.at(-1)).toBe(BACKOFF_CAP_MS);
  });

  it("resets on success", () => {
    const backoff = new Backoff();
    backoff.nextDelayMs();
    backoff.nextDelayMs();
    backoff.reset();
    expect(backoff.nextDelayMs()).toBe(500);
  });
});

describe("ControlClient", () => {
  let sockets: FakeSocket[];
  let events: ConsoleEvent[];
  let client: ControlClient;

  beforeEach(() => {
    vi.useFakeTimers();
    sockets = [];
    events = [];
    client = new ControlClient(
      "ws://test/control",
      (e) => events.push(e),
      () => {
        const socket = new FakeSocket();
        sockets.push(socket);
        return socket;
      },
    );
  });

  afterEach(() => {
    vi.useRealTimers();
  });

  it("sends commands with increasing seq while connected", () => {
    client.start();
    sockets[0].open();
    client.send((seq) => speedOverrideCommand(seq, 100));
    client.send((seq) => speedOverrideCommand(seq, 200));
    const sent = sockets[0].sent.map((t) => JSON.parse(t));
    expect(sent.map((c) => c.seq)).toEqual([1, 2]);
    expect(sent[1].value).toBe(200);
  });

  it("refuses to send while disconnected", () => {
    client.start();
    expect(client.send((seq) => speedOverrideCommand(seq, 100))).toBeNull();
    expect(sockets[0].sent).toEqual([]);
  });

  it("reconnects with backoff after a drop", () => {
    client.start();
    sockets[0].open();
    sockets[0].drop();
    const closed = events.find((e) => e.kind === "socket-closed");
    expect(closed).toMatchObject({ willRetry: true, delayMs: 500 });
    expect(sockets.length).toBe(1);
    vi.advanceTimersByTime(500);
    expect(sockets.length).toBe(2);
    // second consecutive failure backs off further
    sockets[1].drop();
    vi.advanceTimersByTime(999);
    expect(sockets.length).toBe(2);
    vi.advanceTimersByTime(1);
    expect(sockets.length).toBe(3);
  });

  it("keeps seq continuity across reconnects", () => {
    client.start();
    sockets[0].open();
    client.send((seq) => speedOverrideCommand(seq, 100));
    sockets[0].drop();
    vi.advanceTimersByTime(500);
    sockets[1].open();
    client.send((seq) => speedOverrideCommand(seq, 150));
    expect(JSON.parse(sockets[1].sent[0]).seq).toBe(2);
  });

  it("dispatches telemetry and replies from socket messages", () => {
    client.start();
    sockets[0].open();
    sockets[0].onmessage?.({
      data: '{"type":"reply","seq":1,"ok":true}',
    });
    expect(events.some((e) => e.kind === "reply")).toBe(true);
    sockets[0].onmessage?.({ data: "not even json" });
    expect(events.filter((e) => e.kind === "reply").length).toBe(1);
  });

  it("stops retrying after stop()", () => {
    client.start();
    sockets[0].open();
    client.stop();
    expect(events.at(-1)).toMatchObject({
      kind: "socket-closed",
      willRetry: false,
    });
    vi.advanceTimersByTime(60_000);
    expect(sockets.length).toBe(1);
  });
});

describe("endpointFromLocation", () => {
  it("defaults to the standard port", () => {
    expect(endpointFromLocation("")).toBe("ws://127.0.0.1:3090/control");
  });

  it("accepts a full ws url", () => {
    expect(endpointFromLocation("?endpoint=ws://10.0.0.5:3090/control"))
      .toBe("ws://10.0.0.5:3090/control");
  });

  it("expands host:port shorthand", () => {
    expect(endpointFromLocation("?endpoint=10.0.0.5:4000"))
      .toBe("ws://10.0.0.5:4000/control");
  });
});
