import { describe, expect, it } from "vitest";

import type { TelemetryFrame } from "../src/protocol.js";
import {
  STALE_AFTER_MS,
  initialState,
  reduce,
  verbInFlight,
} from "../src/state.js";

function frame(overrides: Partial<{
  truthSpeed: number;
  shownSpeed: number;
  lamps: Record<string, boolean>;
}> = {}): TelemetryFrame {
  const lamps = overrides.lamps ?? {
    airbag: false, abs: false, brake: false, battery: false, seatbelt: false,
  };
  return {
    type: "telemetry",
    protocol_version: 1,
    sim_time_us: 1_000_000,
    paused: false,
    time_scale: 1,
    vehicle: {
      speed: overrides.truthSpeed ?? 60, rpm: 2000, fuel: 40,
      handbrake: false, ignition: "running",
      lights: { side: false, low: false, main: false },
    },
    cluster: {
      speed: overrides.shownSpeed ?? 60, rpm: 2000, fuel: 40,
      engine_temp: 20, lamps, counter_errors: [], timeouts: [],
    },
    rogue: {
      present: true, speed_override: null, rpm_override: null,
      airbag_disabled: false, abs_disabled: false, flood: false, rules: [],
    },
    utilization: 0.2,
  };
}

describe("reducer", () => {
  it("stores telemetry and clears staleness", () => {
    let state = initialState("ws://x/control");
    state = reduce(state, { kind: "telemetry", frame: frame(), now: 1000 });
    expect(state.telemetry?.cluster.speed).toBe(60);
    expect(state.lastTelemetryAt).toBe(1000);
    expect(state.stale).toBe(false);
  });

  it("marks stale after the threshold with no telemetry", () => {
    let state = initialState("ws://x/control");
    state = reduce(state, { kind: "telemetry", frame: frame(), now: 1000 });
    state = reduce(state, { kind: "tick", now: 1000 + STALE_AFTER_MS });
    expect(state.stale).toBe(false); // exactly at the limit: still fresh
    state = reduce(state, { kind: "tick", now: 1001 + STALE_AFTER_MS });
    expect(state.stale).toBe(true);
    state = reduce(state, { kind: "telemetry", frame: frame(), now: 9000 });
    expect(state.stale).toBe(false);
  });

  it("tracks pending commands until their reply", () => {
    let state = initialState("ws://x/control");
    const command = { seq: 1, verb: "set_abs_disabled" as const, value: true };
    state = reduce(state, { kind: "command-sent", command });
    expect(verbInFlight(state, "set_abs_disabled")).toBe(true);
    state = reduce(state, {
      kind: "reply",
      reply: { type: "reply", seq: 1, ok: true },
      now: 500,
    });
    expect(verbInFlight(state, "set_abs_disabled")).toBe(false);
    expect(state.log.at(-1)?.kind).toBe("ack");
    expect(state.log.at(-1)?.text).toContain("set_abs_disabled");
  });

  it("logs rejected commands with the error code", () => {
    let state = initialState("ws://x/control");
    state = reduce(state, {
      kind: "command-sent",
      command: { seq: 2, verb: "set_speed_override", value: 260 },
    });
    state = reduce(state, {
      kind: "reply",
      reply: {
        type: "reply", seq: 2, ok: false,
        error: { code: "no_rogue", message: "no device" },
      },
      now: 600,
    });
    expect(state.log.at(-1)?.kind).toBe("error");
    expect(state.log.at(-1)?.text).toContain("no_rogue");
    expect(state.pending.size).toBe(0);
  });

  it("advances nextSeq past every sent command", () => {
    let state = initialState("ws://x/control");
    state = reduce(state, {
      kind: "command-sent",
      command: { seq: 5, verb: "sim_pause" },
    });
    expect(state.nextSeq).toBe(6);
  });

  it("logs lamp transitions between telemetry frames", () => {
    let state = initialState("ws://x/control");
    state = reduce(state, { kind: "telemetry", frame: frame(), now: 1000 });
    state = reduce(state, {
      kind: "telemetry",
      frame: frame({
        lamps: { airbag: true, abs: true, brake: false, battery: false, seatbelt: false },
      }),
      now: 1100,
    });
    const lampLines = state.log.filter((e) => e.kind === "lamp");
    expect(lampLines.map((e) => e.text).sort()).toEqual([
      "abs lamp on",
      "airbag lamp on",
    ]);
  });

  it("clears pending commands when the socket drops", () => {
    let state = initialState("ws://x/control");
    state = reduce(state, {
      kind: "command-sent",
      command: { seq: 1, verb: "set_flood", value: true },
    });
    state = reduce(state, {
      kind: "socket-closed", willRetry: true, delayMs: 500,
    });
    expect(state.pending.size).toBe(0);
    expect(state.status).toBe("reconnecting");
  });

  it("distinguishes first connect from reconnect", () => {
    let state = initialState("ws://x/control");
    state = reduce(state, { kind: "socket-connecting", endpoint: "ws://x/control" });
    expect(state.status).toBe("connecting");
    state = reduce(state, { kind: "socket-open" });
    state = reduce(state, { kind: "telemetry", frame: frame(), now: 1 });
    state = reduce(state, { kind: "socket-closed", willRetry: true, delayMs: 500 });
    state = reduce(state, { kind: "socket-connecting", endpoint: "ws://x/control" });
    expect(state.status).toBe("reconnecting");
  });

  it("never fabricates gauge values: telemetry is kept verbatim", () => {
    let state = initialState("ws://x/control");
    const diverged = frame({ truthSpeed: 60, shownSpeed: 260 });
    state = reduce(state, { kind: "telemetry", frame: diverged, now: 1 });
    state = reduce(state, { kind: "socket-closed", willRetry: true, delayMs: 500 });
    state = reduce(state, { kind: "tick", now: 5000 });
    // frozen at the last server-sent values, flagged stale
    expect(state.telemetry).toBe(diverged);
    expect(state.stale).toBe(true);
  });

  it("caps the event log", () => {
    let state = initialState("ws://x/control");
    for (let i = 0; i < 300; i += 1) {
      state = reduce(state, {
        kind: "reply",
        reply: { type: "reply", seq: null, ok: true },
        now: i,
      });
    }
    expect(state.log.length).toBeLessThanOrEqual(200);
  });
});
