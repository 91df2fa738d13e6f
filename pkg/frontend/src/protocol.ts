// Wire types for the control protocol (docs/protocol.md, version 1).
// This module is the only place that knows the message shapes; everything
// else works with these types.

export const PROTOCOL_VERSION = 1;
export const DEFAULT_ENDPOINT = "ws://127.0.0.1:3090/control";

export type Verb =
  | "set_speed_override"
  | "set_rpm_override"
  | "set_airbag_disabled"
  | "set_abs_disabled"
  | "clear_overrides"
  | "set_flood"
  | "vehicle_set"
  | "sim_pause"
  | "sim_resume"
  | "set_time_scale";

export interface Command {
  seq: number;
  verb: Verb;
  value?: number | boolean | string | null;
  field?: string;
}

export interface Reply {
  type: "reply";
  seq: number | null;
  ok: boolean;
  error?: { code: string; message: string };
}

export interface TelemetryFrame {
  type: "telemetry";
  protocol_version: number;
  sim_time_us: number;
  paused: boolean;
  time_scale: number;
  vehicle: {
    speed: number;
    rpm: number;
    fuel: number;
    handbrake: boolean;
    ignition: string;
    lights: { side: boolean; low: boolean; main: boolean };
  };
  cluster: {
    speed: number;
    rpm: number;
    fuel: number | null;
    engine_temp: number | null;
    lamps: Record<string, boolean>;
    counter_errors: string[];
    timeouts: string[];
  };
  rogue: {
    present: boolean;
    speed_override: number | null;
    rpm_override: number | null;
    airbag_disabled: boolean;
    abs_disabled: boolean;
    flood: boolean;
    rules: { id: string; action: string; signals: Record<string, unknown> }[];
  };
  utilization: number;
}

export type ServerMessage = Reply | TelemetryFrame;

// client-side mirror of the server's range validation
export const SPEED_RANGE = { min: 0, max: 260 } as const;
export const RPM_RANGE = { min: 0, max: 7000 } as const;

export const LAMP_NAMES = [
  "airbag",
  "abs",
  "brake",
  "battery",
  "seatbelt",
] as const;

export function parseServerMessage(text: string): ServerMessage | null {
  let doc: unknown;
  try {
    doc = JSON.parse(text);
  } catch {
    return null;
  }
  if (typeof doc !== "object" || doc === null) return null;
  const msg = doc as { type?: unknown };
  if (msg.type === "reply") return doc as Reply;
  if (msg.type === "telemetry") {
    const frame = doc as TelemetryFrame;
    if (frame.protocol_version !== PROTOCOL_VERSION) return null;
    return frame;
  }
  return null;
}

// One console control maps to exactly one verb; assembly is centralized
// so tests can pin the full shape of every outgoing command.
export function speedOverrideCommand(seq: number, value: number | null): Command {
  if (value !== null && (value < SPEED_RANGE.min || value > SPEED_RANGE.max)) {
    throw new RangeError(`speed override ${value} outside ${SPEED_RANGE.min}..${SPEED_RANGE.max}`);
  }
  return { seq, verb: "set_speed_override", value };
}

export function rpmOverrideCommand(seq: number, value: number | null): Command {
  if (value !== null && (value < RPM_RANGE.min || value > RPM_RANGE.max)) {
    throw new RangeError(`rpm override ${value} outside ${RPM_RANGE.min}..${RPM_RANGE.max}`);
  }
  return { seq, verb: "set_rpm_override", value };
}

export function airbagDisabledCommand(seq: number, on: boolean): Command {
  return { seq, verb: "set_airbag_disabled", value: on };
}

export function absDisabledCommand(seq: number, on: boolean): Command {
  return { seq, verb: "set_abs_disabled", value: on };
}

export function floodCommand(seq: number, on: boolean): Command {
  return { seq, verb: "set_flood", value: on };
}

export function clearOverridesCommand(seq: number): Command {
  return { seq, verb: "clear_overrides" };
}

export function vehicleSetCommand(
  seq: number,
  field: string,
  value: number | boolean | string,
): Command {
  return { seq, verb: "vehicle_set", field, value };
}

export function pauseCommand(seq: number, paused: boolean): Command {
  return { seq, verb: paused ? "sim_pause" : "sim_resume" };
}

export function timeScaleCommand(seq: number, scale: number): Command {
  if (!(scale > 0)) throw new RangeError("time scale must be positive");
  return { seq, verb: "set_time_scale", value: scale };
}
