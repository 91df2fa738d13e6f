// Console state machine: a reducer over socket and timer events.
// The view renders exclusively from this state; nothing in the UI echoes a
// command locally, so displayed values are always the server's.

import type { Command, Reply, TelemetryFrame } from "./protocol.js";

export const STALE_AFTER_MS = 1000;
export const EVENT_LOG_LIMIT = 200;

export type ConnectionStatus =
  | "connecting"
  | "connected"
  | "reconnecting"
  | "closed";

export interface LogEntry {
  at: number; // wall-clock ms
  kind: "ack" | "error" | "lamp" | "status";
  text: string;
}

export interface ConsoleViewState {
  status: ConnectionStatus;
  endpoint: string;
  telemetry: TelemetryFrame | null;
  lastTelemetryAt: number | null; // wall-clock ms
  stale: boolean;
  nextSeq: number;
  // seq -> verb of commands awaiting a reply; controls stay disabled
  // while their verb is in flight
  pending: Map<number, Command>;
  log: LogEntry[];
}

export type ConsoleEvent =
  | { kind: "socket-connecting"; endpoint: string }
  | { kind: "socket-open" }
  | { kind: "socket-closed"; willRetry: boolean; delayMs?: number }
  | { kind: "telemetry"; frame: TelemetryFrame; now: number }
  | { kind: "reply"; reply: Reply; now: number }
  | { kind: "command-sent"; command: Command }
  | { kind: "tick"; now: number };

export function initialState(endpoint: string): ConsoleViewState {
  return {
    status: "connecting",
    endpoint,
    telemetry: null,
    lastTelemetryAt: null,
    stale: false,
    nextSeq: 1,
    pending: new Map(),
    log: [],
  };
}

function pushLog(state: ConsoleViewState, entry: LogEntry): LogEntry[] {
  const log = [...state.log, entry];
  return log.length > EVENT_LOG_LIMIT ? log.slice(-EVENT_LOG_LIMIT) : log;
}

function lampTransitions(
  prev: TelemetryFrame | null,
  next: TelemetryFrame,
  now: number,
): LogEntry[] {
  if (prev === null) return [];
  const entries: LogEntry[] = [];
  for (const [name, on] of Object.entries(next.cluster.lamps)) {
    if (prev.cluster.lamps[name] !== on) {
      entries.push({
        at: now,
        kind: "lamp",
        text: `${name} lamp ${on ? "on" : "off"}`,
      });
    }
  }
  return entries;
}

export function reduce(
  state: ConsoleViewState,
  event: ConsoleEvent,
): ConsoleViewState {
  switch (event.kind) {
    case "socket-connecting":
      return {
        ...state,
        status: state.telemetry ? "reconnecting" : "connecting",
        endpoint: event.endpoint,
      };
    case "socket-open":
      return {
        ...state,
        status: "connected",
        log: pushLog(state, {
          at: Date.now(),
          kind: "status",
          text: `connected to ${state.endpoint}`,
        }),
      };
    case "socket-closed": {
      // in-flight commands will never be answered on this socket
      const note = event.willRetry
        ? `connection lost, retrying in ${((event.delayMs ?? 0) / 1000).toFixed(1)} s`
        : "connection closed";
      return {
        ...state,
        status: event.willRetry ? "reconnecting" : "closed",
        pending: new Map(),
        log: pushLog(state, { at: Date.now(), kind: "status", text: note }),
      };
    }
    case "telemetry": {
      let log = state.log;
      for (const entry of lampTransitions(state.telemetry, event.frame, event.now)) {
        log = [...log, entry];
      }
      if (log.length > EVENT_LOG_LIMIT) log = log.slice(-EVENT_LOG_LIMIT);
      return {
        ...state,
        telemetry: event.frame,
        lastTelemetryAt: event.now,
        stale: false,
        log,
      };
    }
    case "reply": {
      const reply = event.reply;
      const pending = new Map(state.pending);
      const command = reply.seq === null ? undefined : pending.get(reply.seq);
      if (reply.seq !== null) pending.delete(reply.seq);
      const label = command ? command.verb : `seq ${reply.seq}`;
      const entry: LogEntry = reply.ok
        ? { at: event.now, kind: "ack", text: `${label} acknowledged` }
        : {
            at: event.now,
            kind: "error",
            text: `${label} rejected: ${reply.error?.code ?? "unknown"} ${reply.error?.message ?? ""}`.trim(),
          };
      return { ...state, pending, log: pushLog(state, entry) };
    }
    case "command-sent": {
      const pending = new Map(state.pending);
      pending.set(event.command.seq, event.command);
      return {
        ...state,
        nextSeq: Math.max(state.nextSeq, event.command.seq + 1),
        pending,
      };
    }
    case "tick": {
      const stale =
        state.lastTelemetryAt !== null &&
        event.now - state.lastTelemetryAt > STALE_AFTER_MS;
      if (stale === state.stale) return state;
      return { ...state, stale };
    }
  }
}

export function verbInFlight(state: ConsoleViewState, verb: string): boolean {
  for (const command of state.pending.values()) {
    if (command.verb === verb) return true;
  }
  return false;
}
