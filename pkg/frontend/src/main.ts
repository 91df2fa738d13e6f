// Entry point: wires the socket client, reducer state, and DOM together.

import { ControlClient, endpointFromLocation } from "./client.js";
import {
  absDisabledCommand,
  airbagDisabledCommand,
  clearOverridesCommand,
  floodCommand,
  rpmOverrideCommand,
  speedOverrideCommand,
  vehicleSetCommand,
} from "./protocol.js";
import type { ConsoleEvent, ConsoleViewState } from "./state.js";
import { initialState, reduce } from "./state.js";
import { buildLayout, render } from "./view.js";

const endpoint = endpointFromLocation(window.location.search);
const root = document.getElementById("app");
if (!root) throw new Error("missing #app container");
const refs = buildLayout(root);

let state: ConsoleViewState = initialState(endpoint);

function dispatch(event: ConsoleEvent): void {
  state = reduce(state, event);
  render(state, refs);
}

const client = new ControlClient(endpoint, dispatch);
client.start();

// staleness watchdog: gauges freeze and the banner shows with no telemetry
setInterval(() => dispatch({ kind: "tick", now: Date.now() }), 250);

function numberValue(id: string): number | null {
  const input = refs.controls.get(id) as HTMLInputElement;
  const value = Number(input.value);
  return input.value === "" || Number.isNaN(value) ? null : value;
}

function checked(id: string): boolean {
  return (refs.controls.get(id) as HTMLInputElement).checked;
}

function on(id: string, eventName: string, handler: () => void): void {
  refs.controls.get(id)?.addEventListener(eventName, () => {
    try {
      handler();
    } catch (err) {
      dispatch({
        kind: "reply",
        reply: {
          type: "reply",
          seq: null,
          ok: false,
          error: { code: "client_range", message: String(err) },
        },
        now: Date.now(),
      });
    }
  });
}

on("speed-apply", "click", () => {
  client.send((seq) => speedOverrideCommand(seq, numberValue("speed-override")));
});
on("rpm-apply", "click", () => {
  client.send((seq) => rpmOverrideCommand(seq, numberValue("rpm-override")));
});
on("airbag-disabled", "change", () => {
  client.send((seq) => airbagDisabledCommand(seq, checked("airbag-disabled")));
});
on("abs-disabled", "change", () => {
  client.send((seq) => absDisabledCommand(seq, checked("abs-disabled")));
});
on("flood", "change", () => {
  client.send((seq) => floodCommand(seq, checked("flood")));
});
on("clear-overrides", "click", () => {
  client.send((seq) => clearOverridesCommand(seq));
});

on("veh-handbrake", "change", () => {
  client.send((seq) =>
    vehicleSetCommand(seq, "handbrake", checked("veh-handbrake")));
});
on("veh-low-beam", "change", () => {
  client.send((seq) =>
    vehicleSetCommand(seq, "low_beam", checked("veh-low-beam")));
});
on("veh-side-lights", "change", () => {
  client.send((seq) =>
    vehicleSetCommand(seq, "side_lights", checked("veh-side-lights")));
});
on("veh-speed-apply", "click", () => {
  const value = numberValue("veh-speed");
  if (value !== null) {
    client.send((seq) => vehicleSetCommand(seq, "speed", value));
  }
});
on("veh-throttle-apply", "click", () => {
  const value = numberValue("veh-throttle");
  if (value !== null) {
    client.send((seq) => vehicleSetCommand(seq, "throttle", value));
  }
});
on("veh-fuel-apply", "click", () => {
  const value = numberValue("veh-fuel");
  if (value !== null) {
    client.send((seq) => vehicleSetCommand(seq, "fuel", value));
  }
});

render(state, refs);
