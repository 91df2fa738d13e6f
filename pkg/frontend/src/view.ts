// DOM rendering. Pure "state in, DOM out": render() projects the current
// ConsoleViewState onto elements created once by buildLayout(). Values on
// screen always come from the latest telemetry frame.

import { LAMP_NAMES, RPM_RANGE, SPEED_RANGE } from "./protocol.js";
import type { ConsoleViewState } from "./state.js";
import { verbInFlight } from "./state.js";

export interface GaugeRefs {
  truthValue: HTMLElement;
  truthBar: HTMLElement;
  shownValue: HTMLElement;
  shownBar: HTMLElement;
  row: HTMLElement;
}

export interface ViewRefs {
  status: HTMLElement;
  staleBanner: HTMLElement;
  speed: GaugeRefs;
  rpm: GaugeRefs;
  lamps: Map<string, HTMLElement>;
  flagList: HTMLElement;
  utilizationBar: HTMLElement;
  utilizationText: HTMLElement;
  simTime: HTMLElement;
  log: HTMLElement;
  controls: Map<string, HTMLInputElement | HTMLButtonElement>;
}

function el(tag: string, className: string, text = ""): HTMLElement {
  const node = document.createElement(tag);
  node.className = className;
  if (text) node.textContent = text;
  return node;
}

function buildGauge(root: HTMLElement, title: string): GaugeRefs {
  const row = el("div", "gauge-row");
  row.appendChild(el("div", "gauge-title", title));
  const truth = el("div", "gauge half");
  truth.appendChild(el("div", "gauge-label", "vehicle truth"));
  const truthValue = el("div", "gauge-value", "--");
  const truthTrack = el("div", "gauge-track");
  const truthBar = el("div", "gauge-bar");
  truthTrack.appendChild(truthBar);
  truth.append(truthValue, truthTrack);
  const shown = el("div", "gauge half");
  shown.appendChild(el("div", "gauge-label", "cluster shows"));
  const shownValue = el("div", "gauge-value", "--");
  const shownTrack = el("div", "gauge-track");
  const shownBar = el("div", "gauge-bar");
  shownTrack.appendChild(shownBar);
  shown.append(shownValue, shownTrack);
  const pair = el("div", "gauge-pair");
  pair.append(truth, shown);
  row.appendChild(pair);
  root.appendChild(row);
  return { truthValue, truthBar, shownValue, shownBar, row };
}

export function buildLayout(root: HTMLElement): ViewRefs {
  root.textContent = "";
  const header = el("header", "header");
  header.appendChild(el("h1", "title", "canwire attacker console"));
  const status = el("span", "status", "connecting");
  header.appendChild(status);
  root.appendChild(header);

  const staleBanner = el("div", "stale-banner hidden",
    "telemetry stale: showing last known state");
  root.appendChild(staleBanner);

  const columns = el("div", "columns");
  const left = el("div", "column");
  const right = el("div", "column");
  columns.append(left, right);
  root.appendChild(columns);

  const speed = buildGauge(left, "speed (km/h)");
  const rpm = buildGauge(left, "rpm");

  const lampPanel = el("div", "lamp-panel");
  const lamps = new Map<string, HTMLElement>();
  for (const name of LAMP_NAMES) {
    const lamp = el("span", "lamp", name);
    lamps.set(name, lamp);
    lampPanel.appendChild(lamp);
  }
  left.appendChild(lampPanel);
  const flagList = el("div", "flag-list");
  left.appendChild(flagList);

  const utilRow = el("div", "util-row");
  utilRow.appendChild(el("span", "util-label", "bus load"));
  const utilTrack = el("div", "gauge-track util-track");
  const utilizationBar = el("div", "gauge-bar");
  utilTrack.appendChild(utilizationBar);
  const utilizationText = el("span", "util-text", "0%");
  utilRow.append(utilTrack, utilizationText);
  left.appendChild(utilRow);
  const simTime = el("div", "sim-time", "t = 0.0 s");
  left.appendChild(simTime);

  const controls = new Map<string, HTMLInputElement | HTMLButtonElement>();
  right.appendChild(buildAttackPanel(controls));
  right.appendChild(buildVehiclePanel(controls));
  const log = el("div", "event-log");
  right.appendChild(log);

  return {
    status, staleBanner, speed, rpm, lamps, flagList,
    utilizationBar, utilizationText, simTime, log, controls,
  };
}

function labelled(text: string, input: HTMLElement): HTMLElement {
  const wrap = el("label", "control");
  wrap.appendChild(el("span", "control-label", text));
  wrap.appendChild(input);
  return wrap;
}

function numberInput(id: string, min: number, max: number): HTMLInputElement {
  const input = document.createElement("input");
  input.type = "number";
  input.id = id;
  input.min = String(min);
  input.max = String(max);
  return input;
}

function checkbox(id: string): HTMLInputElement {
  const input = document.createElement("input");
  input.type = "checkbox";
  input.id = id;
  return input;
}

function button(id: string, text: string): HTMLButtonElement {
  const node = document.createElement("button");
  node.id = id;
  node.textContent = text;
  return node;
}

function buildAttackPanel(
  controls: Map<string, HTMLInputElement | HTMLButtonElement>,
): HTMLElement {
  const panel = el("section", "panel attack-panel");
  panel.appendChild(el("h2", "panel-title", "rogue device"));
  const speedInput = numberInput("speed-override", SPEED_RANGE.min, SPEED_RANGE.max);
  const speedApply = button("speed-apply", "forge speed");
  const rpmInput = numberInput("rpm-override", RPM_RANGE.min, RPM_RANGE.max);
  const rpmApply = button("rpm-apply", "forge rpm");
  const airbag = checkbox("airbag-disabled");
  const abs = checkbox("abs-disabled");
  const flood = checkbox("flood");
  const clear = button("clear-overrides", "clear all overrides");
  controls.set("speed-override", speedInput);
  controls.set("speed-apply", speedApply);
  controls.set("rpm-override", rpmInput);
  controls.set("rpm-apply", rpmApply);
  controls.set("airbag-disabled", airbag);
  controls.set("abs-disabled", abs);
  controls.set("flood", flood);
  controls.set("clear-overrides", clear);
  panel.appendChild(labelled("speed override (km/h)", speedInput));
  panel.appendChild(speedApply);
  panel.appendChild(labelled("rpm override", rpmInput));
  panel.appendChild(rpmApply);
  panel.appendChild(labelled("disable airbag messages", airbag));
  panel.appendChild(labelled("disable ABS messages", abs));
  panel.appendChild(labelled("flood bus (DoS)", flood));
  panel.appendChild(clear);
  return panel;
}

function buildVehiclePanel(
  controls: Map<string, HTMLInputElement | HTMLButtonElement>,
): HTMLElement {
  const panel = el("section", "panel vehicle-panel");
  panel.appendChild(el("h2", "panel-title", "vehicle (manual mode)"));
  const handbrake = checkbox("veh-handbrake");
  const lowBeam = checkbox("veh-low-beam");
  const sideLights = checkbox("veh-side-lights");
  const speed = numberInput("veh-speed", 0, 1023);
  const speedApply = button("veh-speed-apply", "set speed");
  const throttle = numberInput("veh-throttle", 0, 100);
  const throttleApply = button("veh-throttle-apply", "set throttle");
  const fuel = numberInput("veh-fuel", 0, 100);
  const fuelApply = button("veh-fuel-apply", "set fuel");
  controls.set("veh-handbrake", handbrake);
  controls.set("veh-low-beam", lowBeam);
  controls.set("veh-side-lights", sideLights);
  controls.set("veh-speed", speed);
  controls.set("veh-speed-apply", speedApply);
  controls.set("veh-throttle", throttle);
  controls.set("veh-throttle-apply", throttleApply);
  controls.set("veh-fuel", fuel);
  controls.set("veh-fuel-apply", fuelApply);
  panel.appendChild(labelled("handbrake", handbrake));
  panel.appendChild(labelled("low beam", lowBeam));
  panel.appendChild(labelled("side lights", sideLights));
  panel.appendChild(labelled("true speed (km/h)", speed));
  panel.appendChild(speedApply);
  panel.appendChild(labelled("throttle (%)", throttle));
  panel.appendChild(throttleApply);
  panel.appendChild(labelled("fuel (l)", fuel));
  panel.appendChild(fuelApply);
  return panel;
}

function setGauge(
  refs: GaugeRefs,
  truth: number,
  shown: number,
  max: number,
): void {
  refs.truthValue.textContent = truth.toFixed(0);
  refs.shownValue.textContent = shown.toFixed(0);
  refs.truthBar.style.width = `${Math.min(100, (truth / max) * 100)}%`;
  refs.shownBar.style.width = `${Math.min(100, (shown / max) * 100)}%`;
  // divergence highlight: beyond quantization noise the values disagree
  refs.row.classList.toggle("diverged", Math.abs(truth - shown) > 1);
}

const VERB_BY_CONTROL: Record<string, string> = {
  "speed-apply": "set_speed_override",
  "rpm-apply": "set_rpm_override",
  "airbag-disabled": "set_airbag_disabled",
  "abs-disabled": "set_abs_disabled",
  "flood": "set_flood",
  "clear-overrides": "clear_overrides",
  "veh-handbrake": "vehicle_set",
  "veh-low-beam": "vehicle_set",
  "veh-side-lights": "vehicle_set",
  "veh-speed-apply": "vehicle_set",
  "veh-throttle-apply": "vehicle_set",
  "veh-fuel-apply": "vehicle_set",
};

export function render(state: ConsoleViewState, refs: ViewRefs): void {
  refs.status.textContent = state.status;
  refs.status.className = `status status-${state.status}`;
  refs.staleBanner.classList.toggle(
    "hidden",
    !(state.stale || state.status !== "connected"),
  );

  const frame = state.telemetry;
  if (frame) {
    setGauge(refs.speed, frame.vehicle.speed, frame.cluster.speed, 260);
    setGauge(refs.rpm, frame.vehicle.rpm, frame.cluster.rpm, 7000);
    for (const [name, lamp] of refs.lamps) {
      lamp.classList.toggle("lit", Boolean(frame.cluster.lamps[name]));
    }
    const flags: string[] = [];
    for (const id of frame.cluster.timeouts) flags.push(`timeout 0x${id}`);
    for (const id of frame.cluster.counter_errors) flags.push(`counter 0x${id}`);
    refs.flagList.textContent = flags.join("  ");
    const pct = Math.round(frame.utilization * 100);
    refs.utilizationBar.style.width = `${pct}%`;
    refs.utilizationText.textContent = `${pct}%`;
    refs.simTime.textContent =
      `t = ${(frame.sim_time_us / 1e6).toFixed(1)} s` +
      (frame.paused ? " (paused)" : "");
  }

  const connected = state.status === "connected";
  for (const [id, control] of refs.controls) {
    const verb = VERB_BY_CONTROL[id];
    const busy = verb !== undefined && verbInFlight(state, verb);
    control.disabled = !connected || busy;
  }

  // re-render the event log only when it changed length
  if (refs.log.childElementCount !== state.log.length) {
    refs.log.textContent = "";
    for (const entry of state.log.slice(-30)) {
      const line = el("div", `log-line log-${entry.kind}`);
      const when = new Date(entry.at).toLocaleTimeString();
      line.textContent = `${when}  ${entry.text}`;
      refs.log.appendChild(line);
    }
    refs.log.scrollTop = refs.log.scrollHeight;
  }
}
