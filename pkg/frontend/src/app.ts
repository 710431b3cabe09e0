import { alphaFrame, frameForKey, gainsFrame, rateFrame, steeringFrame } from "./protocol.js";
import { UiSession } from "./session.js";
import { makeWsTransport, WebSocketCtor } from "./transport.js";
import { degrees, drawChart, drawSideView } from "./view.js";

const $ = <T extends HTMLElement>(id: string): T => {
  const el = document.getElementById(id);
  if (el === null) throw new Error(`missing element #${id}`);
  return el as T;
};

const session = new UiSession(makeWsTransport(WebSocket as unknown as WebSocketCtor));

const addressInput = $<HTMLInputElement>("address");
const connectBtn = $<HTMLButtonElement>("connect");
const connState = $<HTMLSpanElement>("conn-state");
const fallenBanner = $<HTMLDivElement>("fallen-banner");
const resetBtn = $<HTMLButtonElement>("reset");
const errorLine = $<HTMLDivElement>("error-line");
const pendingDot = $<HTMLSpanElement>("pending");

const sideCanvas = $<HTMLCanvasElement>("side-view");
const chartCanvas = $<HTMLCanvasElement>("chart");

const defaultAddress = () => {
  const fromQuery = new URLSearchParams(location.search).get("ws");
  if (fromQuery !== null) return fromQuery;
  if (location.protocol.startsWith("http")) return `ws://${location.host}`;
  return "ws://127.0.0.1:8766";
};
addressInput.value = defaultAddress();

connectBtn.addEventListener("click", () => {
  if (session.state === "disconnected") session.connect(addressInput.value);
  else session.disconnect();
});

// One frame per activation; holding a key must not stream commands.
const steerIds: Array<[string, string]> = [
  ["btn-f", "F"],
  ["btn-b", "B"],
  ["btn-l", "L"],
  ["btn-r", "R"],
  ["btn-s", "S"],
];
for (const [id, op] of steerIds) {
  $<HTMLButtonElement>(id).addEventListener("click", () => {
    session.send(steeringFrame(op as "F"));
  });
}
resetBtn.addEventListener("click", () => {
  session.send(steeringFrame("X"));
});

document.addEventListener("keydown", (ev) => {
  if (ev.target instanceof HTMLInputElement) return;
  const frame = frameForKey(ev.key, ev.repeat);
  if (frame !== null) {
    ev.preventDefault();
    session.send(frame);
  }
});

// Sliders fire `change` on release, not per pixel of travel.
const kpSlider = $<HTMLInputElement>("kp");
const kiSlider = $<HTMLInputElement>("ki");
const kdSlider = $<HTMLInputElement>("kd");
const alphaSlider = $<HTMLInputElement>("alpha");
const rateInput = $<HTMLInputElement>("rate");

const sendGains = () => {
  session.send(
    gainsFrame(Number(kpSlider.value), Number(kiSlider.value), Number(kdSlider.value)),
  );
};
for (const slider of [kpSlider, kiSlider, kdSlider]) {
  slider.addEventListener("change", sendGains);
  slider.addEventListener("input", () => updateLabels());
}
alphaSlider.addEventListener("change", () => {
  session.send(alphaFrame(Number(alphaSlider.value)));
});
alphaSlider.addEventListener("input", () => updateLabels());
rateInput.addEventListener("change", () => {
  session.send(rateFrame(Number(rateInput.value)));
});

function updateLabels(): void {
  $("kp-val").textContent = kpSlider.value;
  $("ki-val").textContent = kiSlider.value;
  $("kd-val").textContent = kdSlider.value;
  $("alpha-val").textContent = alphaSlider.value;
}

function updateControls(): void {
  const live = session.state === "live";
  connState.textContent = session.state;
  connState.className = `state-${session.state}`;
  connectBtn.textContent = session.state === "disconnected" ? "Connect" : "Disconnect";
  addressInput.disabled = session.state !== "disconnected";
  for (const [id] of steerIds) $<HTMLButtonElement>(id).disabled = !live;
  resetBtn.disabled = !live;
  for (const el of [kpSlider, kiSlider, kdSlider, alphaSlider, rateInput]) {
    el.disabled = !live;
  }
  errorLine.textContent = session.lastError ?? "";
}

session.onChange = updateControls;

function updateReadouts(): void {
  const f = session.latest;
  const fmt = (v: number, digits = 3) => v.toFixed(digits);
  $("ro-theta").textContent = f ? `${fmt(degrees(f.thetaTrue), 2)}°` : "—";
  $("ro-est").textContent = f ? `${fmt(degrees(f.thetaEst), 2)}°` : "—";
  $("ro-x").textContent = f ? `${fmt(f.x)} m` : "—";
  $("ro-v").textContent = f ? `${fmt(f.v)} m/s` : "—";
  $("ro-duty").textContent = f ? `${fmt(f.dutyLeft, 2)} / ${fmt(f.dutyRight, 2)}` : "—";
  $("ro-status").textContent = f ? f.status : "—";
  $("ro-t").textContent = f ? `${fmt(f.t, 2)} s` : "—";

  const fallen = f !== null && f.status === "Fallen";
  fallenBanner.style.display = fallen ? "block" : "none";
  resetBtn.classList.toggle("urgent", fallen);
  pendingDot.style.visibility = session.pending ? "visible" : "hidden";
}

function frame(): void {
  updateReadouts();
  const side = sideCanvas.getContext("2d");
  if (side !== null) drawSideView(side, sideCanvas.width, sideCanvas.height, session.latest);
  const chart = chartCanvas.getContext("2d");
  if (chart !== null) drawChart(chart, chartCanvas.width, chartCanvas.height, session.history.toArray());
  requestAnimationFrame(frame);
}

updateLabels();
updateControls();
requestAnimationFrame(frame);
