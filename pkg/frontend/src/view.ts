import { Telemetry } from "./protocol.js";

export function degrees(rad: number): number {
  return (rad * 180) / Math.PI;
}

/**
 * Canvas endpoint of the body line: pivot at (cx, cy), tilt measured
 * from the vertical, positive tilt leaning toward +x (screen right).
 * Canvas y grows downward, so an upright body points straight up.
 */
export function bodyTip(
  cx: number,
  cy: number,
  length: number,
  theta: number,
): { x: number; y: number } {
  return { x: cx + length * Math.sin(theta), y: cy - length * Math.cos(theta) };
}

export function drawSideView(
  ctx: CanvasRenderingContext2D,
  width: number,
  height: number,
  frame: Telemetry | null,
): void {
  ctx.clearRect(0, 0, width, height);
  const ground = height - 24;
  ctx.strokeStyle = "#445";
  ctx.beginPath();
  ctx.moveTo(0, ground);
  ctx.lineTo(width, ground);
  ctx.stroke();

  if (frame === null) return;
  const wheelR = 16;
  const bodyLen = Math.min(width, height) * 0.45;
  // Track the cart laterally, wrapping so it never leaves the canvas.
  const span = 2.0;
  const frac = (((frame.x / span) % 1) + 1) % 1;
  const cx = 40 + frac * (width - 80);
  const cy = ground - wheelR;

  ctx.strokeStyle = "#8af";
  ctx.beginPath();
  ctx.arc(cx, cy, wheelR, 0, 2 * Math.PI);
  ctx.stroke();

  // Ghost line first so the true body draws over it.
  const ghost = bodyTip(cx, cy, bodyLen, frame.thetaEst);
  ctx.strokeStyle = "rgba(255, 255, 255, 0.25)";
  ctx.lineWidth = 3;
  ctx.beginPath();
  ctx.moveTo(cx, cy);
  ctx.lineTo(ghost.x, ghost.y);
  ctx.stroke();

  const tip = bodyTip(cx, cy, bodyLen, frame.thetaTrue);
  ctx.strokeStyle = frame.status === "Fallen" ? "#f55" : "#6e6";
  ctx.lineWidth = 4;
  ctx.beginPath();
  ctx.moveTo(cx, cy);
  ctx.lineTo(tip.x, tip.y);
  ctx.stroke();
  ctx.lineWidth = 1;
}

export function drawChart(
  ctx: CanvasRenderingContext2D,
  width: number,
  height: number,
  frames: Telemetry[],
): void {
  ctx.clearRect(0, 0, width, height);
  const mid = height / 2;
  ctx.strokeStyle = "#445";
  ctx.beginPath();
  ctx.moveTo(0, mid);
  ctx.lineTo(width, mid);
  ctx.stroke();
  if (frames.length < 2) return;

  let peak = 0.05;
  for (const f of frames) {
    peak = Math.max(peak, Math.abs(f.thetaTrue), Math.abs(f.thetaEst));
  }
  const yOf = (theta: number) => mid - (theta / peak) * (mid - 6);
  const xOf = (i: number) => (i / (frames.length - 1)) * width;

  const trace = (pick: (f: Telemetry) => number, style: string) => {
    ctx.strokeStyle = style;
    ctx.beginPath();
    frames.forEach((f, i) => {
      const x = xOf(i);
      const y = yOf(pick(f));
      if (i === 0) ctx.moveTo(x, y);
      else ctx.lineTo(x, y);
    });
    ctx.stroke();
  };
  trace((f) => f.thetaEst, "rgba(255, 255, 255, 0.35)");
  trace((f) => f.thetaTrue, "#6e6");

  ctx.fillStyle = "#99a";
  ctx.font = "11px monospace";
  ctx.fillText(`±${degrees(peak).toFixed(1)}°`, 4, 12);
}
