// Wire grammar shared with the robot server: newline-delimited ASCII,
// one command per line, `TM ...` telemetry lines coming back.

export const MAX_FRAME_BYTES = 64;

export const STEERING_OPS = ["F", "B", "L", "R", "S"] as const;

// Strict decimal syntax; Number() alone would admit "0x10", "Infinity", "".
const NUMBER_RE = /^[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?$/;

export interface Telemetry {
  t: number;
  thetaTrue: number;
  thetaEst: number;
  x: number;
  v: number;
  dutyLeft: number;
  dutyRight: number;
  status: "Balancing" | "Fallen";
}

function parseNumber(token: string): number | null {
  if (!NUMBER_RE.test(token)) return null;
  const value = Number(token);
  return Number.isFinite(value) ? value : null;
}

/** Why a command line is invalid, or null when it is well-formed. */
export function frameError(line: string): string | null {
  if (!line.endsWith("\n")) return "missing trailing newline";
  if (new TextEncoder().encode(line).length > MAX_FRAME_BYTES) {
    return `frame exceeds ${MAX_FRAME_BYTES} bytes`;
  }
  const tokens = line.trim().split(/\s+/).filter((t) => t.length > 0);
  if (tokens.length === 0) return "empty frame";
  const [op, ...args] = tokens;

  if ((STEERING_OPS as readonly string[]).includes(op) || op === "X") {
    return args.length === 0 ? null : `${op} takes no arguments`;
  }
  if (op === "G") {
    if (args.length !== 3) return "G takes exactly 3 arguments";
    for (const a of args) {
      const v = parseNumber(a);
      if (v === null) return `not a number: ${a}`;
      if (v < 0) return "gains must be >= 0";
    }
    return null;
  }
  if (op === "A") {
    if (args.length !== 1) return "A takes exactly 1 argument";
    const v = parseNumber(args[0]);
    if (v === null) return `not a number: ${args[0]}`;
    return v >= 0 && v <= 1 ? null : "alpha must be in [0, 1]";
  }
  if (op === "T") {
    if (args.length !== 1) return "T takes exactly 1 argument";
    const v = parseNumber(args[0]);
    if (v === null) return `not a number: ${args[0]}`;
    return v >= 1 && v <= 100 ? null : "rate must be in [1, 100] Hz";
  }
  return `unknown opcode ${op}`;
}

export function steeringFrame(op: (typeof STEERING_OPS)[number] | "X"): string {
  return `${op}\n`;
}

export function gainsFrame(kp: number, ki: number, kd: number): string {
  return `G ${kp} ${ki} ${kd}\n`;
}

export function alphaFrame(alpha: number): string {
  return `A ${alpha}\n`;
}

export function rateFrame(hz: number): string {
  return `T ${hz}\n`;
}

/** Parse one `TM ...` line; null for anything else (ERR lines, noise). */
export function parseTelemetry(line: string): Telemetry | null {
  const tokens = line.trim().split(/\s+/);
  if (tokens.length !== 9 || tokens[0] !== "TM") return null;
  const status = tokens[8];
  if (status !== "Balancing" && status !== "Fallen") return null;
  const values: number[] = [];
  for (const tok of tokens.slice(1, 8)) {
    const v = parseNumber(tok);
    if (v === null) return null;
    values.push(v);
  }
  return {
    t: values[0],
    thetaTrue: values[1],
    thetaEst: values[2],
    x: values[3],
    v: values[4],
    dutyLeft: values[5],
    dutyRight: values[6],
    status,
  };
}

/** Keyboard steering map; auto-repeat is ignored (one frame per press). */
export function frameForKey(key: string, repeat: boolean): string | null {
  if (repeat) return null;
  switch (key) {
    case "ArrowUp":
      return steeringFrame("F");
    case "ArrowDown":
      return steeringFrame("B");
    case "ArrowLeft":
      return steeringFrame("L");
    case "ArrowRight":
      return steeringFrame("R");
    case " ":
      return steeringFrame("S");
    default:
      return null;
  }
}
