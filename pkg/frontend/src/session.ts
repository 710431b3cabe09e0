import { frameError, parseTelemetry, Telemetry } from "./protocol.js";
import { Ring } from "./ring.js";

export type ConnectionState = "disconnected" | "connecting" | "live";

export interface Transport {
  send(line: string): void;
  close(): void;
}

export interface TransportEvents {
  onOpen(): void;
  onLine(line: string): void;
  onClose(): void;
}

export type TransportFactory = (address: string, events: TransportEvents) => Transport;

export const HISTORY_FRAMES = 1000;

/**
 * Client-side connection state machine. Owns the telemetry history and
 * refuses to let a malformed or mistimed frame reach the wire: commands
 * are re-validated against the grammar and only sent while live.
 */
export class UiSession {
  state: ConnectionState = "disconnected";
  latest: Telemetry | null = null;
  history = new Ring<Telemetry>(HISTORY_FRAMES);
  /** True from a successful send until the next telemetry frame. */
  pending = false;
  lastError: string | null = null;
  errorCount = 0;
  onChange: () => void = () => {};

  private transport: Transport | null = null;

  constructor(private makeTransport: TransportFactory) {}

  connect(address: string): void {
    this.disconnect();
    this.state = "connecting";
    this.lastError = null;
    try {
      this.transport = this.makeTransport(address, {
        onOpen: () => {
          this.state = "live";
          this.onChange();
        },
        onLine: (line) => this.handleLine(line),
        onClose: () => {
          this.state = "disconnected";
          this.transport = null;
          this.onChange();
        },
      });
    } catch (err) {
      this.state = "disconnected";
      this.lastError = String(err);
    }
    this.onChange();
  }

  disconnect(): void {
    if (this.transport !== null) {
      this.transport.close();
      this.transport = null;
    }
    this.state = "disconnected";
    this.pending = false;
    this.onChange();
  }

  /**
   * Send one command frame. Returns the reason it was refused, or null
   * when it went out.
   */
  send(line: string): string | null {
    if (this.state !== "live" || this.transport === null) {
      return "not connected";
    }
    const problem = frameError(line);
    if (problem !== null) return problem;
    try {
      this.transport.send(line);
    } catch (err) {
      return String(err);
    }
    this.pending = true;
    this.onChange();
    return null;
  }

  private handleLine(line: string): void {
    const frame = parseTelemetry(line);
    if (frame !== null) {
      this.latest = frame;
      this.history.push(frame);
      this.pending = false;
    } else if (line.startsWith("ERR")) {
      this.lastError = line.trim();
      this.errorCount += 1;
    }
    this.onChange();
  }
}
