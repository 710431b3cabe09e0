import { Transport, TransportEvents } from "./session.js";

// Minimal surface of the standard WebSocket; the test suite substitutes
// the `ws` package's compatible implementation.
export interface WebSocketLike {
  onopen: ((ev: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onclose: ((ev: unknown) => void) | null;
  onerror: ((ev: unknown) => void) | null;
  send(data: string): void;
  close(): void;
}

export type WebSocketCtor = new (url: string) => WebSocketLike;

/**
 * Adapt a WebSocket to the line-oriented transport the session expects.
 * The server sends one telemetry line per message; split anyway so a
 * coalesced message cannot smuggle two lines into one.
 */
export function makeWsTransport(WS: WebSocketCtor) {
  return (address: string, events: TransportEvents): Transport => {
    const ws = new WS(address);
    ws.onopen = () => events.onOpen();
    ws.onmessage = (ev) => {
      for (const line of String(ev.data).split("\n")) {
        if (line.length > 0) events.onLine(line);
      }
    };
    ws.onclose = () => events.onClose();
    ws.onerror = () => {
      // A failed connection fires error then close; close drives the state.
    };
    return {
      send: (line) => ws.send(line),
      close: () => ws.close(),
    };
  };
}
