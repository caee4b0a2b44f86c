// WS /stream client with automatic reconnect. The socket and timers are
// injectable so the reconnect/staleness logic is testable without a browser.

import type { StateStore } from "./store.js";
import type { StateSnapshot } from "./types.js";

export interface SocketLike {
  onopen: (() => void) | null;
  onmessage: ((ev: { data: string }) => void) | null;
  onclose: (() => void) | null;
  onerror: (() => void) | null;
  close(): void;
}

export interface StreamOptions {
  /** called to open a socket; defaults to the browser WebSocket */
  socketFactory?: (url: string) => SocketLike;
  reconnectDelayMs?: number;
  staleCheckMs?: number;
  setTimer?: (fn: () => void, ms: number) => unknown;
  clearTimer?: (handle: unknown) => void;
  setTicker?: (fn: () => void, ms: number) => unknown;
  clearTicker?: (handle: unknown) => void;
}

export interface StreamHandle {
  close(): void;
}

export function connectStream(
  url: string,
  store: StateStore,
  opts: StreamOptions = {},
): StreamHandle {
  const factory =
    opts.socketFactory ??
    ((u: string) => new WebSocket(u) as unknown as SocketLike);
  const reconnectDelay = opts.reconnectDelayMs ?? 500;
  const staleCheck = opts.staleCheckMs ?? 250;
  const setTimer = opts.setTimer ?? ((fn, ms) => setTimeout(fn, ms));
  const clearTimer = opts.clearTimer ?? ((h) => clearTimeout(h as number));
  const setTicker = opts.setTicker ?? ((fn, ms) => setInterval(fn, ms));
  const clearTicker = opts.clearTicker ?? ((h) => clearInterval(h as number));

  let socket: SocketLike | null = null;
  let reconnectHandle: unknown = null;
  let closed = false;

  // periodic staleness re-evaluation: the banner must appear even when no
  // event arrives at all
  const ticker = setTicker(() => store.tick(), staleCheck);

  const open = () => {
    if (closed) return;
    socket = factory(url);
    socket.onopen = () => store.setConnected(true);
    socket.onmessage = (ev) => {
      let snapshot: StateSnapshot;
      try {
        snapshot = JSON.parse(ev.data) as StateSnapshot;
      } catch {
        return; // garbage frame: ignore, staleness will surface a dead stream
      }
      store.push(snapshot);
    };
    const onDrop = () => {
      store.setConnected(false);
      if (!closed && reconnectHandle === null) {
        reconnectHandle = setTimer(() => {
          reconnectHandle = null;
          open();
        }, reconnectDelay);
      }
    };
    socket.onclose = onDrop;
    socket.onerror = onDrop;
  };
  open();

  return {
    close() {
      closed = true;
      if (reconnectHandle !== null) clearTimer(reconnectHandle);
      clearTicker(ticker);
      socket?.close();
    },
  };
}
