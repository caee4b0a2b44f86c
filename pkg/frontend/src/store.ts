// Live state store fed by the WS stream. Holds the latest snapshot plus a
// rolling window of samples for the strip charts; notifies subscribers on
// every change. Staleness is derived from wall-clock arrival times so a
// stalled runtime is visible even though no message says so.

import type { StateSnapshot, TraceRecord } from "./types.js";

export const WINDOW_SECONDS = 60;
export const STALE_AFTER_MS = 1000;

export interface StoreView {
  latest: StateSnapshot | null;
  /** samples ordered by sim time, trimmed to the rolling window */
  window: TraceRecord[];
  /** no frame received for more than STALE_AFTER_MS */
  stale: boolean;
  /** total frames received since the store was created */
  frameCount: number;
  connected: boolean;
}

type Listener = (view: StoreView) => void;

export class StateStore {
  private latest: StateSnapshot | null = null;
  private window: TraceRecord[] = [];
  private frameCount = 0;
  private connected = false;
  private lastFrameAt = -Infinity;
  private listeners: Listener[] = [];
  private now: () => number;

  constructor(now: () => number = () => Date.now()) {
    this.now = now;
  }

  subscribe(fn: Listener): () => void {
    this.listeners.push(fn);
    fn(this.view());
    return () => {
      this.listeners = this.listeners.filter((l) => l !== fn);
    };
  }

  view(): StoreView {
    return {
      latest: this.latest,
      window: this.window,
      stale: this.now() - this.lastFrameAt > STALE_AFTER_MS,
      frameCount: this.frameCount,
      connected: this.connected,
    };
  }

  push(snapshot: StateSnapshot): void {
    this.latest = snapshot;
    this.frameCount += 1;
    this.lastFrameAt = this.now();
    const rec = snapshot.record;
    if (rec) {
      const last = this.window[this.window.length - 1];
      // samples are appended in arrival order and never reordered; a sim
      // time jump backwards means the runtime restarted, so start over
      if (last && rec.t < last.t) {
        this.window = [];
      }
      if (!last || rec.t !== last.t) {
        this.window.push(rec);
      }
      const cutoff = rec.t - WINDOW_SECONDS;
      while (this.window.length && this.window[0].t < cutoff) {
        this.window.shift();
      }
    }
    this.notify();
  }

  setConnected(connected: boolean): void {
    if (this.connected !== connected) {
      this.connected = connected;
      this.notify();
    }
  }

  /** Re-evaluate staleness; call on a timer so the banner appears unprompted. */
  tick(): void {
    this.notify();
  }

  private notify(): void {
    const view = this.view();
    for (const fn of this.listeners) {
      fn(view);
    }
  }
}
