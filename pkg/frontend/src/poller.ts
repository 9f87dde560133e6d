/** Polling loop with failure backoff and a single-mutation-in-flight guard.
 *
 * The service is the only source of truth: on any fetch failure the state
 * flips to DEGRADED and the last snapshot is flagged stale rather than
 * presented as live. Recovery clears the banner on the next good poll.
 */

import { ApiClient } from "./api.js";
import { buildViewModel, type DashboardViewModel } from "./viewmodel.js";

export interface PollerState {
  degraded: boolean;
  lastError: string | null;
  lastGoodPollAt: number | null;
  pollCount: number;
  view: DashboardViewModel | null;
}

export interface PollerOptions {
  intervalMs?: number;
  maxBackoffMs?: number;
  nowFn?: () => number;
}

export class Poller {
  readonly state: PollerState = {
    degraded: false,
    lastError: null,
    lastGoodPollAt: null,
    pollCount: 0,
    view: null,
  };
  readonly intervalMs: number;
  private maxBackoffMs: number;
  private failures = 0;
  private timer: ReturnType<typeof setTimeout> | null = null;
  private mutationInFlight = false;
  private selected = new Set<string>();
  private nowFn: () => number;
  private listeners: Array<(state: PollerState) => void> = [];

  constructor(private api: ApiClient, options: PollerOptions = {}) {
    this.intervalMs = options.intervalMs ?? 2000;
    this.maxBackoffMs = options.maxBackoffMs ?? 30_000;
    this.nowFn = options.nowFn ?? Date.now;
  }

  onChange(listener: (state: PollerState) => void): void {
    this.listeners.push(listener);
  }

  setSelection(selected: ReadonlySet<string>): void {
    this.selected = new Set(selected);
  }

  get selection(): ReadonlySet<string> {
    return this.selected;
  }

  /** One refresh cycle; safe to call directly from tests. */
  async pollOnce(): Promise<PollerState> {
    try {
      const [bins, alerts, orders] = await Promise.all([
        this.api.bins(),
        this.api.alerts(),
        this.api.orders(),
      ]);
      this.state.view = buildViewModel(bins, alerts, orders, this.selected);
      this.state.degraded = false;
      this.state.lastError = null;
      this.state.lastGoodPollAt = this.nowFn();
      this.failures = 0;
    } catch (err) {
      this.state.degraded = true;
      this.state.lastError = err instanceof Error ? err.message : String(err);
      this.failures += 1;
    }
    this.state.pollCount += 1;
    for (const listener of this.listeners) listener(this.state);
    return this.state;
  }

  /** Delay before the next poll: fixed interval, doubled per failure. */
  nextDelayMs(): number {
    if (this.failures === 0) return this.intervalMs;
    return Math.min(this.intervalMs * 2 ** this.failures, this.maxBackoffMs);
  }

  start(): void {
    const loop = async () => {
      await this.pollOnce();
      this.timer = setTimeout(loop, this.nextDelayMs());
    };
    void loop();
  }

  stop(): void {
    if (this.timer !== null) clearTimeout(this.timer);
    this.timer = null;
  }

  /** Run one mutation with the UI-level single-flight guard. */
  async mutate<T>(action: () => Promise<T>): Promise<T> {
    if (this.mutationInFlight) {
      throw new Error("another operation is still in flight");
    }
    this.mutationInFlight = true;
    try {
      return await action();
    } finally {
      this.mutationInFlight = false;
    }
  }
}
