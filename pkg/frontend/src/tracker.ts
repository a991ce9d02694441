/**
 * Fixed-rate sampling clock for the pointer tracker.
 *
 * Ticks land on an absolute grid (start + k/hz) rather than chaining
 * relative timeouts, so jitter in the event loop never accumulates into
 * drift. If the loop stalls past one or more deadlines, the missed ticks
 * fire immediately in order and the grid realigns by itself.
 */

export type TickFn = (elapsedSeconds: number, tick: number) => void;

export interface Scheduler {
  /** Milliseconds from an arbitrary origin; monotonic preferred. */
  now(): number;
  setTimeout(cb: () => void, ms: number): unknown;
  clearTimeout(handle: unknown): void;
}

export const realScheduler: Scheduler = {
  now: () => performance.now(),
  setTimeout: (cb, ms) => setTimeout(cb, ms),
  clearTimeout: (h) => clearTimeout(h as Parameters<typeof clearTimeout>[0]),
};

export class FixedRateSampler {
  private readonly periodMs: number;
  private sched: Scheduler;
  private handle: unknown = null;
  private startMs = 0;
  private tick = 0;
  private onTick: TickFn | null = null;

  constructor(hz: number, sched: Scheduler = realScheduler) {
    if (!(hz > 0)) throw new Error("rate must be positive");
    this.periodMs = 1000 / hz;
    this.sched = sched;
  }

  get running(): boolean {
    return this.onTick !== null;
  }

  /** First tick fires one period after start, with elapsed = 1/hz. */
  start(onTick: TickFn): void {
    if (this.onTick) throw new Error("already running");
    this.onTick = onTick;
    this.startMs = this.sched.now();
    this.tick = 0;
    this.arm();
  }

  stop(): void {
    this.onTick = null;
    if (this.handle !== null) {
      this.sched.clearTimeout(this.handle);
      this.handle = null;
    }
  }

  private arm(): void {
    const deadline = this.startMs + (this.tick + 1) * this.periodMs;
    const delay = Math.max(0, deadline - this.sched.now());
    this.handle = this.sched.setTimeout(() => this.fire(), delay);
  }

  private fire(): void {
    const cb = this.onTick;
    if (!cb) return;
    this.tick += 1;
    cb((this.tick * this.periodMs) / 1000, this.tick);
    // The callback may have stopped the sampler.
    if (this.onTick) this.arm();
  }
}
