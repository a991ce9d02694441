/**
 * One WebSocket, one inference session.
 *
 * The server answers every request in order (start and reset with ack,
 * observe with posterior, predict with prediction, anything with error),
 * and may interleave unsolicited pings. Requests are therefore matched to
 * replies with a FIFO of pending kinds, which also yields a client-side
 * round-trip latency per observation.
 *
 * On disconnect the pending queue is dropped, the owner is told via
 * onDown, and reconnection is attempted with backoff; a successful
 * reconnect starts a fresh session with the same configuration (the
 * server keeps no state across sockets, so this is the documented reset
 * semantics). The socket itself is abstracted behind WireFactory so the
 * same state machine runs in the browser and under node tests.
 */

import type {
  AckReply,
  ErrorReply,
  PosteriorReply,
  PredictionReply,
  StartOptions,
} from "./protocol.js";
import {
  observeMessage,
  parseServerMessage,
  pongMessage,
  predictMessage,
  resetMessage,
  startMessage,
} from "./protocol.js";
import type { Scheduler } from "./tracker.js";
import { realScheduler } from "./tracker.js";

export interface WireHandlers {
  onOpen(): void;
  onText(text: string): void;
  onClose(): void;
  onError(detail: string): void;
}

export interface Wire {
  send(text: string): void;
  close(): void;
}

export type WireFactory = (url: string, handlers: WireHandlers) => Wire;

export interface SessionEvents {
  onAck?(ack: AckReply): void;
  onPosterior?(reply: PosteriorReply, clientLatencyMs: number): void;
  onPrediction?(reply: PredictionReply): void;
  onServerError?(reply: ErrorReply): void;
  /** Connection lost or could not be established; a banner-worthy event. */
  onDown?(reason: string): void;
  /** Socket reopened; a fresh start has already been sent. */
  onUp?(): void;
  /** Frame that violates the schema, or a reply nothing asked for. */
  onProtocolProblem?(detail: string): void;
}

export interface SessionOptions {
  retryDelaysMs?: number[];
  scheduler?: Scheduler;
}

type PendingKind = "start" | "observe" | "predict" | "reset";

interface Pending {
  kind: PendingKind;
  sentMs: number;
}

const DEFAULT_RETRIES = [500, 1000, 2000, 5000];

export class InferenceSession {
  private readonly factory: WireFactory;
  private readonly url: string;
  private readonly events: SessionEvents;
  private readonly sched: Scheduler;
  private readonly retryDelays: number[];

  private startOpts: StartOptions;
  private wire: Wire | null = null;
  private isOpen = false;
  private closed = false;
  private pending: Pending[] = [];
  private retryIndex = 0;
  private retryHandle: unknown = null;

  constructor(
    factory: WireFactory,
    url: string,
    start: StartOptions,
    events: SessionEvents = {},
    opts: SessionOptions = {},
  ) {
    this.factory = factory;
    this.url = url;
    this.startOpts = start;
    this.events = events;
    this.sched = opts.scheduler ?? realScheduler;
    this.retryDelays = opts.retryDelaysMs ?? DEFAULT_RETRIES;
  }

  get open(): boolean {
    return this.isOpen;
  }

  get pendingCount(): number {
    return this.pending.length;
  }

  connect(): void {
    if (this.closed) throw new Error("session closed");
    if (this.wire) return;
    try {
      this.wire = this.factory(this.url, {
        onOpen: () => this.handleOpen(),
        onText: (text) => this.handleText(text),
        onClose: () => this.handleClose("connection closed"),
        onError: (detail) => this.handleClose(detail),
      });
    } catch (err) {
      this.handleClose(String(err));
    }
  }

  /** Replace the session configuration and start over on the same socket. */
  restart(start: StartOptions): void {
    this.startOpts = start;
    if (this.isOpen) this.sendStart();
  }

  observe(t: number, y: readonly number[]): boolean {
    return this.request("observe", observeMessage(t, y));
  }

  predict(at: number, top?: number): boolean {
    return this.request("predict", predictMessage(at, top));
  }

  reset(): boolean {
    return this.request("reset", resetMessage());
  }

  close(): void {
    this.closed = true;
    if (this.retryHandle !== null) {
      this.sched.clearTimeout(this.retryHandle);
      this.retryHandle = null;
    }
    const w = this.wire;
    this.wire = null;
    this.isOpen = false;
    this.pending = [];
    if (w) w.close();
  }

  // -------------------------------------------------------------------

  private request(kind: PendingKind, frame: string): boolean {
    if (!this.isOpen || !this.wire) return false;
    this.pending.push({ kind, sentMs: this.sched.now() });
    this.wire.send(frame);
    return true;
  }

  private sendStart(): void {
    if (!this.wire) return;
    this.pending.push({ kind: "start", sentMs: this.sched.now() });
    this.wire.send(startMessage(this.startOpts));
  }

  private handleOpen(): void {
    this.isOpen = true;
    this.retryIndex = 0;
    this.sendStart();
    this.events.onUp?.();
  }

  private handleText(text: string): void {
    let msg;
    try {
      msg = parseServerMessage(text);
    } catch (err) {
      this.events.onProtocolProblem?.(String(err));
      return;
    }
    if (msg.type === "ping") {
      this.wire?.send(pongMessage());
      return;
    }
    const pending = this.pending.shift();
    if (!pending) {
      this.events.onProtocolProblem?.(`unsolicited ${msg.type} reply`);
      return;
    }
    const latencyMs = this.sched.now() - pending.sentMs;
    switch (msg.type) {
      case "ack":
        this.events.onAck?.(msg);
        break;
      case "posterior":
        this.events.onPosterior?.(msg, latencyMs);
        break;
      case "prediction":
        this.events.onPrediction?.(msg);
        break;
      case "error":
        this.events.onServerError?.(msg);
        break;
    }
  }

  private handleClose(reason: string): void {
    const wasConnected = this.wire !== null;
    this.wire = null;
    this.isOpen = false;
    this.pending = [];
    if (this.closed || !wasConnected) return;
    this.events.onDown?.(reason);
    const delay =
      this.retryDelays[Math.min(this.retryIndex, this.retryDelays.length - 1)];
    this.retryIndex += 1;
    this.retryHandle = this.sched.setTimeout(() => {
      this.retryHandle = null;
      if (!this.closed) this.connect();
    }, delay);
  }
}

/** WireFactory over the browser's native WebSocket. */
export function browserWire(url: string, handlers: WireHandlers): Wire {
  const ws = new WebSocket(url);
  ws.onopen = () => handlers.onOpen();
  ws.onmessage = (ev) => handlers.onText(String(ev.data));
  ws.onclose = () => handlers.onClose();
  ws.onerror = () => handlers.onError("websocket error");
  return {
    send: (text) => ws.send(text),
    close: () => ws.close(),
  };
}
