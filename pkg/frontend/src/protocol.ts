/**
 * Message schema for the streaming inference service.
 *
 * Mirrors docs/protocol.md in the parent repository: every frame is one
 * JSON object with a `v` version field. This module builds outgoing
 * frames and validates incoming ones; it has no I/O of its own.
 */

export const PROTOCOL_VERSION = 1;

/** Displayed probabilities must sum to 1; larger drift is user-visible. */
export const NORMALIZATION_WARN = 1e-6;

export interface TransformSpec {
  scale: number;
  offset: [number, number];
  time_scale: number;
}

export interface DestinationOverride {
  positions: [number, number][];
  names?: string[];
}

export interface StartOptions {
  scenario: string;
  q?: number;
  transform?: TransformSpec;
  destinations?: DestinationOverride;
}

// ---------------------------------------------------------------------------
// outgoing frames

export function startMessage(opts: StartOptions): string {
  const doc: Record<string, unknown> = {
    v: PROTOCOL_VERSION,
    type: "start",
    scenario: opts.scenario,
  };
  if (opts.q !== undefined) doc.q = opts.q;
  if (opts.transform !== undefined) doc.transform = opts.transform;
  if (opts.destinations !== undefined) doc.destinations = opts.destinations;
  return JSON.stringify(doc);
}

export function observeMessage(t: number, y: readonly number[]): string {
  return JSON.stringify({ v: PROTOCOL_VERSION, type: "observe", t, y });
}

export function predictMessage(at: number, top?: number): string {
  const doc: Record<string, unknown> = {
    v: PROTOCOL_VERSION,
    type: "predict",
    at,
  };
  if (top !== undefined) doc.top = top;
  return JSON.stringify(doc);
}

export function resetMessage(): string {
  return JSON.stringify({ v: PROTOCOL_VERSION, type: "reset" });
}

export function pongMessage(): string {
  return JSON.stringify({ v: PROTOCOL_VERSION, type: "pong" });
}

// ---------------------------------------------------------------------------
// incoming frames

export interface AckReply {
  type: "ack";
  q: number;
  backend: string;
  name: string;
  model_kind: string;
  obs_dim: number;
  n_dest: number;
  dest_names: string[];
  dest_positions: number[][];
  arrival_support: [number, number];
}

export interface ArrivalPosterior {
  T_grid: number[];
  v: number[];
}

export interface PosteriorReply {
  type: "posterior";
  t: number;
  dest_probs: number[];
  map: number;
  arrival: ArrivalPosterior;
  latency_us: number;
}

export interface PredictionReply {
  type: "prediction";
  at: number;
  weights: number[];
  weight_sum: number;
  means: number[][];
  covs: number[][][];
}

export interface ErrorReply {
  type: "error";
  code: string;
  message: string;
}

export interface PingReply {
  type: "ping";
}

export type ServerMessage =
  | AckReply
  | PosteriorReply
  | PredictionReply
  | ErrorReply
  | PingReply;

function isNumberArray(v: unknown): v is number[] {
  return Array.isArray(v) && v.every((x) => typeof x === "number");
}

function fail(detail: string): never {
  throw new Error(`bad server frame: ${detail}`);
}

/**
 * Parse and validate one server frame. Throws on anything outside the
 * documented schema so transport bugs surface instead of rendering as
 * NaN somewhere downstream.
 */
export function parseServerMessage(text: string): ServerMessage {
  let doc: unknown;
  try {
    doc = JSON.parse(text);
  } catch {
    fail("not JSON");
  }
  if (typeof doc !== "object" || doc === null || Array.isArray(doc)) {
    fail("not an object");
  }
  const obj = doc as Record<string, unknown>;
  if (obj.v !== PROTOCOL_VERSION) fail(`version ${String(obj.v)}`);

  switch (obj.type) {
    case "ping":
      return { type: "ping" };
    case "error": {
      if (typeof obj.code !== "string" || typeof obj.message !== "string") {
        fail("error without code/message");
      }
      return { type: "error", code: obj.code, message: obj.message };
    }
    case "ack": {
      if (
        typeof obj.q !== "number" ||
        typeof obj.backend !== "string" ||
        typeof obj.name !== "string" ||
        typeof obj.model_kind !== "string" ||
        typeof obj.obs_dim !== "number" ||
        typeof obj.n_dest !== "number" ||
        !Array.isArray(obj.dest_names) ||
        !Array.isArray(obj.dest_positions) ||
        !isNumberArray(obj.arrival_support) ||
        obj.arrival_support.length !== 2
      ) {
        fail("ack missing fields");
      }
      return obj as unknown as AckReply;
    }
    case "posterior": {
      const arrival = obj.arrival as Record<string, unknown> | undefined;
      if (
        typeof obj.t !== "number" ||
        !isNumberArray(obj.dest_probs) ||
        typeof obj.map !== "number" ||
        typeof obj.latency_us !== "number" ||
        arrival === undefined ||
        !isNumberArray(arrival.T_grid) ||
        !isNumberArray(arrival.v)
      ) {
        fail("posterior missing fields");
      }
      return obj as unknown as PosteriorReply;
    }
    case "prediction": {
      if (
        typeof obj.at !== "number" ||
        !isNumberArray(obj.weights) ||
        typeof obj.weight_sum !== "number" ||
        !Array.isArray(obj.means) ||
        !Array.isArray(obj.covs)
      ) {
        fail("prediction missing fields");
      }
      return obj as unknown as PredictionReply;
    }
    default:
      fail(`unknown type ${String(obj.type)}`);
  }
}

export interface NormalizedProbs {
  probs: number[];
  /** |sum - 1| of the raw input, before any fixing. */
  deviation: number;
}

/**
 * Defensive renormalization for display. The service already normalizes;
 * a deviation above NORMALIZATION_WARN means something upstream broke and
 * the UI shows a warning rather than silently rescaling.
 */
export function normalizeProbs(raw: readonly number[]): NormalizedProbs {
  let sum = 0;
  for (const p of raw) sum += p;
  const deviation = Math.abs(sum - 1);
  if (sum <= 0 || !Number.isFinite(sum)) {
    const n = raw.length || 1;
    return { probs: raw.map(() => 1 / n), deviation };
  }
  return { probs: raw.map((p) => p / sum), deviation };
}
