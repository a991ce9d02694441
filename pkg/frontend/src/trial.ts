/**
 * Trial records: what the pointer did, what the service inferred, and
 * whether the MAP destination matched the intended target at each step.
 *
 * Records serialize two ways. JSON keeps everything and replays exactly
 * (same timestamps, same observations, byte-identical probabilities back
 * from a deterministic server). CSV matches the command-line tool's
 * posterior log so both pipelines feed the same offline analysis.
 */

import type { PosteriorReply } from "./protocol.js";

export interface TrialSample {
  /** Client-units time of the observe message. */
  t: number;
  y: [number, number];
}

export interface TrialPosterior {
  /** Model-units time echoed by the service. */
  t: number;
  destProbs: number[];
  map: number;
  arrival: number[];
}

export interface TrialMeta {
  layout: string;
  scenario: string;
  q: number;
  targetIndex: number;
  destNames: string[];
  tGrid: number[];
}

export interface TrialRecord extends TrialMeta {
  samples: TrialSample[];
  posteriors: TrialPosterior[];
  /** Per-observation success series: 1 when MAP equals the target. */
  success: number[];
}

export class TrialRecorder {
  private meta: TrialMeta;
  private samples: TrialSample[] = [];
  private posteriors: TrialPosterior[] = [];
  private success: number[] = [];

  constructor(meta: TrialMeta) {
    this.meta = { ...meta, destNames: [...meta.destNames], tGrid: [...meta.tGrid] };
  }

  addSample(t: number, y: readonly [number, number]): void {
    this.samples.push({ t, y: [y[0], y[1]] });
  }

  addPosterior(reply: PosteriorReply): void {
    if (this.meta.tGrid.length === 0) {
      this.meta.tGrid = [...reply.arrival.T_grid];
    }
    this.posteriors.push({
      t: reply.t,
      destProbs: [...reply.dest_probs],
      map: reply.map,
      arrival: [...reply.arrival.v],
    });
    this.success.push(reply.map === this.meta.targetIndex ? 1 : 0);
  }

  get sampleCount(): number {
    return this.samples.length;
  }

  finish(): TrialRecord {
    return {
      ...this.meta,
      samples: this.samples,
      posteriors: this.posteriors,
      success: this.success,
    };
  }
}

/** Fraction of observations whose MAP destination was the target. */
export function successRate(rec: TrialRecord): number {
  if (rec.success.length === 0) return 0;
  let s = 0;
  for (const v of rec.success) s += v;
  return s / rec.success.length;
}

/** Shortest decimal with 9 significant digits, as the CLI writes floats. */
export function fmtG9(x: number): string {
  if (!Number.isFinite(x)) return String(x);
  return String(Number(x.toPrecision(9)));
}

/**
 * The CLI's per-observation posterior log: t, MAP index, one u column per
 * destination, one v column per arrival-time candidate.
 */
export function posteriorLogCsv(rec: TrialRecord): string {
  const nDest = rec.destNames.length;
  const q = rec.tGrid.length;
  const header = ["t", "map"];
  for (let j = 1; j <= nDest; j++) header.push(`u_${j}`);
  for (let j = 1; j <= q; j++) header.push(`v_${j}`);
  const lines = [header.join(",")];
  for (const p of rec.posteriors) {
    const row = [fmtG9(p.t), String(p.map)];
    for (const u of p.destProbs) row.push(fmtG9(u));
    for (const v of p.arrival) row.push(fmtG9(v));
    lines.push(row.join(","));
  }
  return lines.join("\n") + "\n";
}

export function serializeTrial(rec: TrialRecord): string {
  return JSON.stringify(rec, null, 1);
}

function isNumberArray(v: unknown): v is number[] {
  return Array.isArray(v) && v.every((x) => typeof x === "number");
}

/** Parse a saved trial, checking enough shape to replay it safely. */
export function parseTrial(text: string): TrialRecord {
  const doc = JSON.parse(text) as Record<string, unknown>;
  if (typeof doc !== "object" || doc === null) {
    throw new Error("trial file is not an object");
  }
  if (
    typeof doc.layout !== "string" ||
    typeof doc.scenario !== "string" ||
    typeof doc.q !== "number" ||
    typeof doc.targetIndex !== "number" ||
    !Array.isArray(doc.destNames) ||
    !isNumberArray(doc.tGrid) ||
    !Array.isArray(doc.samples) ||
    !Array.isArray(doc.posteriors) ||
    !isNumberArray(doc.success)
  ) {
    throw new Error("trial file is missing fields");
  }
  for (const s of doc.samples as unknown[]) {
    const row = s as Record<string, unknown>;
    if (typeof row.t !== "number" || !isNumberArray(row.y) || row.y.length !== 2) {
      throw new Error("bad trial sample");
    }
  }
  for (const p of doc.posteriors as unknown[]) {
    const row = p as Record<string, unknown>;
    if (
      typeof row.t !== "number" ||
      !isNumberArray(row.destProbs) ||
      typeof row.map !== "number" ||
      !isNumberArray(row.arrival)
    ) {
      throw new Error("bad trial posterior");
    }
  }
  return doc as unknown as TrialRecord;
}

/**
 * Exact equality of probability sequences; a deterministic server replaying
 * the same observations must reproduce these bit for bit.
 */
export function probabilitySequencesEqual(
  a: readonly TrialPosterior[],
  b: readonly TrialPosterior[],
): boolean {
  if (a.length !== b.length) return false;
  for (let i = 0; i < a.length; i++) {
    const pa = a[i];
    const pb = b[i];
    if (pa.destProbs.length !== pb.destProbs.length) return false;
    for (let j = 0; j < pa.destProbs.length; j++) {
      if (pa.destProbs[j] !== pb.destProbs[j]) return false;
    }
    if (pa.arrival.length !== pb.arrival.length) return false;
    for (let j = 0; j < pa.arrival.length; j++) {
      if (pa.arrival[j] !== pb.arrival[j]) return false;
    }
  }
  return true;
}
