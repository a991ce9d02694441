/**
 * Canvas and DOM rendering: the icon field, the facilitation cue, the
 * destination-probability bars, and the arrival-time strip.
 *
 * All state lands in a plain struct that a single requestAnimationFrame
 * loop paints; network callbacks only write state (newest timestamp wins),
 * they never draw.
 */

import type { IconPx } from "./layout.js";
import { NORMALIZATION_WARN, normalizeProbs } from "./protocol.js";

/** MAP icon grows and recolors only once its probability clears this. */
export const FACILITATION_THRESHOLD = 0.5;

export interface FacilitationState {
  index: number;
  engaged: boolean;
}

/** Which icon to emphasize, if any. Pure; exercised directly by tests. */
export function facilitationState(
  destProbs: readonly number[],
): FacilitationState {
  let index = 0;
  for (let j = 1; j < destProbs.length; j++) {
    if (destProbs[j] > destProbs[index]) index = j;
  }
  return { index, engaged: destProbs[index] > FACILITATION_THRESHOLD };
}

interface PosteriorView {
  t: number;
  probs: number[];
  map: number;
  arrival: number[];
  tGrid: number[];
}

const COLORS = {
  bg: "#10141a",
  icon: "#3d4a5c",
  iconEdge: "#5b6b80",
  target: "#e0b541",
  cue: "#4ec9b0",
  pointer: "#d4d4d4",
  text: "#c8d0da",
};

export class DemoView {
  private canvas: HTMLCanvasElement;
  private ctx: CanvasRenderingContext2D;
  private barsEl: HTMLElement;
  private arrivalEl: HTMLCanvasElement;
  private bannerEl: HTMLElement;
  private statusEl: HTMLElement;

  private icons: IconPx[] = [];
  private iconRadius = 16;
  private targetIndex = -1;
  private posterior: PosteriorView | null = null;
  private pointer: [number, number] | null = null;
  private normWarning = false;

  constructor(
    canvas: HTMLCanvasElement,
    bars: HTMLElement,
    arrival: HTMLCanvasElement,
    banner: HTMLElement,
    status: HTMLElement,
  ) {
    const ctx = canvas.getContext("2d");
    if (!ctx) throw new Error("canvas 2d context unavailable");
    this.canvas = canvas;
    this.ctx = ctx;
    this.barsEl = bars;
    this.arrivalEl = arrival;
    this.bannerEl = banner;
    this.statusEl = status;
  }

  setLayout(icons: IconPx[], iconRadius: number): void {
    this.icons = icons;
    this.iconRadius = iconRadius;
    this.posterior = null;
    this.normWarning = false;
    this.buildBars();
  }

  setTarget(index: number): void {
    this.targetIndex = index;
  }

  /** Newest model timestamp wins; replies from before a reset are stale. */
  setPosterior(
    t: number,
    destProbs: number[],
    map: number,
    arrival: number[],
    tGrid: number[],
  ): void {
    if (this.posterior && t < this.posterior.t) return;
    const { probs, deviation } = normalizeProbs(destProbs);
    this.normWarning = deviation > NORMALIZATION_WARN;
    this.posterior = { t, probs, map, arrival, tGrid };
  }

  clearPosterior(): void {
    this.posterior = null;
    this.normWarning = false;
  }

  setPointer(p: [number, number] | null): void {
    this.pointer = p;
  }

  setStatus(text: string): void {
    this.statusEl.textContent = text;
  }

  showBanner(text: string): void {
    this.bannerEl.textContent = text;
    this.bannerEl.style.display = "block";
  }

  hideBanner(): void {
    this.bannerEl.style.display = "none";
  }

  render(): void {
    const ctx = this.ctx;
    const w = this.canvas.width;
    const h = this.canvas.height;
    ctx.fillStyle = COLORS.bg;
    ctx.fillRect(0, 0, w, h);

    const probs = this.posterior?.probs ?? null;
    const cue = probs ? facilitationState(probs) : null;

    for (let j = 0; j < this.icons.length; j++) {
      const icon = this.icons[j];
      const emphasized = cue !== null && cue.engaged && cue.index === j;
      const r = emphasized ? this.iconRadius * 1.6 : this.iconRadius;
      ctx.beginPath();
      ctx.arc(icon.x, icon.y, r, 0, 2 * Math.PI);
      ctx.fillStyle = emphasized ? COLORS.cue : COLORS.icon;
      ctx.fill();
      ctx.lineWidth = j === this.targetIndex ? 3 : 1;
      ctx.strokeStyle = j === this.targetIndex ? COLORS.target : COLORS.iconEdge;
      ctx.stroke();
      ctx.fillStyle = COLORS.text;
      ctx.font = "10px sans-serif";
      ctx.textAlign = "center";
      ctx.fillText(icon.name, icon.x, icon.y + r + 12);
    }

    if (this.pointer) {
      ctx.beginPath();
      ctx.arc(this.pointer[0], this.pointer[1], 4, 0, 2 * Math.PI);
      ctx.fillStyle = COLORS.pointer;
      ctx.fill();
    }

    if (this.normWarning) {
      ctx.fillStyle = "#e06c75";
      ctx.font = "13px sans-serif";
      ctx.textAlign = "left";
      ctx.fillText("probabilities failed to sum to 1", 12, 20);
    }

    this.paintBars();
    this.paintArrival();
  }

  // -------------------------------------------------------------------

  private buildBars(): void {
    this.barsEl.textContent = "";
    for (const icon of this.icons) {
      const row = document.createElement("div");
      row.className = "bar-row";
      const label = document.createElement("span");
      label.className = "bar-label";
      label.textContent = icon.name;
      const track = document.createElement("div");
      track.className = "bar-track";
      const fill = document.createElement("div");
      fill.className = "bar-fill";
      track.appendChild(fill);
      const value = document.createElement("span");
      value.className = "bar-value";
      row.append(label, track, value);
      this.barsEl.appendChild(row);
    }
  }

  private paintBars(): void {
    const rows = this.barsEl.children;
    const probs = this.posterior?.probs;
    const cue = probs ? facilitationState(probs) : null;
    for (let j = 0; j < rows.length; j++) {
      const row = rows[j] as HTMLElement;
      const fill = row.querySelector(".bar-fill") as HTMLElement;
      const value = row.querySelector(".bar-value") as HTMLElement;
      const p = probs ? probs[j] : 0;
      fill.style.width = `${(100 * p).toFixed(1)}%`;
      fill.style.background =
        cue && cue.engaged && cue.index === j ? COLORS.cue : "#6d8dc4";
      value.textContent = probs ? p.toFixed(3) : "";
      row.classList.toggle("bar-target", j === this.targetIndex);
    }
  }

  private paintArrival(): void {
    const ctx = this.arrivalEl.getContext("2d");
    if (!ctx) return;
    const w = this.arrivalEl.width;
    const h = this.arrivalEl.height;
    ctx.fillStyle = COLORS.bg;
    ctx.fillRect(0, 0, w, h);
    const post = this.posterior;
    if (!post || post.arrival.length === 0) return;
    const q = post.arrival.length;
    const peak = Math.max(...post.arrival, 1e-12);
    const cell = w / q;
    for (let j = 0; j < q; j++) {
      const a = post.arrival[j] / peak;
      ctx.fillStyle = `rgba(110, 180, 255, ${(0.15 + 0.85 * a).toFixed(3)})`;
      ctx.fillRect(j * cell + 1, 4, cell - 2, h - 18);
    }
    ctx.fillStyle = COLORS.text;
    ctx.font = "10px sans-serif";
    ctx.textAlign = "left";
    ctx.fillText(fmtShort(post.tGrid[0]), 2, h - 3);
    ctx.textAlign = "right";
    ctx.fillText(fmtShort(post.tGrid[q - 1]), w - 2, h - 3);
  }
}

function fmtShort(x: number): string {
  return Math.abs(x) >= 100 ? x.toFixed(0) : x.toFixed(1);
}
