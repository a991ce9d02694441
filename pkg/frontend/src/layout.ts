/**
 * Icon layout presets and the client-to-model coordinate mapping.
 *
 * A layout plan owns everything a session start needs: icon positions in
 * canvas pixels, the affine transform the service should apply, and an
 * optional destination override. The service works in model coordinates;
 * the browser works in pixels; `model = scale * px + offset` ties them
 * together (one scalar scale, so screen-vertical flips are absorbed by
 * the override rather than the transform).
 */

import type { StartOptions, TransformSpec } from "./protocol.js";

export interface IconPx {
  name: string;
  x: number;
  y: number;
}

export interface LayoutPlan {
  kind: "ring" | "bay";
  icons: IconPx[];
  start: StartOptions;
  /** Client seconds to model time units (same value as the transform's). */
  timeScale: number;
  iconRadiusPx: number;
  modelFromPx(p: readonly [number, number]): [number, number];
  pxFromModel(m: readonly [number, number]): [number, number];
}

export interface ViewBox {
  x: [number, number];
  y: [number, number];
}

function affine(scale: number, offset: [number, number]) {
  return {
    modelFromPx(p: readonly [number, number]): [number, number] {
      return [scale * p[0] + offset[0], scale * p[1] + offset[1]];
    },
    pxFromModel(m: readonly [number, number]): [number, number] {
      return [(m[0] - offset[0]) / scale, (m[1] - offset[1]) / scale];
    },
  };
}

/** The packaged pointing scenario is tuned for targets on a ring of this
 * model radius; the pixel ring is scaled onto it. */
export const RING_MODEL_RADIUS = 10;

export interface RingOptions {
  icons?: number;
  q?: number;
  timeScale?: number;
}

/**
 * Icons evenly spaced on a circle, sized to the canvas, sent to the
 * service as a destination override on the "pointing" scenario.
 */
export function ringLayout(
  width: number,
  height: number,
  opts: RingOptions = {},
): LayoutPlan {
  const n = opts.icons ?? 21;
  if (n < 2) throw new Error("ring needs at least 2 icons");
  const timeScale = opts.timeScale ?? 1.0;
  const cx = width / 2;
  const cy = height / 2;
  const radiusPx = 0.38 * Math.min(width, height);
  const icons: IconPx[] = [];
  for (let k = 0; k < n; k++) {
    const angle = (2 * Math.PI * k) / n;
    icons.push({
      name: `icon_${String(k).padStart(2, "0")}`,
      x: cx + radiusPx * Math.cos(angle),
      y: cy + radiusPx * Math.sin(angle),
    });
  }
  const scale = RING_MODEL_RADIUS / radiusPx;
  const offset: [number, number] = [-scale * cx, -scale * cy];
  const transform: TransformSpec = {
    scale,
    offset,
    time_scale: timeScale,
  };
  const spacing = 2 * radiusPx * Math.sin(Math.PI / n);
  return {
    kind: "ring",
    icons,
    start: {
      scenario: "pointing",
      q: opts.q ?? 9,
      transform,
      destinations: {
        positions: icons.map((i) => [i.x, i.y] as [number, number]),
        names: icons.map((i) => i.name),
      },
    },
    timeScale,
    iconRadiusPx: Math.min(22, 0.42 * spacing),
    ...affine(scale, offset),
  };
}

export interface BayOptions {
  q?: number;
  timeScale?: number;
  /** Model-coordinate region to fit into the canvas. Defaults to the
   * destinations' bounding box padded enough to keep a usable aspect. */
  viewBox?: ViewBox;
}

function defaultViewBox(positions: readonly number[][]): ViewBox {
  let x0 = Infinity;
  let x1 = -Infinity;
  let y0 = Infinity;
  let y1 = -Infinity;
  for (const p of positions) {
    x0 = Math.min(x0, p[0]);
    x1 = Math.max(x1, p[0]);
    y0 = Math.min(y0, p[1]);
    y1 = Math.max(y1, p[1]);
  }
  const xSpan = Math.max(x1 - x0, 1e-9);
  const padX = 0.1 * xSpan;
  x0 -= padX;
  x1 += padX;
  // A line of destinations has zero vertical extent; open the box up so
  // approaches from either side stay on screen.
  const minYSpan = 0.55 * (x1 - x0);
  if (y1 - y0 < minYSpan) {
    const mid = (y0 + y1) / 2;
    y0 = mid - minYSpan / 2;
    y1 = mid + minYSpan / 2;
  }
  return { x: [x0, x1], y: [y0, y1] };
}

/**
 * Scenario-native layout: destinations stay where the scenario put them
 * and the canvas maps onto a model-coordinate view box. Used for the
 * harbour toy, where geometry is part of the problem.
 */
export function bayLayout(
  width: number,
  height: number,
  destPositions: readonly number[][],
  destNames: readonly string[],
  opts: BayOptions = {},
): LayoutPlan {
  if (destPositions.length === 0) throw new Error("no destinations");
  const timeScale = opts.timeScale ?? 20.0;
  const box = opts.viewBox ?? defaultViewBox(destPositions);
  const margin = 40;
  const xSpan = box.x[1] - box.x[0];
  const ySpan = box.y[1] - box.y[0];
  const scale = Math.max(
    xSpan / Math.max(width - 2 * margin, 1),
    ySpan / Math.max(height - 2 * margin, 1),
  );
  const center: [number, number] = [
    (box.x[0] + box.x[1]) / 2,
    (box.y[0] + box.y[1]) / 2,
  ];
  const offset: [number, number] = [
    center[0] - scale * (width / 2),
    center[1] - scale * (height / 2),
  ];
  const map = affine(scale, offset);
  const icons: IconPx[] = destPositions.map((p, j) => {
    const [x, y] = map.pxFromModel([p[0], p[1]]);
    return { name: destNames[j] ?? `d${j}`, x, y };
  });
  return {
    kind: "bay",
    icons,
    start: {
      scenario: "bay",
      q: opts.q ?? 9,
      transform: { scale, offset, time_scale: timeScale },
    },
    timeScale,
    iconRadiusPx: 16,
    ...map,
  };
}
