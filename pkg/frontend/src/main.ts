/**
 * Demo wiring: a live pointing surface over the streaming service.
 *
 * Pick a target icon, press anywhere open to start a trial, and move
 * toward the target; the pointer is sampled at a fixed rate, every sample
 * goes to the service, and every reply repaints the probability bars, the
 * arrival strip, and the facilitation cue. Finished trials can be saved
 * (CSV posterior log or JSON) and a saved JSON trial can be replayed
 * through a fresh session to confirm the probabilities come back
 * unchanged.
 */

import { bayLayout, ringLayout, type LayoutPlan } from "./layout.js";
import type { PosteriorReply } from "./protocol.js";
import { browserWire, InferenceSession } from "./session.js";
import { FixedRateSampler } from "./tracker.js";
import {
  parseTrial,
  posteriorLogCsv,
  probabilitySequencesEqual,
  serializeTrial,
  successRate,
  TrialRecorder,
  type TrialPosterior,
  type TrialRecord,
} from "./trial.js";
import { DemoView } from "./view.js";

const SAMPLE_HZ = 30;
const DWELL_SECONDS = 0.35;
/** Model region the bay preset shows (harbour line plus the approach). */
const BAY_VIEW = { x: [-20000, 20000] as [number, number], y: [-2000, 22000] as [number, number] };

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

const canvas = el<HTMLCanvasElement>("field");
const view = new DemoView(
  canvas,
  el("bars"),
  el<HTMLCanvasElement>("arrival"),
  el("banner"),
  el("status"),
);

const presetSel = el<HTMLSelectElement>("preset");
const qSel = el<HTMLSelectElement>("qsel");
const saveCsvBtn = el<HTMLButtonElement>("save-csv");
const saveJsonBtn = el<HTMLButtonElement>("save-json");
const replayInput = el<HTMLInputElement>("replay");
const trialLine = el("trial-line");

interface ScenarioInfo {
  name: string;
  dest_positions: number[][];
  dest_names: string[];
}

let scenarioIndex: Map<string, ScenarioInfo> = new Map();
let plan: LayoutPlan | null = null;
let targetIndex = 0;
let pointerPx: [number, number] | null = null;

type Phase = "idle" | "running" | "replaying";
let phase: Phase = "idle";
let recorder: TrialRecorder | null = null;
let lastTrial: TrialRecord | null = null;
let dwellTicks = 0;
let dwellIcon = -1;
let ackInfo = { backend: "?", q: 0, tGrid: [] as number[] };
let replay: {
  record: TrialRecord;
  index: number;
  collected: TrialPosterior[];
} | null = null;

const sampler = new FixedRateSampler(SAMPLE_HZ);

const wsUrl = `${location.protocol === "https:" ? "wss" : "ws"}://${location.host}/ws`;
const session = new InferenceSession(
  browserWire,
  wsUrl,
  { scenario: "pointing" },
  {
    onAck(ack) {
      ackInfo = { backend: ack.backend, q: ack.q, tGrid: [] };
      view.clearPosterior();
      if (replay && replay.index === 0) {
        sendReplaySample();
      }
      setStatus(`connected (${ack.backend}, q=${ack.q})`);
    },
    onPosterior(reply, clientLatencyMs) {
      handlePosterior(reply, clientLatencyMs);
    },
    onServerError(err) {
      if (err.code === "window_exceeded" && phase === "running") {
        endTrial("arrival window exhausted");
        return;
      }
      setStatus(`service error ${err.code}: ${err.message}`);
    },
    onDown(reason) {
      view.showBanner(`connection lost (${reason}); reconnecting`);
      if (phase === "running") endTrial("connection lost");
      if (phase === "replaying") finishReplay(null, "connection lost");
    },
    onUp() {
      view.hideBanner();
    },
    onProtocolProblem(detail) {
      setStatus(detail);
    },
  },
);

function setStatus(text: string): void {
  view.setStatus(text);
}

function currentPlan(): LayoutPlan {
  if (!plan) throw new Error("no layout yet");
  return plan;
}

function applyPreset(): void {
  if (phase === "running") endTrial("layout changed");
  const q = parseInt(qSel.value, 10);
  const w = canvas.width;
  const h = canvas.height;
  if (presetSel.value === "bay") {
    const info = scenarioIndex.get("bay");
    if (!info) {
      setStatus("bay scenario not offered by this server");
      return;
    }
    plan = bayLayout(w, h, info.dest_positions, info.dest_names, {
      q,
      viewBox: BAY_VIEW,
    });
  } else {
    plan = ringLayout(w, h, { q });
  }
  targetIndex = Math.min(targetIndex, plan.icons.length - 1);
  view.setLayout(plan.icons, plan.iconRadiusPx);
  view.setTarget(targetIndex);
  trialLine.textContent = "press open space to start a trial";
  session.restart(plan.start);
}

function iconAt(p: [number, number]): number {
  const lp = currentPlan();
  for (let j = 0; j < lp.icons.length; j++) {
    const icon = lp.icons[j];
    const dx = p[0] - icon.x;
    const dy = p[1] - icon.y;
    if (Math.hypot(dx, dy) <= lp.iconRadiusPx * 1.3) return j;
  }
  return -1;
}

function beginTrial(): void {
  if (!session.open || !plan) return;
  recorder = new TrialRecorder({
    layout: plan.kind,
    scenario: plan.start.scenario,
    q: ackInfo.q || plan.start.q || 9,
    targetIndex,
    destNames: plan.icons.map((i) => i.name),
    tGrid: ackInfo.tGrid,
  });
  dwellTicks = 0;
  dwellIcon = -1;
  phase = "running";
  trialLine.textContent = "tracking; hold on an icon to select";
  sampler.start((elapsed) => {
    if (!pointerPx || !recorder) return;
    const sent = session.observe(elapsed, pointerPx);
    if (sent) recorder.addSample(elapsed, pointerPx);
    const over = iconAt(pointerPx);
    if (over >= 0 && over === dwellIcon) {
      dwellTicks += 1;
      if (dwellTicks >= DWELL_SECONDS * SAMPLE_HZ) {
        endTrial(`selected ${currentPlan().icons[over].name}`);
      }
    } else {
      dwellIcon = over;
      dwellTicks = 0;
    }
  });
}

function endTrial(note: string): void {
  sampler.stop();
  if (recorder) {
    lastTrial = recorder.finish();
    recorder = null;
    const rate = successRate(lastTrial);
    trialLine.textContent =
      `${note}; MAP matched the target on ` +
      `${(100 * rate).toFixed(0)}% of ${lastTrial.posteriors.length} replies`;
    saveCsvBtn.disabled = false;
    saveJsonBtn.disabled = false;
  } else {
    trialLine.textContent = note;
  }
  phase = "idle";
  session.reset();
}

function handlePosterior(reply: PosteriorReply, clientLatencyMs: number): void {
  if (ackInfo.tGrid.length === 0) ackInfo.tGrid = [...reply.arrival.T_grid];
  view.setPosterior(
    reply.t,
    reply.dest_probs,
    reply.map,
    reply.arrival.v,
    reply.arrival.T_grid,
  );
  setStatus(
    `reply ${reply.latency_us} us inference, ` +
      `${clientLatencyMs.toFixed(1)} ms round trip`,
  );
  if (phase === "running" && recorder) {
    recorder.addPosterior(reply);
  } else if (phase === "replaying" && replay) {
    replay.collected.push({
      t: reply.t,
      destProbs: [...reply.dest_probs],
      map: reply.map,
      arrival: [...reply.arrival.v],
    });
    replay.index += 1;
    if (replay.index < replay.record.samples.length) {
      sendReplaySample();
    } else {
      const same = probabilitySequencesEqual(
        replay.record.posteriors,
        replay.collected,
      );
      finishReplay(same, same ? "replay identical" : "replay diverged");
    }
  }
}

function sendReplaySample(): void {
  if (!replay) return;
  const s = replay.record.samples[replay.index];
  session.observe(s.t, s.y);
}

function startReplay(record: TrialRecord): void {
  if (phase === "running") endTrial("replay requested");
  replay = { record, index: 0, collected: [] };
  phase = "replaying";
  trialLine.textContent = `replaying ${record.samples.length} samples`;
  view.setTarget(record.targetIndex);
  // Fresh bank first; the reset ack triggers the first sample.
  session.reset();
}

function finishReplay(identical: boolean | null, note: string): void {
  replay = null;
  phase = "idle";
  trialLine.textContent =
    identical === null ? note : `${note} (${identical ? "ok" : "check transport"})`;
  view.setTarget(targetIndex);
  session.reset();
}

function download(name: string, mime: string, content: string): void {
  const blob = new Blob([content], { type: mime });
  const a = document.createElement("a");
  a.href = URL.createObjectURL(blob);
  a.download = name;
  a.click();
  URL.revokeObjectURL(a.href);
}

// ---------------------------------------------------------------------------
// events

canvas.addEventListener("pointermove", (ev) => {
  const rect = canvas.getBoundingClientRect();
  pointerPx = [ev.clientX - rect.left, ev.clientY - rect.top];
  view.setPointer(pointerPx);
});

canvas.addEventListener("pointerleave", () => {
  pointerPx = null;
  view.setPointer(null);
});

canvas.addEventListener("pointerdown", (ev) => {
  const rect = canvas.getBoundingClientRect();
  const p: [number, number] = [ev.clientX - rect.left, ev.clientY - rect.top];
  if (phase !== "idle") return;
  const hit = iconAt(p);
  if (hit >= 0) {
    targetIndex = hit;
    view.setTarget(hit);
    trialLine.textContent = `target: ${currentPlan().icons[hit].name}`;
  } else {
    beginTrial();
  }
});

presetSel.addEventListener("change", applyPreset);
qSel.addEventListener("change", applyPreset);

saveCsvBtn.addEventListener("click", () => {
  if (lastTrial) download("trial.csv", "text/csv", posteriorLogCsv(lastTrial));
});

saveJsonBtn.addEventListener("click", () => {
  if (lastTrial) {
    download("trial.json", "application/json", serializeTrial(lastTrial));
  }
});

replayInput.addEventListener("change", async () => {
  const file = replayInput.files?.[0];
  replayInput.value = "";
  if (!file || phase === "replaying") return;
  try {
    startReplay(parseTrial(await file.text()));
  } catch (err) {
    trialLine.textContent = `could not load trial: ${String(err)}`;
  }
});

// ---------------------------------------------------------------------------
// boot

async function boot(): Promise<void> {
  try {
    const res = await fetch("/scenarios");
    const doc = (await res.json()) as { scenarios: ScenarioInfo[] };
    scenarioIndex = new Map(doc.scenarios.map((s) => [s.name, s]));
  } catch {
    view.showBanner("could not list scenarios; is the service running?");
  }
  applyPreset();
  session.connect();
  const frame = () => {
    view.render();
    requestAnimationFrame(frame);
  };
  requestAnimationFrame(frame);
}

void boot();
