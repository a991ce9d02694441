import { describe, expect, it } from "vitest";

import type { PosteriorReply } from "../src/protocol.js";
import {
  fmtG9,
  parseTrial,
  posteriorLogCsv,
  probabilitySequencesEqual,
  serializeTrial,
  successRate,
  TrialRecorder,
} from "../src/trial.js";
import { FACILITATION_THRESHOLD, facilitationState } from "../src/view.js";

function reply(t: number, probs: number[], map: number): PosteriorReply {
  return {
    type: "posterior",
    t,
    dest_probs: probs,
    map,
    arrival: { T_grid: [2, 5, 8], v: [0.2, 0.5, 0.3] },
    latency_us: 400,
  };
}

function recordedTrial() {
  const rec = new TrialRecorder({
    layout: "ring",
    scenario: "pointing",
    q: 3,
    targetIndex: 1,
    destNames: ["icon_00", "icon_01"],
    tGrid: [],
  });
  rec.addSample(1 / 30, [100, 200]);
  rec.addPosterior(reply(1 / 30, [0.75, 0.25], 0));
  rec.addSample(2 / 30, [110, 210]);
  rec.addPosterior(reply(2 / 30, [0.4, 0.6], 1));
  rec.addSample(3 / 30, [120, 220]);
  rec.addPosterior(reply(3 / 30, [0.1, 0.9], 1));
  return rec.finish();
}

describe("TrialRecorder", () => {
  it("builds the success series against the target", () => {
    const trial = recordedTrial();
    expect(trial.success).toEqual([0, 1, 1]);
    expect(successRate(trial)).toBeCloseTo(2 / 3, 12);
    expect(trial.samples).toHaveLength(3);
  });

  it("adopts the arrival grid from the first reply when not preset", () => {
    const trial = recordedTrial();
    expect(trial.tGrid).toEqual([2, 5, 8]);
  });
});

describe("posteriorLogCsv", () => {
  it("matches the command-line log format", () => {
    const lines = posteriorLogCsv(recordedTrial()).trimEnd().split("\n");
    expect(lines[0]).toBe("t,map,u_1,u_2,v_1,v_2,v_3");
    const first = lines[1].split(",");
    expect(first[1]).toBe("0");
    expect(first[2]).toBe("0.75");
    expect(lines).toHaveLength(4);
  });

  it("writes floats with nine significant digits", () => {
    expect(fmtG9(1 / 6)).toBe("0.166666667");
    expect(fmtG9(2 / 30)).toBe("0.0666666667");
    expect(fmtG9(0.75)).toBe("0.75");
    expect(fmtG9(225)).toBe("225");
  });
});

describe("trial JSON round-trip", () => {
  it("parses what it serializes", () => {
    const trial = recordedTrial();
    const back = parseTrial(serializeTrial(trial));
    expect(back).toEqual(trial);
  });

  it("rejects files missing required pieces", () => {
    expect(() => parseTrial("[]")).toThrow();
    expect(() => parseTrial("{}")).toThrow(/missing/);
    const broken = JSON.parse(serializeTrial(recordedTrial()));
    broken.samples[1].y = [1];
    expect(() => parseTrial(JSON.stringify(broken))).toThrow(/sample/);
  });
});

describe("probabilitySequencesEqual", () => {
  it("demands exact equality, not approximate", () => {
    const a = recordedTrial().posteriors;
    const b = recordedTrial().posteriors;
    expect(probabilitySequencesEqual(a, b)).toBe(true);
    b[2].destProbs[1] += 1e-15;
    expect(probabilitySequencesEqual(a, b)).toBe(false);
  });

  it("compares arrival weights too", () => {
    const a = recordedTrial().posteriors;
    const b = recordedTrial().posteriors;
    b[0].arrival[0] = 0.2000001;
    expect(probabilitySequencesEqual(a, b)).toBe(false);
  });
});

describe("facilitation cue", () => {
  it("engages only past the threshold, on the MAP icon", () => {
    expect(FACILITATION_THRESHOLD).toBe(0.5);
    expect(facilitationState([0.2, 0.3, 0.5])).toEqual({
      index: 2,
      engaged: false,
    });
    expect(facilitationState([0.1, 0.2, 0.7])).toEqual({
      index: 2,
      engaged: true,
    });
    expect(facilitationState([0.51, 0.29, 0.2])).toEqual({
      index: 0,
      engaged: true,
    });
  });
});
