// End-to-end round-trip against a live annotation service: annotate 17
// joints on 3 frames, interpolate the gaps, smooth with sigma=1, save,
// reload. Server responses are checked against independent linearity and
// Gaussian-kernel oracles computed here, and the reloaded state must render
// joints identical to what was saved.

import { spawn, spawnSync, type ChildProcess } from "node:child_process";
import { mkdtempSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiClient, RevisionConflictError } from "../src/api.js";
import { AnnotationStore } from "../src/state.js";
import type { JointGrid } from "../src/types.js";

const PORT = 18640 + (process.pid % 1000);
const BASE = `http://127.0.0.1:${PORT}`;
const FRAMES = 9;
const JOINTS = 17;

let root = "";
let server: ChildProcess | null = null;
const api = new ApiClient(BASE);

// deterministic click positions; some land outside any image on purpose
function clickX(frame: number, joint: number): number {
  return joint * 7.5 + frame * 3.25 - 10.5;
}

function clickY(frame: number, joint: number): number {
  return 96.75 - joint * 2.5 + frame * 1.125;
}

// --- oracles (test-side only; the UI itself holds no skeleton math) --------

function gaussianKernel(sigma: number): number[] {
  if (sigma === 0) return [1];
  const radius = Math.ceil(3 * sigma);
  const weights: number[] = [];
  for (let k = -radius; k <= radius; k++) {
    weights.push(Math.exp(-(k * k) / (2 * sigma * sigma)));
  }
  const total = weights.reduce((a, b) => a + b, 0);
  return weights.map((w) => w / total);
}

function reflectIndex(index: number, length: number): number {
  let i = index;
  while (i < 0 || i >= length) {
    if (i < 0) i = -i;
    if (i >= length) i = 2 * (length - 1) - i;
  }
  return i;
}

function smoothSeries(series: number[], sigma: number): number[] {
  const kernel = gaussianKernel(sigma);
  const radius = (kernel.length - 1) / 2;
  return series.map((_, t) => {
    let acc = 0;
    for (let k = -radius; k <= radius; k++) {
      acc += kernel[k + radius] * series[reflectIndex(t + k, series.length)];
    }
    return acc;
  });
}

function copyGrid(grid: JointGrid): JointGrid {
  return grid.map((f) => f.map((j) => (j === null ? null : [j[0], j[1]])));
}

// --- server lifecycle -------------------------------------------------------

async function waitForHealth(timeoutMs: number): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  for (;;) {
    try {
      const response = await fetch(`${BASE}/healthz`);
      if (response.ok) return;
    } catch {
      // not up yet
    }
    if (Date.now() > deadline) throw new Error("service never became healthy");
    await new Promise((resolve) => setTimeout(resolve, 150));
  }
}

beforeAll(async () => {
  root = mkdtempSync(join(tmpdir(), "skelalign-ui-"));
  const synth = spawnSync(
    "python3",
    [
      "-m",
      "skelalign.cli",
      "synth",
      "--out",
      root,
      "--classes",
      "1",
      "--samples",
      "1",
      "--frames",
      String(FRAMES),
      "--noise",
      "0",
      "--seed",
      "0",
      "--aligned",
    ],
    { encoding: "utf8" },
  );
  expect(synth.status, synth.stderr).toBe(0);
  server = spawn(
    "python3",
    ["-m", "skelalign.cli", "serve", "--root", root, "--port", String(PORT)],
    { stdio: "ignore" },
  );
  await waitForHealth(60_000);
});

afterAll(() => {
  server?.kill();
  if (root) rmSync(root, { recursive: true, force: true });
});

describe("UI round-trip against the live service", () => {
  it("annotates, interpolates, smooths, saves and reloads identically", async () => {
    const clips = await api.listClips();
    expect(clips).toHaveLength(1);
    const id = clips[0].id;
    expect(clips[0].frame_count).toBe(FRAMES);

    const store = new AnnotationStore();
    store.loadClip(await api.getClip(id), await api.getAnnotations(id));
    expect(store.revision).toBe(1);
    expect(store.joints2d.flat().every((j) => j === null)).toBe(true);

    // annotate all 17 joints on frames 0, 4 and 8 through the click flow
    for (const frame of [0, 4, 8]) {
      store.scrub(frame);
      store.selectJoint(0);
      for (let click = 0; click < JOINTS; click++) {
        const joint = store.activeJoint;
        store.annotate(clickX(frame, joint), clickY(frame, joint));
      }
      expect(store.frameComplete(frame)).toBe(true);
    }

    // save the keyframes
    store.adoptServer(
      await api.putAnnotations(id, store.revision, store.joints2d),
    );
    expect(store.revision).toBe(2);
    expect(store.dirty).toBe(false);

    // interpolate every joint across both 4-frame gaps (0..4 and 4..8),
    // exactly as repeated presses of the interpolate button would
    for (let joint = 0; joint < JOINTS; joint++) {
      expect(store.canInterpolate(joint)).toBe(true);
      for (
        let gap = store.nextGapFor(joint);
        gap !== null;
        gap = store.nextGapFor(joint)
      ) {
        store.adoptServer(
          await api.interpolate(id, store.revision, joint, gap[0], gap[1]),
        );
      }
    }

    // linearity oracle on every interpolated frame
    for (let joint = 0; joint < JOINTS; joint++) {
      for (const [a, b] of [
        [0, 4],
        [4, 8],
      ] as const) {
        for (let frame = a + 1; frame < b; frame++) {
          const w = (frame - a) / (b - a);
          const expectedX =
            clickX(a, joint) + w * (clickX(b, joint) - clickX(a, joint));
          const expectedY =
            clickY(a, joint) + w * (clickY(b, joint) - clickY(a, joint));
          const got = store.joints2d[frame][joint];
          expect(got).not.toBeNull();
          expect(Math.abs(got![0] - expectedX)).toBeLessThan(1e-6);
          expect(Math.abs(got![1] - expectedY)).toBeLessThan(1e-6);
        }
      }
    }

    // sigma=0 smoothing is the identity
    const beforeNoop = copyGrid(store.joints2d);
    store.adoptServer(await api.smooth(id, store.revision, 0));
    expect(store.joints2d).toEqual(beforeNoop);

    // smooth with sigma=1 and compare against the kernel oracle
    const preSmooth = copyGrid(store.joints2d);
    store.adoptServer(await api.smooth(id, store.revision, 1));
    for (let joint = 0; joint < JOINTS; joint++) {
      for (const coord of [0, 1] as const) {
        const series = preSmooth.map((frame) => frame[joint]![coord]);
        const oracle = smoothSeries(series, 1);
        for (let frame = 0; frame < FRAMES; frame++) {
          const got = store.joints2d[frame][joint]![coord];
          expect(Math.abs(got - oracle[frame])).toBeLessThan(1e-6);
        }
      }
    }

    // save, then reload into a fresh store: identical joints
    store.adoptServer(
      await api.putAnnotations(id, store.revision, store.joints2d),
    );
    const savedRevision = store.revision;
    const reloaded = new AnnotationStore();
    reloaded.loadClip(await api.getClip(id), await api.getAnnotations(id));
    expect(reloaded.revision).toBe(savedRevision);
    expect(reloaded.joints2d).toEqual(store.joints2d);

    // a stale write is rejected and local edits survive the conflict
    reloaded.scrub(0);
    reloaded.selectJoint(0);
    reloaded.annotate(-500.25, 12.5);
    const stale = await api
      .putAnnotations(id, savedRevision - 1, reloaded.joints2d)
      .then(() => null)
      .catch((err: unknown) => err);
    expect(stale).toBeInstanceOf(RevisionConflictError);
    reloaded.markConflict((stale as RevisionConflictError).currentRevision);
    expect(reloaded.joints2d[0][0]).toEqual([-500.25, 12.5]);
    reloaded.resolveConflict(await api.getAnnotations(id), true);
    expect(reloaded.revision).toBe(savedRevision);
    reloaded.adoptServer(
      await api.putAnnotations(id, reloaded.revision, reloaded.joints2d),
    );
    expect(reloaded.joints2d[0][0]).toEqual([-500.25, 12.5]);
  });
});
