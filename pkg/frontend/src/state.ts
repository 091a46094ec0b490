// Annotation session state. Holds the working copy of the 2D joints plus the
// server revision it was based on; all numerical edits beyond raw clicks
// (interpolation, smoothing, imports) happen server-side and re-enter through
// adoptServer().

import type {
  AnnotationsResponse,
  ClipDetail,
  FrameJoints2,
  JointGrid,
} from "./types.js";

export function emptyGrid(frameCount: number, jointCount: number): JointGrid {
  const grid: JointGrid = [];
  for (let f = 0; f < frameCount; f++) {
    grid.push(new Array(jointCount).fill(null));
  }
  return grid;
}

function copyGrid(grid: JointGrid): JointGrid {
  return grid.map((frame) =>
    frame.map((joint) => (joint === null ? null : [joint[0], joint[1]])),
  );
}

export interface Conflict {
  serverRevision: number;
}

export class AnnotationStore {
  clip: ClipDetail | null = null;
  frameIndex = 0;
  activeJoint = 0;
  joints2d: JointGrid = [];
  revision = 0;
  dirty = false;
  conflict: Conflict | null = null;

  get jointCount(): number {
    return this.clip ? this.clip.joint_names.length : 0;
  }

  get frameCount(): number {
    return this.clip ? this.clip.frame_count : 0;
  }

  loadClip(clip: ClipDetail, annotations: AnnotationsResponse): void {
    this.clip = clip;
    this.joints2d =
      annotations.joints2d === null
        ? emptyGrid(clip.frame_count, clip.joint_names.length)
        : copyGrid(annotations.joints2d);
    this.revision = annotations.revision;
    this.frameIndex = 0;
    this.activeJoint = 0;
    this.dirty = false;
    this.conflict = null;
  }

  /** Clamp into [0, frames). */
  scrub(index: number): void {
    if (!this.clip) return;
    this.frameIndex = Math.min(Math.max(index, 0), this.frameCount - 1);
  }

  selectJoint(joint: number): void {
    if (!this.clip) return;
    this.activeJoint = Math.min(Math.max(joint, 0), this.jointCount - 1);
  }

  /**
   * Record a click for the active joint on the current frame, then advance
   * to the next unlabeled joint of the frame (wrapping). Coordinates outside
   * the image are allowed: out-of-frame joints get labeled too.
   */
  annotate(x: number, y: number): void {
    if (!this.clip) return;
    const frame = this.joints2d[this.frameIndex];
    frame[this.activeJoint] = [x, y];
    this.dirty = true;
    const next = this.nextUnlabeled(frame, this.activeJoint);
    if (next !== null) {
      this.activeJoint = next;
    }
  }

  clearActiveJoint(): void {
    if (!this.clip) return;
    this.joints2d[this.frameIndex][this.activeJoint] = null;
    this.dirty = true;
  }

  private nextUnlabeled(frame: FrameJoints2, after: number): number | null {
    const n = frame.length;
    for (let step = 1; step <= n; step++) {
      const j = (after + step) % n;
      if (frame[j] === null) return j;
    }
    return null;
  }

  frameComplete(index: number): boolean {
    const frame = this.joints2d[index];
    return frame !== undefined && frame.every((joint) => joint !== null);
  }

  /** Frames where the given joint is annotated, ascending. */
  keyframesFor(joint: number): number[] {
    const frames: number[] = [];
    this.joints2d.forEach((frame, f) => {
      if (frame[joint] !== null) frames.push(f);
    });
    return frames;
  }

  canInterpolate(joint: number): boolean {
    return this.nextGapFor(joint) !== null;
  }

  /**
   * First pair of consecutive keyframes of the joint with at least one
   * unlabeled frame strictly between them; what the interpolate button
   * submits.
   */
  nextGapFor(joint: number): [number, number] | null {
    const keys = this.keyframesFor(joint);
    for (let i = 0; i + 1 < keys.length; i++) {
      if (keys[i + 1] - keys[i] >= 2) return [keys[i], keys[i + 1]];
    }
    return null;
  }

  /** Replace local state with a server response (the single source of truth). */
  adoptServer(response: AnnotationsResponse): void {
    if (!this.clip) return;
    this.joints2d =
      response.joints2d === null
        ? emptyGrid(this.frameCount, this.jointCount)
        : copyGrid(response.joints2d);
    this.revision = response.revision;
    this.dirty = false;
    this.conflict = null;
  }

  /** A write was rejected as stale; keep local edits and surface the prompt. */
  markConflict(currentRevision: number): void {
    this.conflict = { serverRevision: currentRevision };
  }

  /**
   * Resolve a conflict against a fresh GET. keepEdits retains the local grid
   * (rebased onto the server revision, ready to save again); otherwise the
   * server copy wins.
   */
  resolveConflict(response: AnnotationsResponse, keepEdits: boolean): void {
    if (keepEdits) {
      this.revision = response.revision;
      this.conflict = null;
      this.dirty = true;
    } else {
      this.adoptServer(response);
    }
  }
}
