// Map of the current label joint: a fixed stick-figure diagram with the
// active joint highlighted. Clicking a diagram joint selects it.

import type { Bone } from "./types.js";

// Hand-placed layout for the 17-joint body, in a 100x130 box.
// Order matches the service's joint_names.
const LAYOUT: [number, number][] = [
  [50, 62], // pelvis
  [42, 64], // right_hip
  [40, 90], // right_knee
  [39, 116], // right_ankle
  [58, 64], // left_hip
  [60, 90], // left_knee
  [61, 116], // left_ankle
  [50, 46], // spine
  [50, 30], // neck
  [50, 22], // head
  [50, 12], // head_top
  [63, 32], // left_shoulder
  [70, 48], // left_elbow
  [74, 62], // left_wrist
  [37, 32], // right_shoulder
  [30, 48], // right_elbow
  [26, 62], // right_wrist
];

export function jointMapPosition(
  joint: number,
  width: number,
  height: number,
): [number, number] {
  const [x, y] = LAYOUT[joint];
  return [(x / 100) * width, (y / 130) * height];
}

/** Index of the diagram joint nearest a click, or null if too far away. */
export function jointMapHit(
  x: number,
  y: number,
  width: number,
  height: number,
  radius = 10,
): number | null {
  let best: number | null = null;
  let bestDist = radius * radius;
  for (let j = 0; j < LAYOUT.length; j++) {
    const [jx, jy] = jointMapPosition(j, width, height);
    const d = (jx - x) ** 2 + (jy - y) ** 2;
    if (d <= bestDist) {
      best = j;
      bestDist = d;
    }
  }
  return best;
}

export function drawJointMap(
  ctx: CanvasRenderingContext2D,
  bones: Bone[],
  activeJoint: number,
  labeled: boolean[],
): void {
  const { width, height } = ctx.canvas;
  ctx.clearRect(0, 0, width, height);
  ctx.fillStyle = "#10141c";
  ctx.fillRect(0, 0, width, height);

  ctx.strokeStyle = "#4a5268";
  ctx.lineWidth = 2;
  for (const [a, b] of bones) {
    const [ax, ay] = jointMapPosition(a, width, height);
    const [bx, by] = jointMapPosition(b, width, height);
    ctx.beginPath();
    ctx.moveTo(ax, ay);
    ctx.lineTo(bx, by);
    ctx.stroke();
  }
  for (let j = 0; j < LAYOUT.length; j++) {
    const [x, y] = jointMapPosition(j, width, height);
    ctx.beginPath();
    ctx.arc(x, y, j === activeJoint ? 6 : 4, 0, 2 * Math.PI);
    ctx.fillStyle = j === activeJoint ? "#ffb454" : labeled[j] ? "#53d18a" : "#8b93a7";
    ctx.fill();
  }
}
