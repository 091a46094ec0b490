// Orthographic orbit rendering of the aligned 3D skeleton returned by
// /align/preview. Pure view-space projection; the joint positions themselves
// are server output.

import type { Bone, FrameJoints3, Joint3 } from "./types.js";

export interface Orbit {
  yaw: number; // radians around the vertical axis
  pitch: number; // radians around the screen-horizontal axis
  zoom: number; // pixels per world unit
}

export function defaultOrbit(): Orbit {
  return { yaw: 0.5, pitch: 0.25, zoom: 160 };
}

/** Rotate by yaw then pitch and drop depth; screen y grows downward. */
export function projectOrtho(
  point: Joint3,
  orbit: Orbit,
): [number, number, number] {
  const [x, y, z] = point;
  const cy = Math.cos(orbit.yaw);
  const sy = Math.sin(orbit.yaw);
  const x1 = cy * x + sy * z;
  const z1 = -sy * x + cy * z;
  const cp = Math.cos(orbit.pitch);
  const sp = Math.sin(orbit.pitch);
  const y2 = cp * y - sp * z1;
  const z2 = sp * y + cp * z1;
  return [x1 * orbit.zoom, -y2 * orbit.zoom, z2];
}

export function dragOrbit(orbit: Orbit, dx: number, dy: number): Orbit {
  const pitchLimit = Math.PI / 2 - 0.01;
  return {
    yaw: orbit.yaw + dx * 0.01,
    pitch: Math.min(Math.max(orbit.pitch + dy * 0.01, -pitchLimit), pitchLimit),
    zoom: orbit.zoom,
  };
}

export function renderPreview(
  ctx: CanvasRenderingContext2D,
  frame: FrameJoints3 | null,
  bones: Bone[],
  orbit: Orbit,
): void {
  const { width, height } = ctx.canvas;
  ctx.clearRect(0, 0, width, height);
  ctx.fillStyle = "#10141c";
  ctx.fillRect(0, 0, width, height);
  if (!frame) {
    ctx.fillStyle = "#8b93a7";
    ctx.font = "13px sans-serif";
    ctx.fillText("no 3D preview loaded", 14, 24);
    return;
  }
  const cx = width / 2;
  const cyCenter = height / 2;
  const projected = frame.map((joint) =>
    joint === null ? null : projectOrtho(joint, orbit),
  );

  ctx.lineWidth = 2;
  for (const [a, b] of bones) {
    const pa = projected[a];
    const pb = projected[b];
    if (!pa || !pb) continue;
    // nearer bones brighter
    const depth = (pa[2] + pb[2]) / 2;
    const shade = Math.round(150 + 70 * Math.tanh(depth));
    ctx.strokeStyle = `rgb(${shade - 70}, ${shade}, 255)`;
    ctx.beginPath();
    ctx.moveTo(cx + pa[0], cyCenter + pa[1]);
    ctx.lineTo(cx + pb[0], cyCenter + pb[1]);
    ctx.stroke();
  }
  ctx.fillStyle = "#f3f6ff";
  for (const p of projected) {
    if (!p) continue;
    ctx.beginPath();
    ctx.arc(cx + p[0], cyCenter + p[1], 2.5, 0, 2 * Math.PI);
    ctx.fill();
  }
}
