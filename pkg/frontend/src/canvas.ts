// Annotating canvas: frame image underneath, labeled joints and bones on top.
// The canvas-to-image transform is fixed per loaded image (fit with margin),
// so click coordinates map straight back to image pixels; clicks outside the
// image rectangle are legal and produce out-of-frame coordinates.

import type { Bone, FrameJoints2 } from "./types.js";

export interface CanvasView {
  scale: number;
  offsetX: number;
  offsetY: number;
}

export function identityView(): CanvasView {
  return { scale: 1, offsetX: 0, offsetY: 0 };
}

/** Fit an image into the canvas with a margin; keeps aspect ratio. */
export function fitView(
  canvasW: number,
  canvasH: number,
  imageW: number,
  imageH: number,
  margin = 16,
): CanvasView {
  const scale = Math.min(
    (canvasW - 2 * margin) / imageW,
    (canvasH - 2 * margin) / imageH,
  );
  return {
    scale,
    offsetX: (canvasW - imageW * scale) / 2,
    offsetY: (canvasH - imageH * scale) / 2,
  };
}

export function canvasToImage(
  view: CanvasView,
  x: number,
  y: number,
): [number, number] {
  return [(x - view.offsetX) / view.scale, (y - view.offsetY) / view.scale];
}

export function imageToCanvas(
  view: CanvasView,
  x: number,
  y: number,
): [number, number] {
  return [x * view.scale + view.offsetX, y * view.scale + view.offsetY];
}

const JOINT_RADIUS = 4;

export function drawAnnotation(
  ctx: CanvasRenderingContext2D,
  image: HTMLImageElement | null,
  frame: FrameJoints2,
  bones: Bone[],
  activeJoint: number,
  view: CanvasView,
): void {
  const { width, height } = ctx.canvas;
  ctx.clearRect(0, 0, width, height);
  ctx.fillStyle = "#1a1f29";
  ctx.fillRect(0, 0, width, height);
  if (image) {
    ctx.drawImage(
      image,
      view.offsetX,
      view.offsetY,
      image.naturalWidth * view.scale,
      image.naturalHeight * view.scale,
    );
  } else {
    ctx.strokeStyle = "#3a4254";
    ctx.strokeRect(view.offsetX, view.offsetY, width - 2 * view.offsetX, height - 2 * view.offsetY);
  }

  ctx.lineWidth = 2;
  ctx.strokeStyle = "#53d18a";
  for (const [a, b] of bones) {
    const pa = frame[a];
    const pb = frame[b];
    if (pa === null || pb === null) continue;
    const [ax, ay] = imageToCanvas(view, pa[0], pa[1]);
    const [bx, by] = imageToCanvas(view, pb[0], pb[1]);
    ctx.beginPath();
    ctx.moveTo(ax, ay);
    ctx.lineTo(bx, by);
    ctx.stroke();
  }

  frame.forEach((joint, j) => {
    if (joint === null) return;
    const [x, y] = imageToCanvas(view, joint[0], joint[1]);
    ctx.beginPath();
    ctx.arc(x, y, JOINT_RADIUS, 0, 2 * Math.PI);
    ctx.fillStyle = j === activeJoint ? "#ffb454" : "#e8ecf6";
    ctx.fill();
    if (j === activeJoint) {
      ctx.beginPath();
      ctx.arc(x, y, JOINT_RADIUS + 3, 0, 2 * Math.PI);
      ctx.strokeStyle = "#ffb454";
      ctx.stroke();
      ctx.strokeStyle = "#53d18a";
    }
  });
}
