// Entry point: wires the annotation store, the HTTP client, and the three
// canvases (annotating canvas, joint map, 3D preview) to the page.

import { ApiClient, ApiError, RevisionConflictError } from "./api.js";
import {
  canvasToImage,
  drawAnnotation,
  fitView,
  identityView,
  type CanvasView,
} from "./canvas.js";
import { drawJointMap, jointMapHit } from "./jointmap.js";
import {
  defaultOrbit,
  dragOrbit,
  renderPreview,
  type Orbit,
} from "./preview3d.js";
import { AnnotationStore } from "./state.js";
import type { ClipSummary, FrameJoints3, PreviewResponse } from "./types.js";

const params = new URLSearchParams(location.search);
const api = new ApiClient(params.get("api") ?? "http://localhost:8000");
const store = new AnnotationStore();

const SAVE_DEBOUNCE_MS = 800;

// number keys 1-5: torso/head, right leg, left leg, left arm, right arm
const JOINT_GROUPS: number[][] = [
  [0, 7, 8, 9, 10],
  [1, 2, 3],
  [4, 5, 6],
  [11, 12, 13],
  [14, 15, 16],
];

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

const clipSelect = el<HTMLSelectElement>("clip-select");
const annotCanvas = el<HTMLCanvasElement>("annot-canvas");
const mapCanvas = el<HTMLCanvasElement>("map-canvas");
const previewCanvas = el<HTMLCanvasElement>("preview-canvas");
const scrubber = el<HTMLInputElement>("scrubber");
const frameLabel = el<HTMLSpanElement>("frame-label");
const jointList = el<HTMLUListElement>("joint-list");
const statusBar = el<HTMLSpanElement>("status");
const conflictBar = el<HTMLDivElement>("conflict");
const saveButton = el<HTMLButtonElement>("save");
const interpolateButton = el<HTMLButtonElement>("interpolate");
const smoothButton = el<HTMLButtonElement>("smooth");
const sigmaInput = el<HTMLInputElement>("sigma");
const importButton = el<HTMLButtonElement>("import-predictions");
const importPath = el<HTMLInputElement>("import-path");
const previewButton = el<HTMLButtonElement>("preview");
const clearButton = el<HTMLButtonElement>("clear-joint");
const messageBar = el<HTMLSpanElement>("message");

let view: CanvasView = identityView();
let frameImage: HTMLImageElement | null = null;
let orbit: Orbit = defaultOrbit();
let previewFrames: FrameJoints3[] | null = null;
let previewView: PreviewResponse["view"] = null;
let saveTimer: number | null = null;

function setMessage(text: string): void {
  messageBar.textContent = text;
}

function renderStatus(): void {
  if (!store.clip) {
    statusBar.textContent = "no clip loaded";
    return;
  }
  const complete = store.frameComplete(store.frameIndex) ? " | frame complete" : "";
  const dirty = store.dirty ? " | unsaved edits" : "";
  statusBar.textContent =
    `${store.clip.id} (${store.clip.action}) rev ${store.revision}` +
    `${dirty}${complete}`;
  conflictBar.style.display = store.conflict ? "flex" : "none";
}

function renderJointList(): void {
  jointList.replaceChildren();
  if (!store.clip) return;
  const frame = store.joints2d[store.frameIndex];
  store.clip.joint_names.forEach((name, j) => {
    const item = document.createElement("li");
    item.textContent = `${j}: ${name}`;
    item.className =
      (j === store.activeJoint ? "active " : "") +
      (frame[j] !== null ? "labeled" : "");
    item.onclick = () => {
      store.selectJoint(j);
      renderAll();
    };
    jointList.appendChild(item);
  });
}

function renderCanvases(): void {
  if (!store.clip) return;
  const ctx = annotCanvas.getContext("2d");
  if (ctx) {
    drawAnnotation(
      ctx,
      frameImage,
      store.joints2d[store.frameIndex],
      store.clip.bones,
      store.activeJoint,
      view,
    );
  }
  const mapCtx = mapCanvas.getContext("2d");
  if (mapCtx) {
    const labeled = store.joints2d[store.frameIndex].map((j) => j !== null);
    drawJointMap(mapCtx, store.clip.bones, store.activeJoint, labeled);
  }
  renderPreviewCanvas();
}

function renderPreviewCanvas(): void {
  const ctx = previewCanvas.getContext("2d");
  if (!ctx) return;
  const frame =
    previewFrames === null
      ? null
      : previewFrames[Math.min(store.frameIndex, previewFrames.length - 1)];
  renderPreview(ctx, frame, store.clip ? store.clip.bones : [], orbit);
  if (previewView) {
    ctx.fillStyle = "#8b93a7";
    ctx.font = "12px sans-serif";
    ctx.fillText(
      `predicted view: theta ${previewView.theta.toFixed(3)}, phi ${previewView.phi.toFixed(3)}`,
      10,
      previewCanvas.height - 10,
    );
  }
}

function renderControls(): void {
  const ready = store.clip !== null;
  const gap = ready ? store.nextGapFor(store.activeJoint) : null;
  interpolateButton.disabled = gap === null;
  interpolateButton.textContent =
    gap === null
      ? "Interpolate (needs 2 keyframes)"
      : `Interpolate joint ${store.activeJoint} [${gap[0]}..${gap[1]}]`;
  smoothButton.disabled = !ready;
  saveButton.disabled = !ready || !store.dirty;
  importButton.disabled = !ready;
  previewButton.disabled = !ready || store.clip?.joints3d === null;
}

function renderAll(): void {
  renderStatus();
  renderJointList();
  renderControls();
  renderCanvases();
  if (store.clip) {
    scrubber.max = String(store.frameCount - 1);
    scrubber.value = String(store.frameIndex);
    frameLabel.textContent = `frame ${store.frameIndex + 1}/${store.frameCount}`;
  }
}

function loadFrameImage(): void {
  if (!store.clip) return;
  const image = new Image();
  const id = store.clip.id;
  const index = store.frameIndex;
  image.onload = () => {
    if (store.clip?.id !== id || store.frameIndex !== index) return;
    frameImage = image;
    view = fitView(
      annotCanvas.width,
      annotCanvas.height,
      image.naturalWidth,
      image.naturalHeight,
    );
    renderCanvases();
  };
  image.onerror = () => {
    if (store.clip?.id !== id || store.frameIndex !== index) return;
    frameImage = null; // dataset without frame images; annotate on the grid
    view = fitView(annotCanvas.width, annotCanvas.height, 640, 480);
    renderCanvases();
  };
  image.src = api.frameUrl(id, index);
}

// ---- server round-trips ---------------------------------------------------

async function guarded(op: () => Promise<void>): Promise<void> {
  try {
    await op();
    setMessage("");
  } catch (err) {
    if (err instanceof RevisionConflictError) {
      store.markConflict(err.currentRevision);
      setMessage(`edit conflict: server moved to rev ${err.currentRevision}`);
    } else if (err instanceof ApiError) {
      setMessage(err.message);
    } else {
      setMessage(String(err));
    }
  }
  renderAll();
}

function scheduleSave(): void {
  if (saveTimer !== null) window.clearTimeout(saveTimer);
  saveTimer = window.setTimeout(() => {
    saveTimer = null;
    void saveNow();
  }, SAVE_DEBOUNCE_MS);
}

async function saveNow(): Promise<void> {
  if (!store.clip || !store.dirty || store.conflict) return;
  const id = store.clip.id;
  await guarded(async () => {
    const response = await api.putAnnotations(id, store.revision, store.joints2d);
    store.adoptServer(response);
  });
}

/** Flush pending local edits so a server-side edit starts from them. */
async function flushEdits(): Promise<void> {
  if (saveTimer !== null) {
    window.clearTimeout(saveTimer);
    saveTimer = null;
  }
  await saveNow();
}

async function selectClip(id: string): Promise<void> {
  await guarded(async () => {
    const [clip, annotations] = await Promise.all([
      api.getClip(id),
      api.getAnnotations(id),
    ]);
    store.loadClip(clip, annotations);
    previewFrames = null;
    previewView = null;
    frameImage = null;
    view = fitView(annotCanvas.width, annotCanvas.height, 640, 480);
  });
  loadFrameImage();
}

async function refreshClipList(): Promise<void> {
  const clips: ClipSummary[] = await api.listClips();
  clipSelect.replaceChildren();
  for (const clip of clips) {
    const option = document.createElement("option");
    option.value = clip.id;
    option.textContent = `${clip.id} (${clip.action}, ${clip.frame_count} frames)`;
    clipSelect.appendChild(option);
  }
  if (clips.length > 0) {
    clipSelect.value = clips[0].id;
    await selectClip(clips[0].id);
  }
}

// ---- event wiring ---------------------------------------------------------

clipSelect.onchange = () => void selectClip(clipSelect.value);

annotCanvas.onclick = (event) => {
  if (!store.clip || store.conflict) return;
  const rect = annotCanvas.getBoundingClientRect();
  const [x, y] = canvasToImage(
    view,
    event.clientX - rect.left,
    event.clientY - rect.top,
  );
  store.annotate(x, y);
  scheduleSave();
  renderAll();
};

mapCanvas.onclick = (event) => {
  const rect = mapCanvas.getBoundingClientRect();
  const hit = jointMapHit(
    event.clientX - rect.left,
    event.clientY - rect.top,
    mapCanvas.width,
    mapCanvas.height,
  );
  if (hit !== null) {
    store.selectJoint(hit);
    renderAll();
  }
};

scrubber.oninput = () => {
  store.scrub(Number(scrubber.value));
  loadFrameImage();
  renderAll();
};

saveButton.onclick = () => void flushEdits();

interpolateButton.onclick = () => {
  const gap = store.nextGapFor(store.activeJoint);
  if (!store.clip || gap === null) return;
  const id = store.clip.id;
  const joint = store.activeJoint;
  void (async () => {
    await flushEdits();
    if (store.conflict) return;
    await guarded(async () => {
      const response = await api.interpolate(id, store.revision, joint, gap[0], gap[1]);
      store.adoptServer(response);
    });
  })();
};

smoothButton.onclick = () => {
  if (!store.clip) return;
  const id = store.clip.id;
  const sigma = Number(sigmaInput.value);
  void (async () => {
    await flushEdits();
    if (store.conflict) return;
    await guarded(async () => {
      const response = await api.smooth(id, store.revision, sigma);
      store.adoptServer(response);
    });
  })();
};

importButton.onclick = () => {
  if (!store.clip || importPath.value === "") return;
  const id = store.clip.id;
  const path = importPath.value;
  void (async () => {
    await flushEdits();
    if (store.conflict) return;
    await guarded(async () => {
      const response = await api.importPredictions(id, store.revision, path);
      store.adoptServer(response);
    });
  })();
};

previewButton.onclick = () => {
  if (!store.clip) return;
  const id = store.clip.id;
  void guarded(async () => {
    const response = await api.alignPreview(id);
    previewFrames = response.joints3d;
    previewView = response.view;
  });
};

clearButton.onclick = () => {
  store.clearActiveJoint();
  scheduleSave();
  renderAll();
};

el<HTMLButtonElement>("conflict-reload").onclick = () => {
  if (!store.clip) return;
  const id = store.clip.id;
  void guarded(async () => {
    const response = await api.getAnnotations(id);
    store.resolveConflict(response, true); // keep local edits, rebase revision
  });
};

el<HTMLButtonElement>("conflict-discard").onclick = () => {
  if (!store.clip) return;
  const id = store.clip.id;
  void guarded(async () => {
    const response = await api.getAnnotations(id);
    store.resolveConflict(response, false);
  });
};

// orbit drag on the preview canvas
let dragging = false;
let lastX = 0;
let lastY = 0;
previewCanvas.onmousedown = (event) => {
  dragging = true;
  lastX = event.clientX;
  lastY = event.clientY;
};
window.addEventListener("mouseup", () => {
  dragging = false;
});
window.addEventListener("mousemove", (event) => {
  if (!dragging) return;
  orbit = dragOrbit(orbit, event.clientX - lastX, event.clientY - lastY);
  lastX = event.clientX;
  lastY = event.clientY;
  renderPreviewCanvas();
});

window.addEventListener("keydown", (event) => {
  if (event.target instanceof HTMLInputElement) return;
  if (event.key === "ArrowLeft" || event.key === "ArrowRight") {
    const step = event.key === "ArrowLeft" ? -1 : 1;
    store.scrub(store.frameIndex + step);
    loadFrameImage();
    renderAll();
    event.preventDefault();
    return;
  }
  const group = Number(event.key);
  if (group >= 1 && group <= JOINT_GROUPS.length) {
    const joints = JOINT_GROUPS[group - 1];
    const at = joints.indexOf(store.activeJoint);
    store.selectJoint(joints[(at + 1) % joints.length]);
    renderAll();
  }
});

void (async () => {
  try {
    await refreshClipList();
  } catch (err) {
    setMessage(`cannot reach service at ${api.baseUrl}: ${String(err)}`);
  }
  renderAll();
})();
