// Shared shapes mirroring the annotation service JSON bodies.

export type Joint2 = [number, number];
export type Joint3 = [number, number, number];

/** One frame of 2D joints; null marks an unannotated joint. */
export type FrameJoints2 = (Joint2 | null)[];
export type FrameJoints3 = (Joint3 | null)[];

/** All frames of a clip, indexed [frame][joint]. */
export type JointGrid = FrameJoints2[];

export type Bone = [number, number];

export interface ClipSummary {
  id: string;
  action: string;
  video_id: string;
  frame_count: number;
  has_joints2d: boolean;
  has_joints3d: boolean;
  globally_aligned: boolean;
  revision: number;
}

export interface ClipDetail {
  id: string;
  revision: number;
  action: string;
  video_id: string;
  globally_aligned: boolean;
  frame_count: number;
  joints2d: JointGrid | null;
  joints3d: FrameJoints3[] | null;
  provenance: string;
  joint_names: string[];
  bones: Bone[];
}

export interface AnnotationsResponse {
  revision: number;
  joints2d: JointGrid | null;
}

export interface ViewAngles {
  theta: number;
  phi: number;
}

export interface PreviewResponse {
  joints3d: FrameJoints3[];
  view: ViewAngles | null;
  bones: Bone[];
}
