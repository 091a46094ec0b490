"""Orthographic camera geometry and the geodesic view sphere.

A viewpoint is the pair (theta, phi): azimuth in (-pi, pi] and altitude in
[-pi/2, pi/2] relative to the default camera direction (0, 0, -1).  The
rotation taking the default camera to a viewpoint factors as an azimuth
rotation about -y followed by an altitude rotation about the horizontal
axis perpendicular to the rotated camera; aligning a sequence applies the
inverse.

Candidate viewpoints for augmentation and search come from an n-frequency
subdivided icosahedron oriented with two vertices on the +-y axis.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .skeleton import SkeletonSequence

DEFAULT_CAMERA = np.array([0.0, 0.0, -1.0])
UNIT_TOL = 1e-6


@dataclass(frozen=True)
class CameraAngles:
    """Azimuth/altitude pair; theta in (-pi, pi], phi in [-pi/2, pi/2]."""

    theta: float
    phi: float

    def __post_init__(self):
        if not (np.isfinite(self.theta) and np.isfinite(self.phi)):
            raise ValidationError("camera angles must be finite")
        if not -np.pi - UNIT_TOL < self.theta <= np.pi + UNIT_TOL:
            raise ValidationError(f"theta {self.theta} outside (-pi, pi]")
        if not -np.pi / 2 - UNIT_TOL <= self.phi <= np.pi / 2 + UNIT_TOL:
            raise ValidationError(f"phi {self.phi} outside [-pi/2, pi/2]")

    def as_tuple(self) -> tuple[float, float]:
        return (self.theta, self.phi)


def wrap_angle(angle: float) -> float:
    """Wrap into (-pi, pi]."""
    wrapped = (angle + np.pi) % (2.0 * np.pi) - np.pi
    if wrapped <= -np.pi:
        wrapped = np.pi
    return float(wrapped)


def skew(axis: np.ndarray) -> np.ndarray:
    """Cross-product matrix of a unit vector: skew(n) @ v == cross(n, v)."""
    n = np.asarray(axis, dtype=np.float64)
    if n.shape != (3,):
        raise ValidationError("axis must be a 3-vector")
    if abs(np.linalg.norm(n) - 1.0) > UNIT_TOL:
        raise ValidationError("axis must be unit length")
    return np.array(
        [
            [0.0, -n[2], n[1]],
            [n[2], 0.0, -n[0]],
            [-n[1], n[0], 0.0],
        ]
    )


def rodrigues(axis: np.ndarray, angle: float) -> np.ndarray:
    """Rotation by ``angle`` about unit ``axis``: I + sin*K + (1-cos)*K^2."""
    k = skew(axis)
    return np.eye(3) + np.sin(angle) * k + (1.0 - np.cos(angle)) * (k @ k)


def angles_from_camera(camera: np.ndarray) -> CameraAngles:
    """Recover (theta, phi) from a unit camera position.

    theta = pi - atan2(C_x, C_z) wrapped into (-pi, pi];
    phi = atan2(C_y, sqrt(C_x^2 + C_z^2)).
    At the poles (C_x = C_z = 0) azimuth is undefined and fixed to 0.
    """
    c = np.asarray(camera, dtype=np.float64)
    if c.shape != (3,):
        raise ValidationError("camera must be a 3-vector")
    if abs(np.linalg.norm(c) - 1.0) > UNIT_TOL:
        raise ValidationError("camera must be a unit vector")
    horizontal = np.hypot(c[0], c[2])
    if horizontal < UNIT_TOL:
        theta = 0.0
    else:
        theta = np.pi - np.arctan2(c[0], c[2])
        if theta > np.pi:
            theta -= 2.0 * np.pi
    phi = np.arctan2(c[1], horizontal)
    return CameraAngles(float(theta), float(phi))


def rotation_from_angles(view: CameraAngles) -> np.ndarray:
    """Rotation R taking the default camera to the viewpoint ``view``.

    R = R2 @ R1 with R1 = rodrigues((0,-1,0), theta) and R2 the altitude
    rotation about the axis perpendicular to both +y and the azimuth-rotated
    camera.  The cross product defining that axis cannot vanish for phi
    strictly inside (-pi/2, pi/2); the guard keeps the documented poles
    convention (axis = R1 @ (1,0,0), sign following the phi branch).
    """
    theta, phi = view.theta, view.phi
    r1 = rodrigues(np.array([0.0, -1.0, 0.0]), theta)
    if abs(phi) < 1e-15:
        return r1
    v1 = np.array([0.0, 1.0, 0.0])
    v2 = r1 @ DEFAULT_CAMERA
    axis = np.cross(v2, v1) if phi > 0 else np.cross(v1, v2)
    norm = np.linalg.norm(axis)
    if norm < 1e-9:
        axis = r1 @ np.array([1.0, 0.0, 0.0])
        if phi < 0:
            axis = -axis
    else:
        axis = axis / norm
    r2 = rodrigues(axis, abs(phi))
    return r2 @ r1


def camera_from_angles(view: CameraAngles) -> np.ndarray:
    """Unit camera position for a viewpoint (rotation applied to default)."""
    return rotation_from_angles(view) @ DEFAULT_CAMERA


def rotation_derivatives(
    view: CameraAngles,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """R(theta, phi) together with dR/dtheta and dR/dphi.

    Uses the closed form R = R2 @ R1 where, with a(theta) = (cos t, 0, sin t),
    R2 = cos(phi) I + sin(phi) skew(a) + (1 - cos(phi)) a a^T.  That form is
    valid for every phi (flipping the axis and taking |phi| is the same
    rotation), which makes the derivative straightforward.
    """
    t, p = view.theta, view.phi
    ct, st = np.cos(t), np.sin(t)
    cp, sp = np.cos(p), np.sin(p)

    r1 = np.array([[ct, 0.0, -st], [0.0, 1.0, 0.0], [st, 0.0, ct]])
    dr1 = np.array([[-st, 0.0, -ct], [0.0, 0.0, 0.0], [ct, 0.0, -st]])

    a = np.array([ct, 0.0, st])
    da = np.array([-st, 0.0, ct])
    k = np.array([[0.0, -st, 0.0], [st, 0.0, -ct], [0.0, ct, 0.0]])
    dk = np.array([[0.0, -ct, 0.0], [ct, 0.0, st], [0.0, -st, 0.0]])
    outer = np.outer(a, a)
    douter = np.outer(da, a) + np.outer(a, da)

    r2 = cp * np.eye(3) + sp * k + (1.0 - cp) * outer
    dr2_dp = -sp * np.eye(3) + cp * k + sp * outer
    dr2_dt = sp * dk + (1.0 - cp) * douter

    r = r2 @ r1
    dr_dt = dr2_dt @ r1 + r2 @ dr1
    dr_dp = dr2_dp @ r1
    return r, dr_dt, dr_dp


def augment_view(seq: SkeletonSequence, view: CameraAngles) -> SkeletonSequence:
    """Render an aligned sequence as seen from ``view``.

    Applies R(view)^-1 (= R^T, rotations are orthonormal) to every joint of
    every frame; the result is flagged unaligned and remembers the view.
    """
    r = rotation_from_angles(view)
    frames = np.einsum("ij,fkj->fki", r.T, seq.frames)
    return seq.with_frames(frames, aligned=False, view=view.as_tuple())


def apply_rotation(seq: SkeletonSequence, view: CameraAngles) -> SkeletonSequence:
    """Rotate an augmented sequence back into the aligned space by R(view)."""
    r = rotation_from_angles(view)
    frames = np.einsum("ij,fkj->fki", r, seq.frames)
    return seq.with_frames(frames, aligned=True, view=None)


# --- geodesic view sphere ---------------------------------------------------


@dataclass(frozen=True)
class ViewSphere:
    """Unit vectors of an n-frequency subdivided icosahedron."""

    frequency: int
    vertices: np.ndarray

    @property
    def vertex_count(self) -> int:
        return self.vertices.shape[0]

    def vertex_angles(self) -> list[CameraAngles]:
        return [angles_from_camera(v) for v in self.vertices]


def _base_icosahedron() -> tuple[np.ndarray, list[tuple[int, int, int]]]:
    """Icosahedron with poles on the +-y axis: 12 vertices, 20 faces."""
    ring_y = 1.0 / np.sqrt(5.0)
    ring_r = 2.0 / np.sqrt(5.0)
    verts = [np.array([0.0, 1.0, 0.0])]
    for k in range(5):
        a = 2.0 * np.pi * k / 5.0
        verts.append(np.array([ring_r * np.cos(a), ring_y, ring_r * np.sin(a)]))
    for k in range(5):
        a = 2.0 * np.pi * k / 5.0 + np.pi / 5.0
        verts.append(np.array([ring_r * np.cos(a), -ring_y, ring_r * np.sin(a)]))
    verts.append(np.array([0.0, -1.0, 0.0]))

    faces: list[tuple[int, int, int]] = []
    for k in range(5):
        k2 = (k + 1) % 5
        faces.append((0, 1 + k, 1 + k2))
        faces.append((1 + k, 6 + k, 1 + k2))
        faces.append((6 + k, 6 + k2, 1 + k2))
        faces.append((11, 6 + k, 6 + k2))
    return np.array(verts), faces


def build_view_sphere(frequency: int) -> ViewSphere:
    """Subdivide each icosahedron face edge into ``frequency`` parts.

    Lattice points (i*A + j*B + k*C) / n with i+j+k = n are projected onto
    the unit sphere and deduplicated, giving 10*n^2 + 2 vertices.
    """
    if frequency < 1:
        raise ValidationError("frequency must be >= 1")
    base, faces = _base_icosahedron()
    seen: dict[tuple, int] = {}
    vertices: list[np.ndarray] = []
    for fa, fb, fc in faces:
        a, b, c = base[fa], base[fb], base[fc]
        n = frequency
        for i in range(n + 1):
            for j in range(n + 1 - i):
                point = (a * (n - i - j) + b * i + c * j) / n
                point = point / np.linalg.norm(point)
                key = tuple(np.round(point, 9))
                if key not in seen:
                    seen[key] = len(vertices)
                    vertices.append(point)
    return ViewSphere(frequency=frequency, vertices=np.array(vertices))


def split_views(
    sphere: ViewSphere, train_count: int, seed: int
) -> tuple[np.ndarray, np.ndarray]:
    """Seeded shuffle of vertex indices into (train, test) index arrays."""
    if not 0 < train_count < sphere.vertex_count:
        raise ValidationError(
            f"train_count must be in (0, {sphere.vertex_count}), got {train_count}"
        )
    rng = np.random.default_rng(seed)
    perm = rng.permutation(sphere.vertex_count)
    return np.sort(perm[:train_count]), np.sort(perm[train_count:])


def sphere_to_json(sphere: ViewSphere) -> str:
    """Reproducibility manifest: vertices with 17 significant digits."""
    rows = ",\n    ".join(
        "[" + ", ".join(f"{x:.17g}" for x in v) + "]" for v in sphere.vertices
    )
    return (
        "{\n"
        f'  "frequency": {sphere.frequency},\n'
        f'  "vertex_count": {sphere.vertex_count},\n'
        '  "vertices": [\n    ' + rows + "\n  ]\n}"
    )


def sphere_from_json(text: str) -> ViewSphere:
    payload = json.loads(text)
    return ViewSphere(
        frequency=int(payload["frequency"]),
        vertices=np.asarray(payload["vertices"], dtype=np.float64),
    )
