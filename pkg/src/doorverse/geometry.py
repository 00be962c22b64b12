"""SE(3) poses, box/cylinder primitives, ray casting and distance queries.

Everything is plain float64 numpy. Primitives carry a world (or parent-frame)
pose; cylinders have their axis along the local +z.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

EPS = 1e-12


def unit(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    n = np.linalg.norm(v)
    if n < EPS:
        raise ValueError("cannot normalize near-zero vector")
    return v / n


def rot_axis_angle(axis: np.ndarray, angle: float) -> np.ndarray:
    """Rodrigues rotation matrix about a unit axis."""
    a = unit(axis)
    x, y, z = a
    c, s = np.cos(angle), np.sin(angle)
    k = np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])
    return np.eye(3) + s * k + (1.0 - c) * (k @ k)


def rot_z(angle: float) -> np.ndarray:
    return rot_axis_angle(np.array([0.0, 0.0, 1.0]), angle)


def rotation_to_rotvec(rot: np.ndarray) -> np.ndarray:
    """Log map SO(3) -> R3 (axis * angle)."""
    tr = np.clip((np.trace(rot) - 1.0) / 2.0, -1.0, 1.0)
    angle = np.arccos(tr)
    if angle < 1e-9:
        return np.zeros(3)
    if np.pi - angle < 1e-6:
        # near pi: extract axis from the symmetric part
        m = (rot + np.eye(3)) / 2.0
        axis = unit(np.array([np.sqrt(max(m[i, i], 0.0)) for i in range(3)]))
        # fix signs using off-diagonals
        if rot[2, 1] - rot[1, 2] < 0:
            axis[0] = -axis[0]
        if rot[0, 2] - rot[2, 0] < 0:
            axis[1] = -axis[1]
        if rot[1, 0] - rot[0, 1] < 0:
            axis[2] = -axis[2]
        return axis * angle
    v = np.array([rot[2, 1] - rot[1, 2], rot[0, 2] - rot[2, 0], rot[1, 0] - rot[0, 1]])
    return v * (angle / (2.0 * np.sin(angle)))


def rotation_angle_between(r1: np.ndarray, r2: np.ndarray) -> float:
    """Geodesic angle between two rotation matrices."""
    return float(np.linalg.norm(rotation_to_rotvec(r2 @ r1.T)))


def is_rotation(rot: np.ndarray, tol: float = 1e-6) -> bool:
    rot = np.asarray(rot, dtype=np.float64)
    if rot.shape != (3, 3):
        return False
    ortho = np.abs(rot.T @ rot - np.eye(3)).max() < tol
    return bool(ortho and abs(np.linalg.det(rot) - 1.0) < tol)


@dataclass(frozen=True)
class Pose:
    """Rigid transform: x_world = rot @ x_local + pos."""

    rot: np.ndarray = field(default_factory=lambda: np.eye(3))
    pos: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        object.__setattr__(self, "rot", np.asarray(self.rot, dtype=np.float64).reshape(3, 3))
        object.__setattr__(self, "pos", np.asarray(self.pos, dtype=np.float64).reshape(3))

    @staticmethod
    def identity() -> "Pose":
        return Pose()

    def compose(self, other: "Pose") -> "Pose":
        return Pose(self.rot @ other.rot, self.rot @ other.pos + self.pos)

    def inverse(self) -> "Pose":
        rt = self.rot.T
        return Pose(rt, -rt @ self.pos)

    def apply(self, points: np.ndarray) -> np.ndarray:
        p = np.asarray(points, dtype=np.float64)
        return p @ self.rot.T + self.pos

    def apply_dir(self, dirs: np.ndarray) -> np.ndarray:
        return np.asarray(dirs, dtype=np.float64) @ self.rot.T

    def error_to(self, other: "Pose") -> tuple[float, float]:
        """(position distance, rotation angle) from self to other."""
        dp = float(np.linalg.norm(other.pos - self.pos))
        dr = rotation_angle_between(self.rot, other.rot)
        return dp, dr

    def almost_equal(self, other: "Pose", tol: float = 1e-9) -> bool:
        dp, dr = self.error_to(other)
        return dp < tol and dr < tol

    def to_dict(self) -> dict:
        return {"pos": [float(x) for x in self.pos], "rotmat": [float(x) for x in self.rot.reshape(-1)]}

    @staticmethod
    def from_dict(d: dict) -> "Pose":
        return Pose(np.array(d["rotmat"]).reshape(3, 3), np.array(d["pos"]))


def pose_about_axis(point: np.ndarray, axis: np.ndarray, angle: float) -> Pose:
    """Rotation about a world axis through a world point, as a Pose."""
    rot = rot_axis_angle(axis, angle)
    point = np.asarray(point, dtype=np.float64)
    return Pose(rot, point - rot @ point)


@dataclass(frozen=True)
class Box:
    """Axis-aligned box in its local frame; `dims` are full extents."""

    pose: Pose
    dims: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "dims", np.asarray(self.dims, dtype=np.float64).reshape(3))

    def transformed(self, world: Pose) -> "Box":
        return Box(world.compose(self.pose), self.dims)


@dataclass(frozen=True)
class Cylinder:
    """Finite cylinder, axis along local +z, centered at the local origin."""

    pose: Pose
    radius: float
    length: float

    def transformed(self, world: Pose) -> "Cylinder":
        return Cylinder(world.compose(self.pose), self.radius, self.length)


Primitive = Box | Cylinder


def _safe_inv(d: np.ndarray) -> np.ndarray:
    sign = np.where(d >= 0.0, 1.0, -1.0)
    return 1.0 / np.where(np.abs(d) < EPS, sign * EPS, d)


def ray_box(origin: np.ndarray, dirs: np.ndarray, box: Box) -> np.ndarray:
    """First-hit ray parameter per direction; +inf where the box is missed.

    `dirs` need not be normalized; the returned t is in units of |dir|.
    """
    inv = box.pose.inverse()
    o = inv.apply(origin)
    d = inv.apply_dir(np.atleast_2d(dirs))
    half = box.dims / 2.0
    invd = _safe_inv(d)
    t1 = (-half - o) * invd
    t2 = (half - o) * invd
    tmin = np.minimum(t1, t2).max(axis=1)
    tmax = np.maximum(t1, t2).min(axis=1)
    t = np.where(tmin > 0.0, tmin, tmax)
    hit = (tmax >= np.maximum(tmin, 0.0)) & (t > 0.0)
    return np.where(hit, t, np.inf)


def ray_cylinder(origin: np.ndarray, dirs: np.ndarray, cyl: Cylinder) -> np.ndarray:
    """First-hit ray parameter per direction against a capped cylinder."""
    inv = cyl.pose.inverse()
    o = inv.apply(origin)
    d = inv.apply_dir(np.atleast_2d(dirs))
    n = d.shape[0]
    hz = cyl.length / 2.0
    best = np.full(n, np.inf)

    a = d[:, 0] ** 2 + d[:, 1] ** 2
    b = 2.0 * (o[0] * d[:, 0] + o[1] * d[:, 1])
    c = o[0] ** 2 + o[1] ** 2 - cyl.radius**2
    disc = b * b - 4.0 * a * c
    ok = (disc >= 0.0) & (a > EPS)
    sq = np.sqrt(np.where(ok, disc, 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        for sgn in (-1.0, 1.0):
            t = (-b + sgn * sq) / (2.0 * a)
            z = o[2] + t * d[:, 2]
            valid = ok & (t > 0.0) & (np.abs(z) <= hz)
            best = np.where(valid & (t < best), t, best)
        for zcap in (-hz, hz):
            t = (zcap - o[2]) / np.where(np.abs(d[:, 2]) < EPS, EPS, d[:, 2])
            x = o[0] + t * d[:, 0]
            y = o[1] + t * d[:, 1]
            valid = (t > 0.0) & (x * x + y * y <= cyl.radius**2)
            best = np.where(valid & (t < best), t, best)
    return best


def ray_primitive(origin: np.ndarray, dirs: np.ndarray, prim: Primitive) -> np.ndarray:
    if isinstance(prim, Box):
        return ray_box(origin, dirs, prim)
    return ray_cylinder(origin, dirs, prim)


def ray_scene(origin: np.ndarray, dirs: np.ndarray, prims: list[Primitive]) -> np.ndarray:
    """Nearest-hit parameter over a list of primitives (+inf = miss).

    Boxes are intersected in one batched pass; cylinders individually.
    """
    dirs = np.atleast_2d(np.asarray(dirs, dtype=np.float64))
    boxes = [p for p in prims if isinstance(p, Box)]
    others = [p for p in prims if not isinstance(p, Box)]
    best = np.full(dirs.shape[0], np.inf)
    if boxes:
        np.minimum(best, _ray_boxes_batched(origin, dirs, boxes), out=best)
    for prim in others:
        np.minimum(best, ray_primitive(origin, dirs, prim), out=best)
    return best


def _ray_boxes_batched(origin: np.ndarray, dirs: np.ndarray, boxes: list[Box]) -> np.ndarray:
    """Nearest hit over boxes for N rays; float32 slab tests, BLAS rotations."""
    dirs32 = np.ascontiguousarray(dirs, dtype=np.float32)
    origin32 = origin.astype(np.float32)
    best = np.full(dirs32.shape[0], np.inf, dtype=np.float32)
    for box in boxes:
        rot = box.pose.rot.astype(np.float32)
        o = (origin32 - box.pose.pos.astype(np.float32)) @ rot
        d = dirs32 @ rot
        half = (box.dims / 2.0).astype(np.float32)
        sign = np.where(d >= 0.0, np.float32(1.0), np.float32(-1.0))
        invd = 1.0 / np.where(np.abs(d) < 1e-9, sign * np.float32(1e-9), d)
        t1 = (-half - o) * invd
        t2 = (half - o) * invd
        tmin = np.minimum(t1, t2).max(axis=1)
        tmax = np.maximum(t1, t2).min(axis=1)
        t = np.where(tmin > 0.0, tmin, tmax)
        hit = (tmax >= np.maximum(tmin, 0.0)) & (t > 0.0)
        np.minimum(best, np.where(hit, t, np.float32(np.inf)), out=best)
    return best.astype(np.float64)


def point_box_surface_distance(point: np.ndarray, box: Box) -> float:
    """Unsigned distance from a point to the box SURFACE (positive inside too)."""
    q = box.pose.inverse().apply(point)
    d = np.abs(q) - box.dims / 2.0
    outside = np.linalg.norm(np.maximum(d, 0.0))
    if outside > 0.0:
        return float(outside)
    return float(-d.max())


def point_box_outside_distance(point: np.ndarray, box: Box) -> float:
    """Distance to the box; zero anywhere inside (contact semantics)."""
    q = box.pose.inverse().apply(point)
    d = np.abs(q) - box.dims / 2.0
    return float(np.linalg.norm(np.maximum(d, 0.0)))


def point_cylinder_surface_distance(point: np.ndarray, cyl: Cylinder) -> float:
    q = cyl.pose.inverse().apply(point)
    dr = np.hypot(q[0], q[1]) - cyl.radius
    dz = abs(q[2]) - cyl.length / 2.0
    if dr <= 0.0 and dz <= 0.0:
        return float(-max(dr, dz))
    return float(np.hypot(max(dr, 0.0), max(dz, 0.0)))


def point_cylinder_outside_distance(point: np.ndarray, cyl: Cylinder) -> float:
    q = cyl.pose.inverse().apply(point)
    dr = np.hypot(q[0], q[1]) - cyl.radius
    dz = abs(q[2]) - cyl.length / 2.0
    return float(np.hypot(max(dr, 0.0), max(dz, 0.0)))


def point_primitive_surface_distance(point: np.ndarray, prim: Primitive) -> float:
    if isinstance(prim, Box):
        return point_box_surface_distance(point, prim)
    return point_cylinder_surface_distance(point, prim)


def point_primitive_outside_distance(point: np.ndarray, prim: Primitive) -> float:
    if isinstance(prim, Box):
        return point_box_outside_distance(point, prim)
    return point_cylinder_outside_distance(point, prim)


def points_scene_distance(points: np.ndarray, prims: list[Primitive]) -> np.ndarray:
    """Per-point outside distance to the nearest primitive (vectorized)."""
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    best = np.full(points.shape[0], np.inf)
    for prim in prims:
        inv = prim.pose.inverse()
        q = points @ inv.rot.T + inv.pos
        if isinstance(prim, Box):
            d = np.abs(q) - prim.dims / 2.0
            dist = np.linalg.norm(np.maximum(d, 0.0), axis=1)
        else:
            dr = np.hypot(q[:, 0], q[:, 1]) - prim.radius
            dz = np.abs(q[:, 2]) - prim.length / 2.0
            dist = np.hypot(np.maximum(dr, 0.0), np.maximum(dz, 0.0))
        np.minimum(best, dist, out=best)
    return best


def segment_box_hit(p0: np.ndarray, p1: np.ndarray, box: Box, inflate: float = 0.0) -> bool:
    """True if the segment p0-p1 intersects the (optionally inflated) box."""
    inv = box.pose.inverse()
    o = inv.apply(p0)
    e = inv.apply(p1)
    d = e - o
    half = box.dims / 2.0 + inflate
    invd = _safe_inv(d)
    t1 = (-half - o) * invd
    t2 = (half - o) * invd
    tmin = max(np.minimum(t1, t2).max(), 0.0)
    tmax = min(np.maximum(t1, t2).min(), 1.0)
    return bool(tmax >= tmin)


def segment_closest_point_to(p0: np.ndarray, p1: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Point on segment p0-p1 closest to x."""
    p0 = np.asarray(p0, dtype=np.float64)
    d = np.asarray(p1, dtype=np.float64) - p0
    denom = float(d @ d)
    if denom < EPS:
        return p0
    t = float(np.clip((np.asarray(x) - p0) @ d / denom, 0.0, 1.0))
    return p0 + t * d
