"""Fixed-camera depth rendering and the partially occluded point-cloud observation.

A pinhole camera in front of the door renders door, frame and robot geometry
by nearest-hit ray casting; depth pixels unproject to world points, get
cropped to the task workspace and farthest-point-sampled down to exactly 4096
points. Occlusion (robot in front of the door, door self-occlusion) falls out
of the nearest-hit rule.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .assets import DoorInstance
from .errors import EmptyObservationError, InvalidArgumentError, NearClipError
from .geometry import Primitive, ray_scene, rotation_angle_between, unit
from .nets.rotations import matrix_to_rot6d
from .sim import RobotModel, SimState, robot_prims

CLOUD_SIZE = 4096
STATE_DIM = 16
FPS_MAX_CANDIDATES = 12288   # seeded pre-subsample cap before exact FPS


@dataclass(frozen=True)
class CameraConfig:
    """Pinhole camera; position/look_at default to a door-front view."""

    position: tuple[float, float, float] | None = None    # default: 1.5 m out, 1.3 m high
    look_at: tuple[float, float, float] | None = None     # default: door center
    vfov: float = math.radians(60.0)
    width: int = 256
    height: int = 256
    near: float = 0.05
    far: float = 5.0

    def validate(self) -> None:
        if not (0.0 < self.near < self.far):
            raise InvalidArgumentError("camera requires 0 < near < far")
        if not (0.0 < self.vfov < math.pi):
            raise InvalidArgumentError("vfov must be in (0, pi)")

    def resolve(self, instance: DoorInstance) -> tuple[np.ndarray, np.ndarray]:
        center = instance.door_center
        pos = np.array(self.position) if self.position is not None else \
            np.array([center[0], 1.5, 1.3])
        target = np.array(self.look_at) if self.look_at is not None else center
        return pos.astype(np.float64), target.astype(np.float64)

    def basis(self, instance: DoorInstance) -> tuple[np.ndarray, np.ndarray]:
        """(camera origin, rotation with columns = [right, down, forward])."""
        pos, target = self.resolve(instance)
        forward = unit(target - pos)
        world_up = np.array([0.0, 0.0, 1.0])
        right = unit(np.cross(forward, world_up))
        down = np.cross(forward, right)
        return pos, np.column_stack([right, down, forward])

    @property
    def focal(self) -> float:
        return (self.height / 2.0) / math.tan(self.vfov / 2.0)


@dataclass(frozen=True)
class DepthImage:
    """Z-depth grid in meters; misses encoded as +inf."""

    values: np.ndarray           # (height, width) float32
    camera: CameraConfig
    origin: np.ndarray
    rotation: np.ndarray         # columns [right, down, forward]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class Observation:
    """Exactly 4096 world-frame points plus the 16-dim robot state vector."""

    cloud: np.ndarray            # (4096, 3) float32
    state: np.ndarray            # (16,) float32
    duplicated: bool = False

    def __post_init__(self):
        if self.cloud.shape != (CLOUD_SIZE, 3):
            raise InvalidArgumentError(f"cloud must be ({CLOUD_SIZE}, 3), got {self.cloud.shape}")
        if self.state.shape != (STATE_DIM,):
            raise InvalidArgumentError(f"state must be ({STATE_DIM},), got {self.state.shape}")
        if not (np.all(np.isfinite(self.cloud)) and np.all(np.isfinite(self.state))):
            raise InvalidArgumentError("observation entries must be finite")


_PIXEL_DIR_CACHE: dict[tuple, np.ndarray] = {}


def _pixel_dirs(camera: CameraConfig) -> np.ndarray:
    """Camera-frame ray directions with unit forward component (t == z-depth)."""
    key = (camera.width, camera.height, camera.vfov)
    cached = _PIXEL_DIR_CACHE.get(key)
    if cached is not None:
        return cached
    f = camera.focal
    us = (np.arange(camera.width) + 0.5) - camera.width / 2.0
    vs = (np.arange(camera.height) + 0.5) - camera.height / 2.0
    uu, vv = np.meshgrid(us, vs)
    dirs = np.stack([uu / f, vv / f, np.ones_like(uu)], axis=-1).reshape(-1, 3)
    _PIXEL_DIR_CACHE[key] = dirs
    return dirs


def scene_primitives(instance: DoorInstance, state: SimState, robot: RobotModel,
                     include_robot: bool = True) -> list[Primitive]:
    prims = instance.scene_prims(state.theta_d, state.theta_h)
    if include_robot:
        prims.extend(robot_prims(state, robot))
    return prims


def render_depth(instance: DoorInstance, state: SimState, robot: RobotModel,
                 camera: CameraConfig, include_robot: bool = True) -> DepthImage:
    """Nearest-hit z-depth over door, frame, wall and robot geometry."""
    camera.validate()
    origin, rot = camera.basis(instance)
    dirs_world = _pixel_dirs(camera) @ rot.T
    prims = scene_primitives(instance, state, robot, include_robot=include_robot)
    t = ray_scene(origin, dirs_world, prims)
    finite = np.isfinite(t)
    if np.any(finite & (t < camera.near)):
        raise NearClipError("geometry intersects the camera near plane")
    t = np.where(finite & (t <= camera.far), t, np.inf)
    return DepthImage(values=t.reshape(camera.height, camera.width).astype(np.float32),
                      camera=camera, origin=origin, rotation=rot)


def depth_to_cloud(depth: DepthImage) -> np.ndarray:
    """Unproject finite pixels through the pinhole model into world points."""
    cam = depth.camera
    f = cam.focal
    vals = depth.values
    vv, uu = np.nonzero(np.isfinite(vals))
    if vv.size == 0:
        return np.zeros((0, 3), dtype=np.float64)
    d = vals[vv, uu].astype(np.float64)
    x = ((uu + 0.5) - cam.width / 2.0) / f * d
    y = ((vv + 0.5) - cam.height / 2.0) / f * d
    pts_cam = np.stack([x, y, d], axis=-1)
    return pts_cam @ depth.rotation.T + depth.origin


def project_to_pixel(point: np.ndarray, depth: DepthImage) -> tuple[float, float]:
    """World point -> (u, v) pixel coordinates; inverse of depth_to_cloud."""
    cam = depth.camera
    p = (np.asarray(point, dtype=np.float64) - depth.origin) @ depth.rotation
    u = p[0] / p[2] * cam.focal + cam.width / 2.0 - 0.5
    v = p[1] / p[2] * cam.focal + cam.height / 2.0 - 0.5
    return float(u), float(v)


def downsample_fps(points: np.ndarray, n: int = CLOUD_SIZE, seed: int = 0,
                   max_candidates: int | None = None) -> tuple[np.ndarray, bool]:
    """Farthest-point sampling with a seed-chosen start.

    Fewer than n inputs are kept whole and topped up by seeded resampling
    (returned flag marks the duplication). `max_candidates` optionally caps
    the candidate set by a seeded random pre-subsample before exact FPS.
    """
    pts = np.asarray(points, dtype=np.float32).reshape(-1, 3)
    if pts.shape[0] == 0:
        raise EmptyObservationError("cannot downsample an empty point set")
    rng = np.random.default_rng([int(seed), 11])
    m = pts.shape[0]
    if m <= n:
        if m == n:
            return pts[rng.permutation(m)].copy(), False
        fill = rng.integers(0, m, size=n - m)
        return np.concatenate([pts, pts[fill]], axis=0), True
    if max_candidates is not None and m > max_candidates:
        keep = rng.choice(m, size=max_candidates, replace=False)
        pts = pts[keep]
        m = max_candidates
    p32 = np.ascontiguousarray(pts, dtype=np.float32)
    sq = (p32 * p32).sum(axis=1)
    start = int(rng.integers(m))
    sel = np.empty(n, dtype=np.int64)
    sel[0] = start
    d = sq - 2.0 * (p32 @ p32[start]) + sq[start]
    for i in range(1, n):
        j = int(d.argmax())
        sel[i] = j
        cand = sq - 2.0 * (p32 @ p32[j])
        cand += sq[j]
        np.minimum(d, cand, out=d)
    return pts[sel].copy(), False


def workspace_box(instance: DoorInstance, state: SimState) -> tuple[np.ndarray, np.ndarray]:
    """(lo, hi) corners of the crop region around the door and robot."""
    body = instance.body
    lo = np.array([-(body.width + 0.30), -0.35, -0.05])
    hi = np.array([body.width + 0.30,
                   max(float(state.base_xy_yaw[1]) + 0.50, 2.0),
                   body.height + 0.45])
    return lo, hi


def robot_state_vector(state: SimState, robot: RobotModel) -> np.ndarray:
    """16-dim state: base pose, ee pose (pos + rot6d), aperture, speeds, attachment."""
    lin = float(np.linalg.norm(state.ee_pose.pos - state.prev_ee_pose.pos))
    ang = rotation_angle_between(state.prev_ee_pose.rot, state.ee_pose.rot)
    aperture = 0.0 if state.attached is not None else robot.aperture
    vec = np.concatenate([
        state.base_xy_yaw,
        state.ee_pose.pos,
        matrix_to_rot6d(state.ee_pose.rot),
        [aperture, lin, ang, 1.0 if state.attached is not None else 0.0],
    ])
    return vec.astype(np.float32)


def observe(instance: DoorInstance, state: SimState, robot: RobotModel,
            camera: CameraConfig, seed: int,
            fps_max_candidates: int | None = FPS_MAX_CANDIDATES) -> Observation:
    """Render, unproject, crop to the workspace and sample exactly 4096 points."""
    depth = render_depth(instance, state, robot, camera)
    pts = depth_to_cloud(depth)
    lo, hi = workspace_box(instance, state)
    mask = np.all((pts >= lo) & (pts <= hi), axis=1)
    pts = pts[mask]
    if pts.shape[0] == 0:
        raise EmptyObservationError("workspace crop is empty; door out of frame")
    cloud, duplicated = downsample_fps(pts, CLOUD_SIZE, seed=seed,
                                       max_candidates=fps_max_candidates)
    return Observation(cloud=cloud.astype(np.float32),
                       state=robot_state_vector(state, robot),
                       duplicated=duplicated)


# ---------------------------------------------------------------------------
# dumps: ASCII PLY clouds and PGM-style depth grids
# ---------------------------------------------------------------------------

def write_ply(path, points: np.ndarray, scores: np.ndarray | None = None) -> None:
    pts = np.asarray(points, dtype=np.float32).reshape(-1, 3)
    lines = ["ply", "format ascii 1.0", f"element vertex {pts.shape[0]}",
             "property float x", "property float y", "property float z"]
    if scores is not None:
        lines.append("property float score")
    lines.append("end_header")
    for i, p in enumerate(pts):
        row = f"{p[0]:.6f} {p[1]:.6f} {p[2]:.6f}"
        if scores is not None:
            row += f" {float(scores[i]):.6f}"
        lines.append(row)
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_ply(path) -> tuple[np.ndarray, np.ndarray | None]:
    with open(path) as fh:
        lines = fh.read().splitlines()
    n = 0
    has_score = False
    body_at = 0
    for i, line in enumerate(lines):
        if line.startswith("element vertex"):
            n = int(line.split()[-1])
        if line.strip() == "property float score":
            has_score = True
        if line.strip() == "end_header":
            body_at = i + 1
            break
    rows = np.array([[float(x) for x in ln.split()] for ln in lines[body_at:body_at + n]])
    if has_score:
        return rows[:, :3], rows[:, 3]
    return rows, None


def write_depth_pgm(path, depth: DepthImage) -> None:
    """Text PGM, depth in integer millimeters; misses saturate at 65535."""
    vals = depth.values
    mm = np.where(np.isfinite(vals), np.clip(vals * 1000.0, 0, 65534), 65535.0)
    mm = mm.astype(np.int64)
    with open(path, "w") as fh:
        fh.write(f"P2\n{depth.width} {depth.height}\n65535\n")
        for row in mm:
            fh.write(" ".join(str(v) for v in row) + "\n")
