"""Procedural door bodies and handles, composed into articulated door instances.

All geometry lives in the "assembly frame": the closed door board is centered
on x, spans z in [0, height], has thickness along y, and faces the robot and
camera at +y. The two revolute joints are the door hinge (vertical line at one
board edge) and the handle joint (axis normal to the board face).
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import CompatibilityError, InvalidArgumentError
from .geometry import Box, Cylinder, Pose, Primitive, point_primitive_surface_distance, pose_about_axis, unit

ASSET_SCHEMA = "doorverse-asset-v1"

CATEGORIES = ("Interior", "Window", "Car", "Safe", "StorageFurniture", "Refrigerator")
TRAIN_CATEGORIES = ("Interior", "Window", "Car", "Safe")
TEST_CATEGORIES = ("StorageFurniture", "Refrigerator")
MECHANISMS = ("lever", "round", "key", "valve")
SPLITS = ("train", "test_shape", "test_category")

# Per-mechanism unlock thresholds (rad); overridable per instance.
DEFAULT_THRE = {"lever": 0.5, "round": 1.0, "key": 1.2, "valve": 1.5}

# Body parameter ranges per category: (width, height, thickness, theta_d_max),
# plus relative socket height and the mechanisms mounted on that category.
BODY_TEMPLATES: dict[str, dict] = {
    "Interior": {
        "width": (0.80, 1.00), "height": (1.90, 2.10), "thickness": (0.035, 0.050),
        "theta_d_max": (1.70, 2.20), "socket_rel_height": (0.48, 0.54),
        "mechanisms": ("lever", "round", "key"),
    },
    "Window": {
        "width": (0.45, 0.70), "height": (0.80, 1.40), "thickness": (0.020, 0.035),
        "theta_d_max": (1.20, 1.60), "socket_rel_height": (0.45, 0.55),
        "mechanisms": ("lever", "round"),
    },
    "Car": {
        "width": (0.85, 1.10), "height": (0.75, 0.95), "thickness": (0.040, 0.060),
        "theta_d_max": (1.00, 1.30), "socket_rel_height": (0.55, 0.65),
        "mechanisms": ("lever", "key"),
    },
    "Safe": {
        "width": (0.45, 0.70), "height": (0.50, 0.80), "thickness": (0.080, 0.120),
        "theta_d_max": (1.40, 1.70), "socket_rel_height": (0.45, 0.55),
        "mechanisms": ("valve", "key", "round"),
    },
    "StorageFurniture": {
        "width": (0.40, 0.60), "height": (0.70, 1.30), "thickness": (0.020, 0.030),
        "theta_d_max": (1.60, 2.20), "socket_rel_height": (0.55, 0.70),
        "mechanisms": ("round", "lever"),
    },
    "Refrigerator": {
        "width": (0.60, 0.80), "height": (1.40, 1.80), "thickness": (0.050, 0.080),
        "theta_d_max": (1.50, 2.00), "socket_rel_height": (0.50, 0.62),
        "mechanisms": ("lever", "round"),
    },
}

FRAME_MARGIN = 0.5     # wall strip extent around the opening, meters
FRAME_GAP = 0.004      # clearance between board edge and frame
HANDLE_EDGE_OFFSET = (0.06, 0.12)  # socket distance from the free edge


def _rng(*seeds: int) -> np.random.Generator:
    return np.random.default_rng(list(seeds))


def _u(rng: np.random.Generator, lo: float, hi: float) -> float:
    return float(lo + (hi - lo) * rng.random())


@dataclass(frozen=True)
class HandleSpec:
    """A handle mechanism in its local frame (origin at the mount point, +z out of the face)."""

    mechanism: str
    primitives: tuple[Primitive, ...]
    joint_axis: np.ndarray            # unit, in mount frame
    joint_origin: Pose                # handle joint pose in mount frame
    thre: float                       # unlock threshold, rad
    theta_h_max: float                # joint limit, rad
    grasp_anchor: np.ndarray          # on-surface point, local frame
    anchor_tangent: np.ndarray        # handle elongation direction at the anchor, local
    anchor_thickness: float           # graspable cross-section at the anchor, meters

    def __post_init__(self):
        object.__setattr__(self, "joint_axis", np.asarray(self.joint_axis, dtype=np.float64))
        object.__setattr__(self, "grasp_anchor", np.asarray(self.grasp_anchor, dtype=np.float64))
        object.__setattr__(self, "anchor_tangent", np.asarray(self.anchor_tangent, dtype=np.float64))

    def validate(self) -> None:
        if abs(np.linalg.norm(self.joint_axis) - 1.0) > 1e-9:
            raise InvalidArgumentError("handle joint_axis must be unit length")
        if not (0.0 < self.thre < self.theta_h_max):
            raise InvalidArgumentError("unlock threshold must satisfy 0 < thre < theta_h_max")
        for prim in self.primitives:
            dims = prim.dims if isinstance(prim, Box) else (prim.radius, prim.length)
            if any(d <= 0.0 for d in np.atleast_1d(dims)):
                raise InvalidArgumentError("handle primitive dimensions must be positive")
        if self.surface_distance(self.grasp_anchor) >= 1e-6:
            raise InvalidArgumentError("grasp_anchor must lie on a handle primitive surface")

    def surface_distance(self, point_local: np.ndarray) -> float:
        return min(point_primitive_surface_distance(point_local, p) for p in self.primitives)

    def to_dict(self) -> dict:
        return {
            "mechanism": self.mechanism,
            "primitives": [_prim_to_dict(p) for p in self.primitives],
            "joint_axis": [float(x) for x in self.joint_axis],
            "joint_origin": self.joint_origin.to_dict(),
            "thre": self.thre,
            "theta_h_max": self.theta_h_max,
            "grasp_anchor": [float(x) for x in self.grasp_anchor],
            "anchor_tangent": [float(x) for x in self.anchor_tangent],
            "anchor_thickness": self.anchor_thickness,
        }

    @staticmethod
    def from_dict(d: dict) -> "HandleSpec":
        return HandleSpec(
            mechanism=d["mechanism"],
            primitives=tuple(_prim_from_dict(p) for p in d["primitives"]),
            joint_axis=np.array(d["joint_axis"]),
            joint_origin=Pose.from_dict(d["joint_origin"]),
            thre=d["thre"],
            theta_h_max=d["theta_h_max"],
            grasp_anchor=np.array(d["grasp_anchor"]),
            anchor_tangent=np.array(d["anchor_tangent"]),
            anchor_thickness=d["anchor_thickness"],
        )


@dataclass(frozen=True)
class BodySpec:
    """A door board plus surrounding frame, hinge and handle socket."""

    category: str
    width: float
    height: float
    thickness: float
    hinge_side: str                   # "left" | "right"
    theta_d_max: float
    socket_pose: Pose                 # mount pose on the front board face, assembly frame
    frame_prims: tuple[Box, ...]      # wall strips around the opening, assembly frame

    def validate(self) -> None:
        if self.category not in CATEGORIES:
            raise InvalidArgumentError(f"unknown category {self.category!r}")
        if min(self.width, self.height, self.thickness) <= 0.0:
            raise InvalidArgumentError("body dimensions must be positive")
        if not (0.0 < self.theta_d_max <= math.pi):
            raise InvalidArgumentError("theta_d_max must be in (0, pi]")
        # socket origin must lie on the front face plane y = thickness / 2
        if abs(self.socket_pose.pos[1] - self.thickness / 2.0) >= 1e-6:
            raise InvalidArgumentError("socket_pose must lie on the board face plane")

    @property
    def hinge_pos(self) -> np.ndarray:
        x = -self.width / 2.0 if self.hinge_side == "left" else self.width / 2.0
        return np.array([x, 0.0, 0.0])

    @property
    def open_sign(self) -> float:
        """Sign of the world z-rotation that swings the free edge toward +y."""
        return 1.0 if self.hinge_side == "left" else -1.0

    def board_box_closed(self) -> Box:
        return Box(Pose(np.eye(3), np.array([0.0, 0.0, self.height / 2.0])),
                   np.array([self.width, self.thickness, self.height]))

    def to_dict(self) -> dict:
        return {
            "category": self.category,
            "width": self.width,
            "height": self.height,
            "thickness": self.thickness,
            "hinge_side": self.hinge_side,
            "theta_d_max": self.theta_d_max,
            "socket_pose": self.socket_pose.to_dict(),
            "frame_prims": [_prim_to_dict(p) for p in self.frame_prims],
        }

    @staticmethod
    def from_dict(d: dict) -> "BodySpec":
        return BodySpec(
            category=d["category"], width=d["width"], height=d["height"],
            thickness=d["thickness"], hinge_side=d["hinge_side"],
            theta_d_max=d["theta_d_max"], socket_pose=Pose.from_dict(d["socket_pose"]),
            frame_prims=tuple(_prim_from_dict(p) for p in d["frame_prims"]),
        )


@dataclass(frozen=True)
class LatchModel:
    """Latch and spring constants for the door/handle force model."""

    k1: float = 3.0   # door spring, N/rad
    k2: float = 3.0   # handle spring, N/rad
    f_f: float = 150.0  # latch blocking force, N
    thre: float = 0.5   # unlock threshold, rad

    def validate(self) -> None:
        if min(self.k1, self.k2, self.f_f) < 0.0 or self.thre <= 0.0:
            raise InvalidArgumentError("latch constants must be non-negative, thre positive")

    def to_dict(self) -> dict:
        return {"k1": self.k1, "k2": self.k2, "f_f": self.f_f, "thre": self.thre}

    @staticmethod
    def from_dict(d: dict) -> "LatchModel":
        return LatchModel(k1=d["k1"], k2=d["k2"], f_f=d["f_f"], thre=d["thre"])


@dataclass(frozen=True)
class DoorInstance:
    """Composed articulated door: world -> hinge(theta_d) -> board -> handle joint(theta_h)."""

    id: str
    body: BodySpec
    handle: HandleSpec
    latch: LatchModel
    split_tag: str = "train"

    # -- forward kinematics ------------------------------------------------

    def board_pose(self, theta_d: float) -> Pose:
        return pose_about_axis(self.body.hinge_pos, np.array([0.0, 0.0, 1.0]),
                               self.body.open_sign * theta_d)

    def fk_socket(self, theta_d: float) -> Pose:
        return self.board_pose(theta_d).compose(self.body.socket_pose)

    def fk_handle(self, theta_d: float, theta_h: float) -> Pose:
        joint = self.fk_socket(theta_d).compose(self.handle.joint_origin)
        spin = Pose(np.eye(3))
        if theta_h != 0.0:
            from .geometry import rot_axis_angle
            spin = Pose(rot_axis_angle(self.handle.joint_axis, theta_h))
        return joint.compose(spin)

    def door_axis_world(self) -> tuple[np.ndarray, np.ndarray]:
        """(axis, origin) of the door joint in world, oriented so theta_d >= 0 opens."""
        return np.array([0.0, 0.0, self.body.open_sign]), self.body.hinge_pos

    def handle_axis_world(self, theta_d: float) -> tuple[np.ndarray, np.ndarray]:
        joint = self.fk_socket(theta_d).compose(self.handle.joint_origin)
        return joint.apply_dir(self.handle.joint_axis), joint.pos

    def grasp_anchor_world(self, theta_d: float, theta_h: float) -> np.ndarray:
        return self.fk_handle(theta_d, theta_h).apply(self.handle.grasp_anchor)

    def anchor_tangent_world(self, theta_d: float, theta_h: float) -> np.ndarray:
        return self.fk_handle(theta_d, theta_h).apply_dir(self.handle.anchor_tangent)

    # -- world geometry ----------------------------------------------------

    def board_box(self, theta_d: float) -> Box:
        return self.body.board_box_closed().transformed(self.board_pose(theta_d))

    def handle_prims(self, theta_d: float, theta_h: float) -> list[Primitive]:
        world = self.fk_handle(theta_d, theta_h)
        return [p.transformed(world) for p in self.handle.primitives]

    def door_prims(self, theta_d: float, theta_h: float) -> list[Primitive]:
        return [self.board_box(theta_d), *self.handle_prims(theta_d, theta_h)]

    def scene_prims(self, theta_d: float, theta_h: float) -> list[Primitive]:
        return [*self.door_prims(theta_d, theta_h), *self.body.frame_prims]

    @property
    def door_center(self) -> np.ndarray:
        return np.array([0.0, 0.0, self.body.height / 2.0])

    # -- validation / io -----------------------------------------------------

    def validate(self) -> None:
        self.body.validate()
        self.handle.validate()
        self.latch.validate()
        if self.split_tag not in SPLITS:
            raise InvalidArgumentError(f"unknown split tag {self.split_tag!r}")
        if not self.fk_handle(0.0, 0.0).almost_equal(
                self.body.socket_pose.compose(self.handle.joint_origin), tol=1e-9):
            raise InvalidArgumentError("FK at zero must place the handle at the socket")

    def to_dict(self) -> dict:
        return {
            "schema": ASSET_SCHEMA,
            "id": self.id,
            "split_tag": self.split_tag,
            "body": self.body.to_dict(),
            "handle": self.handle.to_dict(),
            "latch": self.latch.to_dict(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1)

    @staticmethod
    def from_dict(d: dict) -> "DoorInstance":
        if d.get("schema") != ASSET_SCHEMA:
            raise InvalidArgumentError(f"unsupported asset schema {d.get('schema')!r}")
        return DoorInstance(
            id=d["id"], body=BodySpec.from_dict(d["body"]),
            handle=HandleSpec.from_dict(d["handle"]),
            latch=LatchModel.from_dict(d["latch"]), split_tag=d["split_tag"],
        )

    @staticmethod
    def from_json(text: str) -> "DoorInstance":
        return DoorInstance.from_dict(json.loads(text))


def _prim_to_dict(p: Primitive) -> dict:
    if isinstance(p, Box):
        return {"shape": "box", "pose": p.pose.to_dict(), "dims": [float(x) for x in p.dims]}
    return {"shape": "cylinder", "pose": p.pose.to_dict(), "radius": p.radius, "length": p.length}


def _prim_from_dict(d: dict) -> Primitive:
    if d["shape"] == "box":
        return Box(Pose.from_dict(d["pose"]), np.array(d["dims"]))
    if d["shape"] == "cylinder":
        return Cylinder(Pose.from_dict(d["pose"]), d["radius"], d["length"])
    raise InvalidArgumentError(f"unknown primitive shape {d['shape']!r}")


# ---------------------------------------------------------------------------
# generators
# ---------------------------------------------------------------------------

def generate_body(category: str, seed: int) -> BodySpec:
    """Draw a BodySpec from the category template; deterministic per (category, seed)."""
    if category not in CATEGORIES:
        raise InvalidArgumentError(f"unknown category {category!r}")
    tpl = BODY_TEMPLATES[category]
    rng = _rng(CATEGORIES.index(category), seed)
    width = _u(rng, *tpl["width"])
    height = _u(rng, *tpl["height"])
    thickness = _u(rng, *tpl["thickness"])
    theta_d_max = _u(rng, *tpl["theta_d_max"])
    hinge_side = "left" if rng.random() < 0.5 else "right"
    edge_offset = _u(rng, *HANDLE_EDGE_OFFSET)
    rel_h = _u(rng, *tpl["socket_rel_height"])

    free_x = width / 2.0 if hinge_side == "left" else -width / 2.0
    toward_hinge = -1.0 if hinge_side == "left" else 1.0
    sx = free_x + toward_hinge * edge_offset
    socket_pos = np.array([sx, thickness / 2.0, rel_h * height])
    # mount frame: z out of the face (+y), x toward the hinge, y = z cross x
    x_m = np.array([toward_hinge, 0.0, 0.0])
    z_m = np.array([0.0, 1.0, 0.0])
    y_m = np.cross(z_m, x_m)
    socket_pose = Pose(np.column_stack([x_m, y_m, z_m]), socket_pos)

    m = FRAME_MARGIN
    g = FRAME_GAP
    wall_t = max(thickness, 0.04)
    strips = (
        Box(Pose(np.eye(3), np.array([-(width / 2.0 + g + m / 2.0), 0.0, (height + m) / 2.0])),
            np.array([m, wall_t, height + m])),
        Box(Pose(np.eye(3), np.array([width / 2.0 + g + m / 2.0, 0.0, (height + m) / 2.0])),
            np.array([m, wall_t, height + m])),
        Box(Pose(np.eye(3), np.array([0.0, 0.0, height + g + m / 2.0])),
            np.array([width + 2.0 * (g + m), wall_t, m])),
    )
    spec = BodySpec(category=category, width=width, height=height, thickness=thickness,
                    hinge_side=hinge_side, theta_d_max=theta_d_max,
                    socket_pose=socket_pose, frame_prims=strips)
    spec.validate()
    return spec


def _lever_handle(rng: np.random.Generator, thre: float) -> HandleSpec:
    bar_len = _u(rng, 0.09, 0.15)
    bar_w = _u(rng, 0.020, 0.030)   # graspable cross-section, local y
    bar_h = _u(rng, 0.016, 0.024)   # local z
    sp_r = _u(rng, 0.008, 0.012)
    sp_len = _u(rng, 0.050, 0.070)
    spindle = Cylinder(Pose(np.eye(3), np.array([0.0, 0.0, sp_len / 2.0])), sp_r, sp_len)
    bar = Box(Pose(np.eye(3), np.array([bar_len / 2.0, 0.0, sp_len - bar_h / 2.0])),
              np.array([bar_len, bar_w, bar_h]))
    anchor = np.array([0.85 * bar_len, 0.0, sp_len])  # on the bar front face
    return HandleSpec(
        mechanism="lever", primitives=(spindle, bar),
        joint_axis=np.array([0.0, 0.0, -1.0]),  # positive theta_h swings the bar downward
        joint_origin=Pose.identity(), thre=thre, theta_h_max=_u(rng, 0.9, 1.3),
        grasp_anchor=anchor, anchor_tangent=np.array([1.0, 0.0, 0.0]),
        anchor_thickness=bar_w,
    )


def _round_handle(rng: np.random.Generator, thre: float) -> HandleSpec:
    neck_r = _u(rng, 0.012, 0.018)
    neck_len = _u(rng, 0.025, 0.040)
    knob_r = _u(rng, 0.025, 0.038)
    knob_d = _u(rng, 0.020, 0.035)
    neck = Cylinder(Pose(np.eye(3), np.array([0.0, 0.0, neck_len / 2.0])), neck_r, neck_len)
    knob = Cylinder(Pose(np.eye(3), np.array([0.0, 0.0, neck_len + knob_d / 2.0])), knob_r, knob_d)
    anchor = np.array([knob_r, 0.0, neck_len + knob_d / 2.0])  # knob rim
    return HandleSpec(
        mechanism="round", primitives=(neck, knob),
        joint_axis=np.array([0.0, 0.0, 1.0]),
        joint_origin=Pose.identity(), thre=thre, theta_h_max=_u(rng, 1.5, 2.0),
        grasp_anchor=anchor, anchor_tangent=np.array([0.0, 1.0, 0.0]),
        anchor_thickness=2.0 * knob_r,
    )


def _key_handle(rng: np.random.Generator, thre: float) -> HandleSpec:
    sh_r = _u(rng, 0.004, 0.006)
    sh_len = _u(rng, 0.020, 0.030)
    head_w = _u(rng, 0.016, 0.026)
    head_h = _u(rng, 0.030, 0.045)
    head_d = _u(rng, 0.006, 0.010)
    shaft = Cylinder(Pose(np.eye(3), np.array([0.0, 0.0, sh_len / 2.0])), sh_r, sh_len)
    head = Box(Pose(np.eye(3), np.array([0.0, 0.0, sh_len + head_d / 2.0])),
               np.array([head_w, head_h, head_d]))
    anchor = np.array([0.0, 0.0, sh_len + head_d])  # head front face
    return HandleSpec(
        mechanism="key", primitives=(shaft, head),
        joint_axis=np.array([0.0, 0.0, 1.0]),
        joint_origin=Pose.identity(), thre=thre, theta_h_max=_u(rng, 1.8, 2.4),
        grasp_anchor=anchor, anchor_tangent=np.array([0.0, 1.0, 0.0]),
        anchor_thickness=head_w,
    )


def _valve_handle(rng: np.random.Generator, thre: float) -> HandleSpec:
    hub_r = _u(rng, 0.015, 0.022)
    hub_len = _u(rng, 0.030, 0.050)
    wheel_r = _u(rng, 0.070, 0.110)
    wheel_t = _u(rng, 0.015, 0.022)
    zc = hub_len + wheel_t / 2.0
    hub = Cylinder(Pose(np.eye(3), np.array([0.0, 0.0, hub_len / 2.0])), hub_r, hub_len)
    wheel = Cylinder(Pose(np.eye(3), np.array([0.0, 0.0, zc])), wheel_r, wheel_t)
    from .geometry import rot_z
    spoke_a = Box(Pose(np.eye(3), np.array([0.0, 0.0, zc])),
                  np.array([1.8 * wheel_r, 0.014, 0.012]))
    spoke_b = Box(Pose(rot_z(math.pi / 2.0), np.array([0.0, 0.0, zc])),
                  np.array([1.8 * wheel_r, 0.014, 0.012]))
    anchor = np.array([wheel_r, 0.0, zc])  # wheel rim
    return HandleSpec(
        mechanism="valve", primitives=(hub, wheel, spoke_a, spoke_b),
        joint_axis=np.array([0.0, 0.0, 1.0]),
        joint_origin=Pose.identity(), thre=thre, theta_h_max=_u(rng, 2.5, 3.2),
        grasp_anchor=anchor, anchor_tangent=np.array([0.0, 1.0, 0.0]),
        anchor_thickness=wheel_t,
    )


_HANDLE_BUILDERS = {
    "lever": _lever_handle,
    "round": _round_handle,
    "key": _key_handle,
    "valve": _valve_handle,
}


def generate_handle(mechanism: str, seed: int, thre: float | None = None) -> HandleSpec:
    """Draw a HandleSpec for a mechanism; deterministic per (mechanism, seed)."""
    if mechanism not in MECHANISMS:
        raise InvalidArgumentError(f"unknown mechanism {mechanism!r}")
    rng = _rng(100 + MECHANISMS.index(mechanism), seed)
    spec = _HANDLE_BUILDERS[mechanism](rng, thre if thre is not None else DEFAULT_THRE[mechanism])
    spec.validate()
    return spec


def compose(body: BodySpec, handle: HandleSpec, aperture: float = 0.08,
            instance_id: str | None = None, split_tag: str = "train") -> DoorInstance:
    """Assemble a DoorInstance, checking handle/gripper compatibility."""
    body.validate()
    handle.validate()
    if handle.anchor_thickness >= aperture:
        raise CompatibilityError(
            f"handle anchor_thickness {handle.anchor_thickness:.3f} m does not fit "
            f"gripper aperture {aperture:.3f} m")
    iid = instance_id or f"{body.category.lower()}-{handle.mechanism}"
    inst = DoorInstance(id=iid, body=body, handle=handle,
                        latch=LatchModel(thre=handle.thre), split_tag=split_tag)
    inst.validate()
    return inst


@dataclass
class AssetCatalog:
    """All composed instances plus category index and split partition."""

    instances: dict[str, DoorInstance] = field(default_factory=dict)

    @property
    def by_category(self) -> dict[str, list[str]]:
        out: dict[str, list[str]] = {c: [] for c in CATEGORIES}
        for iid, inst in self.instances.items():
            out[inst.body.category].append(iid)
        return out

    def split_ids(self, split: str) -> list[str]:
        if split not in SPLITS:
            raise InvalidArgumentError(f"unknown split {split!r}")
        return [iid for iid, inst in self.instances.items() if inst.split_tag == split]

    def ids_for(self, split: str, category: str) -> list[str]:
        return [iid for iid in self.split_ids(split)
                if self.instances[iid].body.category == category]

    def validate(self) -> None:
        tags = {s: set(self.split_ids(s)) for s in SPLITS}
        if tags["train"] & (tags["test_shape"] | tags["test_category"]):
            raise InvalidArgumentError("splits must be disjoint")
        if set().union(*tags.values()) != set(self.instances):
            raise InvalidArgumentError("splits must cover the catalog")
        for cat in TEST_CATEGORIES:
            for iid in self.by_category[cat]:
                if self.instances[iid].split_tag != "test_category":
                    raise InvalidArgumentError(f"{cat} instances must be tagged test_category")

    def manifest(self) -> dict:
        return {
            "schema": "doorverse-catalog-v1",
            "instances": [
                {"id": iid, "category": inst.body.category, "split_tag": inst.split_tag,
                 "mechanism": inst.handle.mechanism}
                for iid, inst in sorted(self.instances.items())
            ],
        }

    def content_hash(self) -> str:
        import hashlib
        blob = json.dumps(self.manifest(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def save(self, out_dir: str | Path) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for iid, inst in self.instances.items():
            (out / f"{iid}.json").write_text(inst.to_json())
        (out / "catalog.json").write_text(json.dumps(self.manifest(), sort_keys=True, indent=1))

    @staticmethod
    def load(in_dir: str | Path) -> "AssetCatalog":
        src = Path(in_dir)
        manifest = json.loads((src / "catalog.json").read_text())
        cat = AssetCatalog()
        for entry in manifest["instances"]:
            inst = DoorInstance.from_json((src / f"{entry['id']}.json").read_text())
            cat.instances[inst.id] = inst
        cat.validate()
        return cat


def build_catalog(counts: int | dict[str, int], holdout_fraction: float, seed: int) -> AssetCatalog:
    """Generate and split a catalog: per-category counts, seeded and deterministic."""
    if isinstance(counts, int):
        counts = {c: counts for c in CATEGORIES}
    for cat, n in counts.items():
        if cat not in CATEGORIES:
            raise InvalidArgumentError(f"unknown category {cat!r}")
        if n <= 0:
            raise InvalidArgumentError("per-category counts must be positive")
    if not (0.0 < holdout_fraction < 1.0):
        raise InvalidArgumentError("holdout_fraction must be in (0, 1)")

    catalog = AssetCatalog()
    for cat in CATEGORIES:
        n = counts.get(cat, 0)
        if n == 0:
            continue
        tpl = BODY_TEMPLATES[cat]
        pick = _rng(1000 + CATEGORIES.index(cat), seed)
        n_holdout = math.ceil(holdout_fraction * n)
        holdout_idx = set(pick.permutation(n)[:n_holdout].tolist())
        for i in range(n):
            body = generate_body(cat, seed * 100_003 + i)
            mech = tpl["mechanisms"][int(pick.integers(len(tpl["mechanisms"])))]
            handle = generate_handle(mech, seed * 100_003 + i)
            if cat in TEST_CATEGORIES:
                tag = "test_category"
            else:
                tag = "test_shape" if i in holdout_idx else "train"
            iid = f"{cat.lower()}-{mech}-{i:04d}"
            catalog.instances[iid] = compose(body, handle, instance_id=iid, split_tag=tag)
    catalog.validate()
    return catalog
