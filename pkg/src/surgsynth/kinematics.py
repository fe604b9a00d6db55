"""Articulated pose representation and forward kinematics.

An instrument is a tree of revolute joints rooted at the shaft. Each mesh
part is bound to exactly one joint; forward kinematics turns a joint-angle
map into one rigid world transform per part. Rotations are axis-angle
composed into row-major 3x3 matrices; all functions are pure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError

JointPose = dict  # joint id -> angle in radians


@dataclass
class RigidTransform:
    """Rotation (3x3, row-major) followed by translation."""

    rotation: np.ndarray
    translation: np.ndarray

    @staticmethod
    def identity() -> "RigidTransform":
        return RigidTransform(np.eye(3), np.zeros(3))

    @staticmethod
    def from_translation(t) -> "RigidTransform":
        return RigidTransform(np.eye(3), np.asarray(t, dtype=float))

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        """self ∘ other: apply `other` first, then `self`."""
        return RigidTransform(
            self.rotation @ other.rotation,
            self.rotation @ other.translation + self.translation,
        )

    def apply(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        return pts @ self.rotation.T + self.translation

    def to_json(self) -> dict:
        return {
            "rotation": [[float(v) for v in row] for row in self.rotation],
            "translation": [float(v) for v in self.translation],
        }


@dataclass
class Joint:
    id: str
    parent: str | None
    pivot: np.ndarray          # in parent frame
    axis: np.ndarray           # unit vector
    limits: tuple[float, float]  # [min, max] radians

    def __post_init__(self):
        self.pivot = np.asarray(self.pivot, dtype=float)
        self.axis = np.asarray(self.axis, dtype=float)
        norm = float(np.linalg.norm(self.axis))
        if abs(norm - 1.0) > 1e-9:
            raise ValidationError("axis", f"joint {self.id!r} axis norm {norm} != 1")
        if self.limits[0] > self.limits[1]:
            raise ValidationError(
                "limits", f"joint {self.id!r} min {self.limits[0]} > max {self.limits[1]}"
            )


@dataclass
class KinematicChain:
    """Topologically sorted joints plus part-to-joint bindings."""

    joints: list[Joint]
    part_bindings: dict[str, str]  # part id -> joint id
    root_transform: RigidTransform = field(default_factory=RigidTransform.identity)

    def __post_init__(self):
        seen: set[str] = set()
        roots = 0
        for joint in self.joints:
            if joint.parent is None:
                roots += 1
            elif joint.parent not in seen:
                raise ValidationError(
                    "joints", f"joint {joint.id!r} appears before its parent {joint.parent!r}"
                )
            if joint.id in seen:
                raise ValidationError("joints", f"duplicate joint id {joint.id!r}")
            seen.add(joint.id)
        if roots != 1:
            raise ValidationError("joints", f"chain must have exactly one root, found {roots}")
        for part, joint_id in self.part_bindings.items():
            if joint_id not in seen:
                raise ValidationError(
                    "part_bindings", f"part {part!r} bound to unknown joint {joint_id!r}"
                )

    def joint_ids(self) -> list[str]:
        return [j.id for j in self.joints]

    def joint(self, joint_id: str) -> Joint:
        for j in self.joints:
            if j.id == joint_id:
                return j
        raise KeyError(joint_id)


def rotation_about_axis(axis: np.ndarray, angle: float) -> np.ndarray:
    """Rodrigues rotation matrix for a unit axis."""
    x, y, z = axis
    c = math.cos(angle)
    s = math.sin(angle)
    t = 1.0 - c
    return np.array(
        [
            [t * x * x + c, t * x * y - s * z, t * x * z + s * y],
            [t * x * y + s * z, t * y * y + c, t * y * z - s * x],
            [t * x * z - s * y, t * y * z + s * x, t * z * z + c],
        ]
    )


def _joint_local_transform(joint: Joint, angle: float) -> RigidTransform:
    # rotate about the joint axis through its pivot: T(pivot) R T(-pivot)
    rot = rotation_about_axis(joint.axis, angle)
    return RigidTransform(rot, joint.pivot - rot @ joint.pivot)


def forward_kinematics(chain: KinematicChain, pose: JointPose) -> dict[str, RigidTransform]:
    """World transform per part id for the given joint angles.

    Each part transform is root ∘ (composition of parent-chain pivot
    rotations). Raises on missing or non-finite angles.
    """
    chain_ids = set(chain.joint_ids())
    missing = chain_ids - set(pose)
    if missing:
        raise ValidationError("pose", f"missing joint angles: {sorted(missing)}")
    for joint_id in chain_ids:
        if not math.isfinite(pose[joint_id]):
            raise ValidationError("pose", f"non-finite angle for joint {joint_id!r}")

    world: dict[str, RigidTransform] = {}
    for joint in chain.joints:
        local = _joint_local_transform(joint, float(pose[joint.id]))
        parent = chain.root_transform if joint.parent is None else world[joint.parent]
        world[joint.id] = parent.compose(local)

    return {part: world[joint_id] for part, joint_id in chain.part_bindings.items()}


def clamp_pose(chain: KinematicChain, pose: JointPose) -> JointPose:
    """Clamp every angle into its joint's limits. Idempotent."""
    chain_ids = set(chain.joint_ids())
    missing = chain_ids - set(pose)
    if missing:
        raise ValidationError("pose", f"missing joint angles: {sorted(missing)}")
    clamped = {}
    for joint in chain.joints:
        lo, hi = joint.limits
        clamped[joint.id] = min(max(float(pose[joint.id]), lo), hi)
    return clamped
