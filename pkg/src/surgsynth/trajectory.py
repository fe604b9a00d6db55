"""Seed-derived sinusoidal animation curves and per-frame pose sampling.

Every animated joint follows angle(frame) = offset + amplitude *
sin(2*pi*frequency*frame/fps + phase). Two curve families are drawn per arm
from one PCG32 stream keyed by (master seed, arm-name hash): the jaw family
(open/close, rectified so the open angle never goes negative) and the arm
family (shaft roll, wrist pitch). Amplitude and offset are constructed so
offset +- amplitude lies inside the joint limits exactly, so clamping is
never needed on sampled poses.

Default draw ranges (not paper values): frequency in [0.1, 0.6] Hz, phase in
[0, 2*pi), amplitude in [0.3, 1.0] of the half-limit range.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import PlacementError, ValidationError
from .kinematics import JointPose, KinematicChain, RigidTransform
from .rng import Pcg32, fnv1a64, mix_seed

FREQ_RANGE = (0.1, 0.6)        # Hz; f_max = 0.6
AMPLITUDE_FRAC_RANGE = (0.3, 1.0)
JAW_JOINTS = ("jaw_left", "jaw_right")

# lateral placement: minimum separation factor over shaft diameter-ish scale
SEPARATION_FACTOR = 2.5
SEPARATION_SAFETY = 1.2


@dataclass(frozen=True)
class SinusoidParams:
    amplitude: float
    frequency: float
    phase: float
    static_offset: float

    def to_json(self) -> dict:
        return {
            "amplitude": self.amplitude,
            "frequency": self.frequency,
            "phase": self.phase,
            "static_offset": self.static_offset,
        }


@dataclass(frozen=True)
class ArmIdentity:
    arm_index: int
    arm_name: str
    hash: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "hash", fnv1a64(self.arm_name))


@dataclass
class TrajectoryParams:
    joints: dict[str, SinusoidParams]
    fps: float
    duration_frames: int

    def __post_init__(self):
        if self.fps <= 0:
            raise ValidationError("fps", f"must be positive, got {self.fps}")
        if self.duration_frames < 1:
            raise ValidationError("duration_frames", f"must be >= 1, got {self.duration_frames}")

    def to_json(self) -> dict:
        return {
            "fps": self.fps,
            "duration_frames": self.duration_frames,
            "joints": {name: p.to_json() for name, p in self.joints.items()},
        }


def _safe_offset(lo: float, hi: float, amplitude: float, offset: float) -> float:
    # nudge by ulps until offset +- amplitude is inside [lo, hi] exactly;
    # float rounding of (hi - amplitude) etc. can otherwise leak past a limit
    for _ in range(8):
        moved = False
        while offset + amplitude > hi:
            offset = math.nextafter(offset, -math.inf)
            moved = True
        while offset - amplitude < lo:
            offset = math.nextafter(offset, math.inf)
            moved = True
        if not moved:
            return offset
    raise ValidationError("limits", f"cannot fit amplitude {amplitude} into [{lo}, {hi}]")


def _draw_joint_params(rng: Pcg32, lo: float, hi: float, rectified: bool) -> SinusoidParams:
    half = 0.5 * (hi - lo)
    frequency = rng.uniform(*FREQ_RANGE)
    phase = rng.uniform(0.0, 2.0 * math.pi)
    if half == 0.0:
        return SinusoidParams(0.0, frequency, phase, lo)
    frac = rng.uniform(*AMPLITUDE_FRAC_RANGE)
    if rectified:
        # open/close family: oscillate over [lo, lo + frac*(hi-lo)] so the
        # jaw angle has a hard floor at its closed position
        amplitude = frac * half
        offset = lo + amplitude
    else:
        amplitude = frac * half
        offset = rng.uniform(lo + amplitude, hi - amplitude)
    offset = _safe_offset(lo, hi, amplitude, offset)
    return SinusoidParams(amplitude, frequency, phase, offset)


def derive_params(
    seed: int,
    arm: ArmIdentity,
    chain: KinematicChain,
    fps: float,
    duration_frames: int,
) -> TrajectoryParams:
    """Deterministic per-joint sinusoid parameters for one arm.

    The PCG32 stream is seeded with mix(trajectory-stream seed, arm hash);
    joints are drawn in chain order, jaw joints through the rectified
    open/close family, all others through the arm family.
    """
    rng = Pcg32(mix_seed(mix_seed(seed, fnv1a64("trajectory")), arm.hash), stream=arm.hash)
    joints = {}
    for joint in chain.joints:
        lo, hi = joint.limits
        joints[joint.id] = _draw_joint_params(rng, lo, hi, rectified=joint.id in JAW_JOINTS)
    return TrajectoryParams(joints=joints, fps=fps, duration_frames=duration_frames)


def sample_pose(params: TrajectoryParams, frame: int) -> JointPose:
    """Joint angles at a frame index; already inside the joint limits."""
    if not 0 <= frame < params.duration_frames:
        raise ValidationError(
            "frame", f"{frame} outside [0, {params.duration_frames})"
        )
    pose = {}
    for joint_id, p in params.joints.items():
        arg = 2.0 * math.pi * p.frequency * frame / params.fps + p.phase
        pose[joint_id] = p.static_offset + p.amplitude * math.sin(arg)
    return pose


def place_offsets(
    arms: list[ArmIdentity],
    rng: Pcg32,
    shaft_radius: float,
    lateral_bound: float = 6.0,
    center: float = 0.0,
    manual_offsets: list[tuple[float, float, float]] | None = None,
) -> list[RigidTransform]:
    """Root transforms laying arms out on a lateral (x) line.

    Minimum separation is SEPARATION_FACTOR * shaft_radius * SEPARATION_SAFETY.
    Manual offsets are used verbatim and consume nothing from `rng`; a single
    arm sits at the configured center, also without consuming the stream.
    """
    if not 1 <= len(arms) <= 3:
        raise ValidationError("arms", f"need 1-3 arms, got {len(arms)}")

    if manual_offsets is not None:
        if len(manual_offsets) != len(arms):
            raise ValidationError(
                "manual_offsets", f"got {len(manual_offsets)} offsets for {len(arms)} arms"
            )
        return [RigidTransform.from_translation(offset) for offset in manual_offsets]

    if len(arms) == 1:
        return [RigidTransform.from_translation((center, 0.0, 0.0))]

    min_sep = SEPARATION_FACTOR * shaft_radius * SEPARATION_SAFETY
    spacings = [rng.uniform(min_sep, 1.8 * min_sep) for _ in range(len(arms) - 1)]
    xs = [0.0]
    for gap in spacings:
        xs.append(xs[-1] + gap)
    mid = 0.5 * (xs[0] + xs[-1])
    jitter = rng.uniform(-0.5, 0.5) * min_sep
    xs = [x - mid + center + jitter for x in xs]

    if any(abs(x) > lateral_bound for x in xs):
        raise PlacementError(
            f"cannot place {len(arms)} arms with separation {min_sep:.3f} "
            f"inside lateral bound {lateral_bound}"
        )
    return [RigidTransform.from_translation((x, 0.0, 0.0)) for x in xs]
