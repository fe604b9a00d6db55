"""Scene assembly: config + seed -> fully specified renderable instance.

All randomized decisions (arm count, tool kinds, materials, blood patches,
placement, lighting, camera jitter, trajectories) are drawn from named PCG32
sub-streams of the master seed, so adding draws to one concern never shifts
another. Every drawn value is recorded in the instance metadata for exact
replay.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .geometry import (
    ArticulatedModel,
    InstrumentSpec,
    Material,
    Mesh,
    build_backdrop_sphere,
    build_blood_patch,
    build_instrument,
)
from .rng import stream
from .trajectory import ArmIdentity, TrajectoryParams, derive_params, place_offsets

GREEN_SCREEN = "green_screen"
DEFAULT_TOOL_MIX = ("clamp", "clamp", "scissor")
AMBIENT = 0.15


@dataclass
class Camera:
    position: tuple[float, float, float]
    look_at: tuple[float, float, float]
    fov_deg: float
    resolution: tuple[int, int]

    def __post_init__(self):
        if tuple(self.position) == tuple(self.look_at):
            raise ValidationError("camera", "position must differ from look_at")
        if not 10.0 <= self.fov_deg <= 120.0:
            raise ValidationError("fov", f"{self.fov_deg} outside [10, 120] degrees")

    def to_json(self) -> dict:
        return {
            "position": list(self.position),
            "look_at": list(self.look_at),
            "fov_deg": self.fov_deg,
            "resolution": list(self.resolution),
        }


@dataclass
class SceneConfig:
    seed: int = 0
    arm_count: int | str = "random"          # int or "random" in [1, 3]
    tool_mix: tuple[str, ...] = DEFAULT_TOOL_MIX
    light_range: tuple[float, float] = (0.7, 1.3)
    blood_patch_range: tuple[int, int] = (1, 3)
    background: str = GREEN_SCREEN           # GREEN_SCREEN or a background frame dir
    resolution: tuple[int, int] = (1920, 1080)
    fps: float = 25.0
    duration_frames: int = 50
    instrument: InstrumentSpec = field(default_factory=InstrumentSpec)
    limits_deg: dict | None = None
    camera_fov: float = 60.0
    camera_jitter: float = 1.0               # 0 disables position/fov jitter
    manual_offsets: list | None = None
    lateral_bound: float = 6.0
    backdrop_radius: float = 1000.0
    backdrop_bands: tuple[int, int] = (12, 24)

    def __post_init__(self):
        if self.arm_count != "random":
            if not isinstance(self.arm_count, int) or not 1 <= self.arm_count <= 3:
                raise ValidationError("arm_count", f"must be 'random' or 1-3, got {self.arm_count}")
        lo, hi = self.light_range
        if not 0 < lo <= hi:
            raise ValidationError("light_range", f"need 0 < lo <= hi, got [{lo}, {hi}]")
        bmin, bmax = self.blood_patch_range
        if not 0 <= bmin <= bmax:
            raise ValidationError("blood_patch_range", f"need 0 <= min <= max, got [{bmin}, {bmax}]")
        w, h = self.resolution
        if w < 16 or h < 16:
            raise ValidationError("resolution", f"sides must be >= 16, got {w}x{h}")
        if self.fps <= 0:
            raise ValidationError("fps", f"must be positive, got {self.fps}")
        if self.duration_frames < 1:
            raise ValidationError("duration_frames", f"must be >= 1, got {self.duration_frames}")
        for kind in self.tool_mix:
            if kind not in ("clamp", "scissor"):
                raise ValidationError("tool_mix", f"unknown tool kind {kind!r}")
        if not self.tool_mix:
            raise ValidationError("tool_mix", "must list at least one tool kind")

    def to_json(self) -> dict:
        return {
            "seed": self.seed,
            "arm_count": self.arm_count,
            "tool_mix": list(self.tool_mix),
            "light_range": list(self.light_range),
            "blood_patch_range": list(self.blood_patch_range),
            "background": self.background,
            "resolution": list(self.resolution),
            "fps": self.fps,
            "duration_frames": self.duration_frames,
            "instrument": self.instrument.to_json(),
            "limits_deg": self.limits_deg,
            "camera_fov": self.camera_fov,
            "camera_jitter": self.camera_jitter,
            "manual_offsets": self.manual_offsets,
            "lateral_bound": self.lateral_bound,
            "backdrop_radius": self.backdrop_radius,
            "backdrop_bands": list(self.backdrop_bands),
        }

    @staticmethod
    def from_json(data: dict) -> "SceneConfig":
        # accept a metadata.json produced by render_clip for exact replay
        if "config" in data and isinstance(data["config"], dict):
            data = data["config"]
        kwargs = dict(data)
        if "instrument" in kwargs and isinstance(kwargs["instrument"], dict):
            kwargs["instrument"] = InstrumentSpec(**kwargs["instrument"])
        for key in ("tool_mix", "light_range", "blood_patch_range", "resolution", "backdrop_bands"):
            if key in kwargs and isinstance(kwargs[key], list):
                kwargs[key] = tuple(kwargs[key])
        unknown = set(kwargs) - set(SceneConfig.__dataclass_fields__)
        if unknown:
            raise ValidationError("config", f"unknown fields: {sorted(unknown)}")
        return SceneConfig(**kwargs)

    def config_hash(self) -> str:
        blob = json.dumps(self.to_json(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()


@dataclass
class ArmInstance:
    index: int
    name: str
    tool_kind: str
    model: ArticulatedModel
    trajectory: TrajectoryParams
    blood_parts: list[str]


@dataclass
class SceneInstance:
    config: SceneConfig
    arms: list[ArmInstance]
    light_intensity: float
    backdrop: Mesh
    camera: Camera
    part_ids: dict[str, int]     # "arm<i>/<part>" -> nonzero object id
    metadata: dict

    def metadata_json(self) -> str:
        return json.dumps(self.metadata, sort_keys=True, indent=1)

    def all_part_ids(self) -> set[int]:
        return set(self.part_ids.values())


def _draw_materials(rng, tool_kind: str) -> dict[str, Material]:
    shaft_v = rng.uniform(0.45, 0.72)
    shaft = Material(
        base_color=(shaft_v * 0.96, shaft_v * 0.99, shaft_v),
        reflectivity=rng.uniform(0.3, 0.9),
    )
    wrist_v = rng.uniform(0.30, 0.50)
    wrist = Material(
        base_color=(wrist_v * 0.95, wrist_v * 0.97, wrist_v),
        reflectivity=rng.uniform(0.2, 0.7),
    )
    jaw_v = rng.uniform(0.60, 0.85)
    jaw = Material(
        base_color=(jaw_v, jaw_v, jaw_v * 0.97),
        reflectivity=rng.uniform(0.4, 0.95),
    )
    return {"shaft": shaft, "wrist": wrist, "jaw_left": jaw, "jaw_right": jaw}


def _validate_background(config: SceneConfig) -> None:
    if config.background == GREEN_SCREEN:
        return
    source = Path(config.background)
    if not source.is_dir():
        raise ValidationError("background", f"composite source {source} is not a directory")
    frames = sorted(
        p for p in source.iterdir() if p.suffix.lower() in (".png", ".jpg", ".jpeg")
    )
    if not frames:
        raise ValidationError("background", f"composite source {source} holds no image frames")


def generate_scene(config: SceneConfig) -> SceneInstance:
    """Draw a concrete scene from the config's master seed.

    Sub-streams: "arms" (count + tool kinds), "materials", "blood",
    "placement", "lighting", "camera"; trajectories are keyed separately per
    arm inside derive_params. Deterministic: equal configs give equal
    metadata.
    """
    _validate_background(config)
    seed = config.seed

    arms_rng = stream(seed, "arms")
    if config.arm_count == "random":
        arm_count = arms_rng.randrange(1, 3)
    else:
        arm_count = config.arm_count
    mix = list(config.tool_mix)
    arms_rng.shuffle(mix)
    kinds = [mix[i % len(mix)] for i in range(arm_count)]

    materials_rng = stream(seed, "materials")
    blood_rng = stream(seed, "blood")
    light_rng = stream(seed, "lighting")
    placement_rng = stream(seed, "placement")
    camera_rng = stream(seed, "camera")

    spec = config.instrument
    identities = [ArmIdentity(i, f"arm{i}-{kind}") for i, kind in enumerate(kinds)]
    roots = place_offsets(
        identities,
        placement_rng,
        shaft_radius=spec.shaft_radius,
        lateral_bound=config.lateral_bound,
        manual_offsets=config.manual_offsets,
    )

    bmin, bmax = config.blood_patch_range
    arms: list[ArmInstance] = []
    material_records = {}
    blood_records = {}
    for identity, kind, root in zip(identities, kinds, roots):
        arm_spec = InstrumentSpec(
            shaft_length=spec.shaft_length,
            shaft_radius=spec.shaft_radius,
            jaw_length=spec.jaw_length,
            jaw_hole_count=spec.jaw_hole_count,
            tool_kind=kind,
            radial_segments=spec.radial_segments,
        )
        model = build_instrument(arm_spec, limits_deg=config.limits_deg)
        model.chain.root_transform = root

        materials = _draw_materials(materials_rng, kind)
        for part, material in materials.items():
            model.parts[part] = model.parts[part].with_material(material)
        material_records[identity.arm_name] = {
            part: material.to_json() for part, material in materials.items()
        }

        patch_count = blood_rng.randrange(bmin, bmax) if bmax > 0 else 0
        blood_parts = []
        patches = []
        for k in range(patch_count):
            axial = blood_rng.uniform(0.12 * arm_spec.shaft_length, 0.80 * arm_spec.shaft_length)
            height = blood_rng.uniform(1.2 * arm_spec.shaft_radius, 2.6 * arm_spec.shaft_radius)
            texture_seed = blood_rng.next_u32()
            part_name = f"blood{k}"
            model.parts[part_name] = build_blood_patch(
                arm_spec.shaft_radius, axial, height, texture_seed
            )
            model.chain.part_bindings[part_name] = "shaft"
            blood_parts.append(part_name)
            patches.append({"axial": axial, "height": height, "texture_seed": texture_seed})
        blood_records[identity.arm_name] = patches

        trajectory = derive_params(
            seed, identity, model.chain, config.fps, config.duration_frames
        )
        arms.append(
            ArmInstance(
                index=identity.arm_index,
                name=identity.arm_name,
                tool_kind=kind,
                model=model,
                trajectory=trajectory,
                blood_parts=blood_parts,
            )
        )

    light_lo, light_hi = config.light_range
    light_intensity = light_rng.uniform(light_lo, light_hi) if light_hi > light_lo else light_lo

    tip_y = spec.shaft_length + 0.4 * spec.jaw_length + spec.jaw_length
    look_at = np.array([0.0, 0.60 * tip_y, 0.0])
    distance = 1.35 * tip_y
    jitter = config.camera_jitter
    position = np.array(
        [
            look_at[0] + jitter * camera_rng.uniform(-1.5, 1.5),
            look_at[1] + jitter * camera_rng.uniform(-1.0, 1.0),
            -distance + jitter * camera_rng.uniform(-1.5, 1.5),
        ]
    )
    fov = config.camera_fov + jitter * camera_rng.uniform(-8.0, 8.0)
    fov = min(max(fov, 10.0), 120.0)
    camera = Camera(
        position=tuple(float(v) for v in position),
        look_at=tuple(float(v) for v in look_at),
        fov_deg=float(fov),
        resolution=config.resolution,
    )

    backdrop = build_backdrop_sphere(
        config.backdrop_radius, config.backdrop_bands[0], config.backdrop_bands[1]
    )

    part_ids: dict[str, int] = {}
    next_id = 1
    for arm in arms:
        for part in ("shaft", "wrist", "jaw_left", "jaw_right", *arm.blood_parts):
            part_ids[f"arm{arm.index}/{part}"] = next_id
            next_id += 1
    if next_id > 0xFFFF:
        raise ValidationError("part_ids", "more than 65535 parts")

    metadata = {
        "schema_version": 1,
        "seed": seed,
        "config": config.to_json(),
        "config_hash": config.config_hash(),
        "draws": {
            "arm_count": arm_count,
            "tool_kinds": kinds,
            "placement": [list(map(float, r.translation)) for r in roots],
            "light_intensity": light_intensity,
            "materials": material_records,
            "blood": blood_records,
            "camera": camera.to_json(),
        },
        "trajectories": {arm.name: arm.trajectory.to_json() for arm in arms},
        "part_ids": part_ids,
        "ambient": AMBIENT,
    }

    instance = SceneInstance(
        config=config,
        arms=arms,
        light_intensity=light_intensity,
        backdrop=backdrop,
        camera=camera,
        part_ids=part_ids,
        metadata=metadata,
    )
    _check_invariants(instance, arm_count)
    return instance


def _check_invariants(instance: SceneInstance, arm_count: int) -> None:
    lo, hi = instance.config.light_range
    assert lo <= instance.light_intensity <= hi
    assert len(instance.arms) == arm_count
    bmin, bmax = instance.config.blood_patch_range
    chroma_count = sum(1 for m in instance.backdrop.materials if m.is_chroma)
    for arm in instance.arms:
        assert bmin <= len(arm.blood_parts) <= bmax or bmax == 0
        for mesh in arm.model.parts.values():
            chroma_count += sum(1 for m in mesh.materials if m.is_chroma)
    assert chroma_count == 1, "scene must hold exactly one chroma material"
