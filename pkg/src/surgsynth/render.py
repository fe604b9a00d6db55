"""Deterministic software rasterizer with an object-ID pass.

Conventions, pinned for cross-platform bitwise reproducibility:

* perspective projection through the scene camera; pixel centers at
  (x + 0.5, y + 0.5), y growing downward;
* edge-function fill with the top-left rule; edge functions are anchored at
  the lexicographically smaller projected endpoint so both triangles sharing
  an edge evaluate the same bits and each on-edge pixel is claimed once;
* z-buffer on camera-space depth, float32, strict `<` wins;
* shading = ambient + lambert * light_intensity + reflectivity * Blinn
  specular (exponent 16), computed in float32, with round-half-to-even
  (np.rint) to 8 bits; no anti-aliasing, no dithering;
* chroma-material triangles are written unlit as exactly (0, 255, 0);
* object id 0 is reserved for the backdrop/background.
"""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .geometry import Material, Mesh
from .imgio import save_png_gray, save_png_rgb
from .kinematics import forward_kinematics
from .scene import AMBIENT, Camera, SceneInstance
from .trajectory import sample_pose

NEAR_PLANE = 0.1
LIGHT_DIR = np.array([0.35, 0.65, -0.67])
LIGHT_DIR = LIGHT_DIR / np.linalg.norm(LIGHT_DIR)
SPECULAR_EXP = 16.0

FRAME_PATTERN = "frame_%05d.png"
MASK_PATTERN = "mask_%05d.png"
METADATA_NAME = "metadata.json"


@dataclass
class FrameBundle:
    rgb: np.ndarray        # (h, w, 3) uint8
    id_buffer: np.ndarray  # (h, w) uint16, 0 = background/backdrop
    depth: np.ndarray      # (h, w) float32

    def __post_init__(self):
        if not (self.rgb.shape[:2] == self.id_buffer.shape == self.depth.shape):
            raise ValidationError("buffers", "rgb/id/depth dimensions differ")


@dataclass
class DrawBatch:
    """One mesh instance in world space, flattened for the rasterizer."""

    world_vertices: np.ndarray
    triangles: np.ndarray
    part_id: int
    material: Material
    vertex_colors: np.ndarray | None


class CameraBasis:
    """Precomputed camera frame + projection scalars."""

    def __init__(self, camera: Camera):
        pos = np.asarray(camera.position, dtype=np.float64)
        look = np.asarray(camera.look_at, dtype=np.float64)
        forward = look - pos
        forward = forward / np.linalg.norm(forward)
        world_up = np.array([0.0, 1.0, 0.0])
        if abs(float(forward @ world_up)) > 0.999:
            world_up = np.array([0.0, 0.0, 1.0])
        right = np.cross(forward, world_up)
        right = right / np.linalg.norm(right)
        up = np.cross(right, forward)

        self.position = pos
        self.rows = np.vstack([right, up, forward])  # world -> camera rotation
        self.width, self.height = camera.resolution
        self.aspect = self.width / self.height
        self.fscale = 1.0 / np.tan(np.deg2rad(camera.fov_deg) / 2.0)

    def to_camera(self, points: np.ndarray) -> np.ndarray:
        return (points - self.position) @ self.rows.T

    def project(self, cam_points: np.ndarray) -> np.ndarray:
        """Camera space -> pixel coordinates (x right, y down). z must be > 0."""
        z = cam_points[:, 2]
        x_ndc = (self.fscale / self.aspect) * cam_points[:, 0] / z
        y_ndc = self.fscale * cam_points[:, 1] / z
        sx = (x_ndc + 1.0) * 0.5 * self.width
        sy = (1.0 - y_ndc) * 0.5 * self.height
        return np.column_stack([sx, sy])

    def pixel_rays(self) -> np.ndarray:
        """World-space ray directions through every pixel center, scaled so the
        camera-space z component is 1 (ray parameter t equals camera depth)."""
        xs = (np.arange(self.width) + 0.5) / self.width * 2.0 - 1.0
        ys = 1.0 - (np.arange(self.height) + 0.5) / self.height * 2.0
        dx = xs * self.aspect / self.fscale
        dy = ys / self.fscale
        grid_x, grid_y = np.meshgrid(dx, dy)
        dirs = (
            grid_x[..., None] * self.rows[0]
            + grid_y[..., None] * self.rows[1]
            + self.rows[2]
        )
        return dirs


def gather_world_batches(scene: SceneInstance, frame: int) -> list[DrawBatch]:
    """Backdrop first, then every instrument part posed at `frame`."""
    duration = scene.config.duration_frames
    if not 0 <= frame < duration:
        raise ValidationError("frame", f"{frame} outside [0, {duration})")

    batches = [backdrop_batch(scene)]
    for arm in scene.arms:
        pose = sample_pose(arm.trajectory, frame)
        transforms = forward_kinematics(arm.model.chain, pose)
        for part_name, mesh in arm.model.parts.items():
            transform = transforms[part_name]
            batches.append(
                DrawBatch(
                    world_vertices=transform.apply(mesh.vertices),
                    triangles=mesh.triangles,
                    part_id=scene.part_ids[f"arm{arm.index}/{part_name}"],
                    material=mesh.materials[0],
                    vertex_colors=mesh.vertex_colors,
                )
            )
    return batches


def backdrop_batch(scene: SceneInstance) -> DrawBatch:
    mesh: Mesh = scene.backdrop
    return DrawBatch(
        world_vertices=mesh.vertices,
        triangles=mesh.triangles,
        part_id=0,
        material=mesh.materials[0],
        vertex_colors=None,
    )


def _clip_near(poly: np.ndarray) -> np.ndarray:
    """Sutherland-Hodgman clip of attribute rows against z_cam >= NEAR_PLANE.

    Column 2 is camera z; remaining columns are linearly interpolated
    attributes. Returns (k, d) with k in {0, 3, 4}.
    """
    out = []
    n = len(poly)
    for i in range(n):
        a = poly[i]
        b = poly[(i + 1) % n]
        a_in = a[2] >= NEAR_PLANE
        b_in = b[2] >= NEAR_PLANE
        if a_in:
            out.append(a)
        if a_in != b_in:
            t = (NEAR_PLANE - a[2]) / (b[2] - a[2])
            out.append(a + t * (b - a))
    return np.array(out) if out else np.empty((0, poly.shape[1]))


def _edge_terms(a: np.ndarray, b: np.ndarray):
    """Canonical edge function terms for directed edge a->b.

    Returns (anchor, delta, sign, topleft): the edge value at p is
    sign * cross(delta, p - anchor); topleft marks whether E == 0 counts as
    inside for this triangle (top-left fill rule, y-down coordinates).
    """
    dx, dy = b[0] - a[0], b[1] - a[1]
    topleft = dy < 0.0 or (dy == 0.0 and dx > 0.0)
    if (a[0], a[1]) <= (b[0], b[1]):
        return a, (dx, dy), 1.0, topleft
    return b, (-dx, -dy), -1.0, topleft


def _shade(
    material: Material,
    base_rgb: np.ndarray,
    normal: np.ndarray,
    world_pos: np.ndarray,
    cam_pos: np.ndarray,
    light_intensity: float,
) -> np.ndarray:
    """Blinn-Phong in float32; returns float32 rgb in [0, 1]."""
    normal32 = normal.astype(np.float32)
    light32 = LIGHT_DIR.astype(np.float32)
    intensity = np.float32(light_intensity)
    base = base_rgb.astype(np.float32)
    pos = world_pos.astype(np.float32)

    diffuse = np.float32(max(float(normal32 @ light32), 0.0))
    view = cam_pos.astype(np.float32) - pos
    view /= np.linalg.norm(view, axis=-1, keepdims=True).astype(np.float32)
    half = view + light32
    half /= np.linalg.norm(half, axis=-1, keepdims=True).astype(np.float32)
    spec_dot = np.maximum(half @ normal32, np.float32(0.0))
    spec = spec_dot ** np.float32(SPECULAR_EXP)

    color = base * (np.float32(AMBIENT) + intensity * diffuse)
    color = color + (np.float32(material.reflectivity) * intensity * spec)[..., None]
    return np.clip(color, np.float32(0.0), np.float32(1.0))


class Rasterizer:
    """Stateful wrapper holding the frame buffers for one render pass."""

    def __init__(self, camera: Camera):
        self.basis = CameraBasis(camera)
        h, w = self.basis.height, self.basis.width
        self.rgb = np.zeros((h, w, 3), dtype=np.uint8)
        self.ids = np.zeros((h, w), dtype=np.uint16)
        self.depth = np.full((h, w), np.inf, dtype=np.float32)

    def clone(self) -> "Rasterizer":
        other = object.__new__(Rasterizer)
        other.basis = self.basis
        other.rgb = self.rgb.copy()
        other.ids = self.ids.copy()
        other.depth = self.depth.copy()
        return other

    def bundle(self) -> FrameBundle:
        return FrameBundle(rgb=self.rgb, id_buffer=self.ids, depth=self.depth)

    def draw_batch(self, batch: DrawBatch, light_intensity: float) -> None:
        basis = self.basis
        cam_verts = basis.to_camera(batch.world_vertices)
        has_colors = batch.vertex_colors is not None
        attr_dim = 6 + (3 if has_colors else 0)

        for t_idx in range(len(batch.triangles)):
            tri = batch.triangles[t_idx]
            rows = np.empty((3, attr_dim))
            rows[:, 0:3] = cam_verts[tri]
            rows[:, 3:6] = batch.world_vertices[tri]
            if has_colors:
                rows[:, 6:9] = batch.vertex_colors[tri]

            if rows[:, 2].min() < NEAR_PLANE:
                poly = _clip_near(rows)
                if len(poly) < 3:
                    continue
            else:
                poly = rows

            normal = np.cross(
                batch.world_vertices[tri[1]] - batch.world_vertices[tri[0]],
                batch.world_vertices[tri[2]] - batch.world_vertices[tri[0]],
            )
            norm = np.linalg.norm(normal)
            if norm == 0.0:
                continue
            normal = normal / norm
            centroid = batch.world_vertices[tri].mean(axis=0)
            if float(normal @ (basis.position - centroid)) < 0.0:
                normal = -normal

            screen = basis.project(poly[:, 0:3])
            for k in range(1, len(poly) - 1):
                self._fill(
                    screen[[0, k, k + 1]],
                    poly[[0, k, k + 1]],
                    normal,
                    batch,
                    light_intensity,
                )

    def _fill(
        self,
        pts: np.ndarray,
        attrs: np.ndarray,
        normal: np.ndarray,
        batch: DrawBatch,
        light_intensity: float,
    ) -> None:
        basis = self.basis
        area2 = (pts[1, 0] - pts[0, 0]) * (pts[2, 1] - pts[0, 1]) - (
            pts[1, 1] - pts[0, 1]
        ) * (pts[2, 0] - pts[0, 0])
        if area2 == 0.0:
            return
        if area2 < 0.0:
            pts = pts[[0, 2, 1]]
            attrs = attrs[[0, 2, 1]]
            area2 = -area2

        x_lo = max(0, int(np.ceil(pts[:, 0].min() - 0.5)))
        x_hi = min(basis.width - 1, int(np.floor(pts[:, 0].max() - 0.5)))
        y_lo = max(0, int(np.ceil(pts[:, 1].min() - 0.5)))
        y_hi = min(basis.height - 1, int(np.floor(pts[:, 1].max() - 0.5)))
        if x_lo > x_hi or y_lo > y_hi:
            return

        px = np.arange(x_lo, x_hi + 1) + 0.5
        py = (np.arange(y_lo, y_hi + 1) + 0.5)[:, None]

        # edges opposite each vertex: (v1,v2), (v2,v0), (v0,v1)
        lam = []
        inside = None
        for a_idx, b_idx in ((1, 2), (2, 0), (0, 1)):
            anchor, (dx, dy), sign, topleft = _edge_terms(pts[a_idx], pts[b_idx])
            value = sign * (dx * (py - anchor[1]) - dy * (px - anchor[0]))
            cond = (value > 0.0) | ((value == 0.0) & topleft)
            inside = cond if inside is None else (inside & cond)
            lam.append(value / area2)
        if not inside.any():
            return

        inv_z = lam[0] / attrs[0, 2] + lam[1] / attrs[1, 2] + lam[2] / attrs[2, 2]
        with np.errstate(divide="ignore"):
            depth = (1.0 / inv_z).astype(np.float32)

        zview = self.depth[y_lo : y_hi + 1, x_lo : x_hi + 1]
        update = inside & (depth < zview)
        if not update.any():
            return

        uy, ux = np.nonzero(update)
        l0, l1, l2 = lam[0][update], lam[1][update], lam[2][update]
        inv = inv_z[update]

        def interp(col):
            num = (
                l0[:, None] * (attrs[0, col] / attrs[0, 2])
                + l1[:, None] * (attrs[1, col] / attrs[1, 2])
                + l2[:, None] * (attrs[2, col] / attrs[2, 2])
            )
            return num / inv[:, None]

        if batch.material.is_chroma:
            shaded8 = np.zeros((len(ux), 3), dtype=np.uint8)
            shaded8[:, 1] = 255
        else:
            world_pos = interp(slice(3, 6))
            if batch.vertex_colors is not None:
                base = interp(slice(6, 9))
            else:
                base = np.broadcast_to(
                    np.asarray(batch.material.base_color), (len(ux), 3)
                )
            shaded = _shade(
                batch.material, base, normal, world_pos, basis.position, light_intensity
            )
            shaded8 = np.rint(shaded * np.float32(255.0)).astype(np.uint8)

        zview[update] = depth[update]
        self.ids[y_lo : y_hi + 1, x_lo : x_hi + 1][update] = batch.part_id
        self.rgb[y_lo : y_hi + 1, x_lo : x_hi + 1][uy, ux] = shaded8


def rasterize_batches(
    batches: list[DrawBatch], camera: Camera, light_intensity: float
) -> FrameBundle:
    raster = Rasterizer(camera)
    for batch in batches:
        raster.draw_batch(batch, light_intensity)
    return raster.bundle()


def rasterize(scene: SceneInstance, frame: int) -> FrameBundle:
    """Render one frame: RGB + object ids + depth."""
    return rasterize_batches(
        gather_world_batches(scene, frame), scene.camera, scene.light_intensity
    )


def mask_from_ids(bundle: FrameBundle, target: set[int]) -> np.ndarray:
    """Binary {0, 255} mask of pixels whose object id is in `target`."""
    if not target:
        raise ValidationError("target", "target id set must be non-empty")
    hit = np.isin(bundle.id_buffer, np.fromiter(target, dtype=np.uint16))
    return np.where(hit, np.uint8(255), np.uint8(0))


@dataclass
class ClipArtifacts:
    directory: Path
    frame_paths: list[Path]
    mask_paths: list[Path]
    metadata: dict

    @staticmethod
    def load(directory: Path | str) -> "ClipArtifacts":
        directory = Path(directory)
        meta_path = directory / METADATA_NAME
        if not meta_path.is_file():
            raise ValidationError("clip", f"{meta_path} not found")
        metadata = json.loads(meta_path.read_text())
        frames = sorted(directory.glob("frame_*.png"))
        masks = sorted(directory.glob("mask_*.png"))
        if not frames or len(frames) != len(masks):
            raise ValidationError(
                "clip", f"{directory}: {len(frames)} frames vs {len(masks)} masks"
            )
        return ClipArtifacts(directory, frames, masks, metadata)


def _pose_digest(scene: SceneInstance, frame: int) -> str:
    poses = {
        arm.name: sample_pose(arm.trajectory, frame) for arm in scene.arms
    }
    blob = json.dumps(poses, sort_keys=True)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


class ClipRenderer:
    """Per-clip renderer caching the static backdrop pass."""

    def __init__(self, scene: SceneInstance):
        self.scene = scene
        base = Rasterizer(scene.camera)
        base.draw_batch(backdrop_batch(scene), scene.light_intensity)
        self._base = base

    def frame(self, index: int) -> FrameBundle:
        raster = self._base.clone()
        for batch in gather_world_batches(self.scene, index)[1:]:
            raster.draw_batch(batch, self.scene.light_intensity)
        return raster.bundle()


def _render_frame_range(args) -> list[tuple[int, str]]:
    scene, out_dir, indices, target = args
    renderer = ClipRenderer(scene)
    digests = []
    for index in indices:
        bundle = renderer.frame(index)
        save_png_rgb(Path(out_dir) / (FRAME_PATTERN % index), bundle.rgb)
        save_png_gray(
            Path(out_dir) / (MASK_PATTERN % index), mask_from_ids(bundle, target)
        )
        digests.append((index, _pose_digest(scene, index)))
    return digests


def render_clip(
    scene: SceneInstance,
    out_dir: Path | str,
    workers: int = 1,
    mask_target: set[int] | None = None,
) -> ClipArtifacts:
    """Render all frames of a clip to frame_/mask_ PNGs plus metadata.json.

    Frames are independent; `workers > 1` renders them in parallel with
    results identical to the sequential pass. The default mask covers every
    instrument part (all nonzero ids).
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    target = mask_target if mask_target is not None else scene.all_part_ids()
    duration = scene.config.duration_frames
    indices = list(range(duration))

    if workers > 1:
        chunks = [indices[i::workers] for i in range(workers)]
        digest_pairs = []
        with ProcessPoolExecutor(max_workers=workers) as pool:
            jobs = [(scene, str(out_dir), chunk, target) for chunk in chunks if chunk]
            for result in pool.map(_render_frame_range, jobs):
                digest_pairs.extend(result)
        digest_pairs.sort()
    else:
        digest_pairs = _render_frame_range((scene, str(out_dir), indices, target))

    metadata = dict(scene.metadata)
    metadata["frames"] = [
        {"index": index, "pose_digest": digest} for index, digest in digest_pairs
    ]
    metadata["mask_target_ids"] = sorted(target)
    metadata["background"] = {"mode": "green_screen"}
    (out_dir / METADATA_NAME).write_text(json.dumps(metadata, sort_keys=True, indent=1))

    return ClipArtifacts(
        directory=out_dir,
        frame_paths=[out_dir / (FRAME_PATTERN % i) for i in indices],
        mask_paths=[out_dir / (MASK_PATTERN % i) for i in indices],
        metadata=metadata,
    )
