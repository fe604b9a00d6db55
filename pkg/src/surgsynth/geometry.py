"""Procedural triangle meshes for instruments, blood patches, and the backdrop.

The instrument is a parametric stand-in for a scanned asset: a cylindrical
shaft, a narrower wrist cylinder, and two jaw bars (straight for clamps,
tapered for scissors) with optional rectangular through-cutouts built by
omitting quads. Part ids are stable: "shaft", "wrist", "jaw_left",
"jaw_right" (blood patches added at scene level become "blood<k>").

Dimension defaults (shaft_length=10, shaft_radius=0.4, jaw_length=2) are
project choices, not measured values. Adjacent parts are embedded/gapped by
small documented margins so that no two parts ever have coincident coplanar
faces, which would make depth resolution draw-order dependent.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import MeshParseError, ValidationError
from .kinematics import Joint, KinematicChain, RigidTransform
from .rng import Pcg32

TOOL_KINDS = ("clamp", "scissor")

# band radius factor so blood renders just outside the shaft surface
BLOOD_RADIUS_EPS = 0.02

# part junction margins (scene units / fractions), see module docstring
WRIST_EMBED = 0.2
JAW_EMBED_FRAC = 0.1
JAW_GAP_FRAC = 0.05

# default joint limits in degrees; configurable, never paper values
DEFAULT_LIMITS_DEG = {
    "shaft": (-45.0, 45.0),
    "wrist": (-60.0, 60.0),
    "jaw_left": (0.0, 50.0),
    "jaw_right": (0.0, 50.0),
}


@dataclass
class Material:
    base_color: tuple[float, float, float]
    reflectivity: float
    is_chroma: bool = False

    def __post_init__(self):
        for channel in self.base_color:
            if not 0.0 <= channel <= 1.0:
                raise ValidationError("base_color", f"channel {channel} outside [0,1]")
        if not 0.0 <= self.reflectivity <= 1.0:
            raise ValidationError("reflectivity", f"{self.reflectivity} outside [0,1]")

    def to_json(self) -> dict:
        return {
            "base_color": list(self.base_color),
            "reflectivity": self.reflectivity,
            "is_chroma": self.is_chroma,
        }


CHROMA_GREEN = Material(base_color=(0.0, 1.0, 0.0), reflectivity=0.0, is_chroma=True)
DEFAULT_GRAY = Material(base_color=(0.6, 0.62, 0.65), reflectivity=0.4)


@dataclass
class Mesh:
    vertices: np.ndarray                      # (n, 3) float64
    triangles: np.ndarray                     # (m, 3) int32
    material_ids: np.ndarray | None = None    # (m,) int32 into materials
    materials: list[Material] = field(default_factory=lambda: [DEFAULT_GRAY])
    vertex_colors: np.ndarray | None = None   # (n, 3) float64, overrides base_color

    def __post_init__(self):
        self.vertices = np.ascontiguousarray(self.vertices, dtype=np.float64)
        self.triangles = np.ascontiguousarray(self.triangles, dtype=np.int32)
        if self.material_ids is None:
            self.material_ids = np.zeros(len(self.triangles), dtype=np.int32)
        else:
            self.material_ids = np.ascontiguousarray(self.material_ids, dtype=np.int32)
        self.validate()

    def validate(self):
        if self.triangles.size and (
            self.triangles.min() < 0 or self.triangles.max() >= len(self.vertices)
        ):
            raise ValidationError("triangles", "vertex index out of range")
        tri = self.triangles
        if tri.size:
            degenerate = (
                (tri[:, 0] == tri[:, 1]) | (tri[:, 1] == tri[:, 2]) | (tri[:, 0] == tri[:, 2])
            )
            if degenerate.any():
                raise ValidationError("triangles", "triangle with repeated vertex index")
        if len(self.material_ids) != len(self.triangles):
            raise ValidationError("material_ids", "length must match triangle count")
        if self.material_ids.size and self.material_ids.max() >= len(self.materials):
            raise ValidationError("material_ids", "material id out of range")
        if self.vertex_colors is not None and len(self.vertex_colors) != len(self.vertices):
            raise ValidationError("vertex_colors", "length must match vertex count")

    def triangle_areas(self) -> np.ndarray:
        a = self.vertices[self.triangles[:, 0]]
        b = self.vertices[self.triangles[:, 1]]
        c = self.vertices[self.triangles[:, 2]]
        return 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)

    def with_material(self, material: Material) -> "Mesh":
        return replace(
            self,
            material_ids=np.zeros(len(self.triangles), dtype=np.int32),
            materials=[material],
        )

    def boundary_edge_count(self) -> int:
        """Edges referenced by exactly one triangle (0 for a closed surface)."""
        edges = {}
        for tri in self.triangles:
            for i in range(3):
                key = tuple(sorted((int(tri[i]), int(tri[(i + 1) % 3]))))
                edges[key] = edges.get(key, 0) + 1
        return sum(1 for count in edges.values() if count == 1)


@dataclass
class InstrumentSpec:
    shaft_length: float = 10.0
    shaft_radius: float = 0.4
    jaw_length: float = 2.0
    jaw_hole_count: int = 2
    tool_kind: str = "clamp"
    radial_segments: int = 16

    def __post_init__(self):
        for name in ("shaft_length", "shaft_radius", "jaw_length"):
            if getattr(self, name) <= 0:
                raise ValidationError(name, f"must be positive, got {getattr(self, name)}")
        if self.jaw_hole_count < 0:
            raise ValidationError("jaw_hole_count", f"must be >= 0, got {self.jaw_hole_count}")
        if self.tool_kind not in TOOL_KINDS:
            raise ValidationError("tool_kind", f"must be one of {TOOL_KINDS}, got {self.tool_kind!r}")
        if self.radial_segments < 6:
            raise ValidationError("radial_segments", f"must be >= 6, got {self.radial_segments}")

    def to_json(self) -> dict:
        return {
            "shaft_length": self.shaft_length,
            "shaft_radius": self.shaft_radius,
            "jaw_length": self.jaw_length,
            "jaw_hole_count": self.jaw_hole_count,
            "tool_kind": self.tool_kind,
            "radial_segments": self.radial_segments,
        }


@dataclass
class ArticulatedModel:
    """Meshes, kinematic chain, and per-part materials for one instrument."""

    parts: dict[str, Mesh]
    chain: KinematicChain
    spec: InstrumentSpec


def _closed_cylinder(radius: float, y0: float, y1: float, segments: int) -> Mesh:
    """Flat-sided prism along +y with fan-triangulated caps.

    Triangle count: 2*segments sides + 2*(segments-2) caps.
    """
    angles = 2.0 * np.pi * np.arange(segments) / segments
    ring = np.column_stack([radius * np.cos(angles), np.zeros(segments), radius * np.sin(angles)])
    verts = np.vstack([ring + [0, y0, 0], ring + [0, y1, 0]])

    tris = []
    for k in range(segments):
        k1 = (k + 1) % segments
        tris.append((k, k1, segments + k1))
        tris.append((k, segments + k1, segments + k))
    for k in range(1, segments - 1):          # bottom cap fan
        tris.append((0, k + 1, k))
    for k in range(1, segments - 1):          # top cap fan
        tris.append((segments, segments + k, segments + k + 1))
    return Mesh(verts, np.array(tris, dtype=np.int32))


def _jaw_bar(
    x_inner: float,
    width: float,
    thickness: float,
    y0: float,
    y1: float,
    hole_count: int,
    taper: float,
) -> Mesh:
    """Rectangular bar along +y on the +x side of the gap plane.

    Built as a station-subdivided tube so hole segments can omit the +-z
    quads (through-cutouts); `taper` scales the tip cross-section (1 = none).
    """
    segments = 2 * hole_count + 1
    stations = segments + 1
    ys = np.linspace(y0, y1, stations)
    scales = 1.0 + (taper - 1.0) * (ys - y0) / (y1 - y0)

    verts = []
    for y, s in zip(ys, scales):
        w = width * s
        t = thickness * (0.4 + 0.6 * s)
        verts.extend(
            [
                (x_inner, y, -t / 2),
                (x_inner + w, y, -t / 2),
                (x_inner + w, y, t / 2),
                (x_inner, y, t / 2),
            ]
        )
    verts = np.array(verts, dtype=np.float64)

    def corner(station, idx):
        return 4 * station + idx

    tris = []
    for seg in range(segments):
        is_hole = seg % 2 == 1
        a, b = seg, seg + 1
        # side walls (always present): -x face (corners 0-3), +x face (1-2)
        for c0, c1 in ((3, 0), (1, 2)):
            tris.append((corner(a, c0), corner(a, c1), corner(b, c1)))
            tris.append((corner(a, c0), corner(b, c1), corner(b, c0)))
        if not is_hole:
            # -z face (0-1) and +z face (2-3)
            for c0, c1 in ((0, 1), (2, 3)):
                tris.append((corner(a, c0), corner(a, c1), corner(b, c1)))
                tris.append((corner(a, c0), corner(b, c1), corner(b, c0)))
    # end caps
    tris.append((corner(0, 0), corner(0, 2), corner(0, 1)))
    tris.append((corner(0, 0), corner(0, 3), corner(0, 2)))
    last = stations - 1
    tris.append((corner(last, 0), corner(last, 1), corner(last, 2)))
    tris.append((corner(last, 0), corner(last, 2), corner(last, 3)))
    return Mesh(verts, np.array(tris, dtype=np.int32))


def _mirror_x(mesh: Mesh) -> Mesh:
    verts = mesh.vertices.copy()
    verts[:, 0] = -verts[:, 0]
    return Mesh(verts, mesh.triangles.copy(), materials=list(mesh.materials))


def build_instrument(
    spec: InstrumentSpec,
    limits_deg: dict[str, tuple[float, float]] | None = None,
) -> ArticulatedModel:
    """Four-part articulated instrument: shaft, wrist, jaw_left, jaw_right.

    The shaft runs from y=0 to y=shaft_length; the wrist joint pivots at the
    shaft tip, jaw joints at the wrist tip. Joint limits come from
    `limits_deg` (defaults in DEFAULT_LIMITS_DEG).
    """
    limits = dict(DEFAULT_LIMITS_DEG)
    if limits_deg:
        limits.update(limits_deg)

    length = spec.shaft_length
    radius = spec.shaft_radius
    wrist_len = 0.4 * spec.jaw_length
    wrist_radius = 0.85 * radius
    jaw_pivot_y = length + wrist_len

    shaft = _closed_cylinder(radius, 0.0, length, spec.radial_segments)
    wrist = _closed_cylinder(
        wrist_radius, length - WRIST_EMBED, jaw_pivot_y, spec.radial_segments
    )

    jaw_width = 0.85 * radius
    jaw_gap = JAW_GAP_FRAC * radius
    jaw_y0 = jaw_pivot_y - JAW_EMBED_FRAC * spec.jaw_length
    jaw_y1 = jaw_pivot_y + spec.jaw_length
    if spec.tool_kind == "clamp":
        thickness, taper = 0.9 * radius, 1.0
    else:
        thickness, taper = 0.55 * radius, 0.25
    jaw_right = _jaw_bar(
        jaw_gap, jaw_width, thickness, jaw_y0, jaw_y1, spec.jaw_hole_count, taper
    )
    jaw_left = _mirror_x(jaw_right)

    def rad(pair):
        return (np.deg2rad(pair[0]), np.deg2rad(pair[1]))

    joints = [
        Joint("shaft", None, np.zeros(3), np.array([0.0, 1.0, 0.0]), rad(limits["shaft"])),
        Joint("wrist", "shaft", np.array([0.0, length, 0.0]), np.array([1.0, 0.0, 0.0]),
              rad(limits["wrist"])),
        # positive angle opens each jaw outward (left about +z, right about -z)
        Joint("jaw_left", "wrist", np.array([0.0, jaw_pivot_y, 0.0]),
              np.array([0.0, 0.0, 1.0]), rad(limits["jaw_left"])),
        Joint("jaw_right", "wrist", np.array([0.0, jaw_pivot_y, 0.0]),
              np.array([0.0, 0.0, -1.0]), rad(limits["jaw_right"])),
    ]
    chain = KinematicChain(
        joints=joints,
        part_bindings={
            "shaft": "shaft",
            "wrist": "wrist",
            "jaw_left": "jaw_left",
            "jaw_right": "jaw_right",
        },
        root_transform=RigidTransform.identity(),
    )
    return ArticulatedModel(
        parts={"shaft": shaft, "wrist": wrist, "jaw_left": jaw_left, "jaw_right": jaw_right},
        chain=chain,
        spec=spec,
    )


def build_backdrop_sphere(radius: float = 1000.0, lat_bands: int = 12, lon_bands: int = 24) -> Mesh:
    """UV-sphere centered at the origin carrying the chroma material.

    Triangle count: 2*lon_bands pole fans + (lat_bands-2)*lon_bands*2.
    """
    if radius <= 0:
        raise ValidationError("radius", f"must be positive, got {radius}")
    if lat_bands < 3 or lon_bands < 3:
        raise ValidationError("bands", f"need >= 3 bands, got ({lat_bands}, {lon_bands})")

    verts = [(0.0, radius, 0.0)]
    for i in range(1, lat_bands):
        polar = np.pi * i / lat_bands
        ring_r = radius * np.sin(polar)
        y = radius * np.cos(polar)
        for j in range(lon_bands):
            azim = 2.0 * np.pi * j / lon_bands
            verts.append((ring_r * np.cos(azim), y, ring_r * np.sin(azim)))
    verts.append((0.0, -radius, 0.0))
    verts = np.array(verts, dtype=np.float64)
    bottom = len(verts) - 1

    def ring(i, j):
        return 1 + (i - 1) * lon_bands + (j % lon_bands)

    tris = []
    for j in range(lon_bands):
        tris.append((0, ring(1, j), ring(1, j + 1)))
    for i in range(1, lat_bands - 1):
        for j in range(lon_bands):
            tris.append((ring(i, j), ring(i + 1, j), ring(i + 1, j + 1)))
            tris.append((ring(i, j), ring(i + 1, j + 1), ring(i, j + 1)))
    for j in range(lon_bands):
        tris.append((bottom, ring(lat_bands - 1, j + 1), ring(lat_bands - 1, j)))

    return Mesh(verts, np.array(tris, dtype=np.int32), materials=[CHROMA_GREEN])


def build_blood_patch(
    part_radius: float,
    axial_pos: float,
    band_height: float,
    texture_seed: int,
    segments: int = 16,
) -> Mesh:
    """Open cylinder band wrapped around a part, with seeded dark-red colors.

    Band radius is part_radius * (1 + BLOOD_RADIUS_EPS) so it renders outside
    the host surface. Ring heights are jittered for an organic edge; vertex
    colors always satisfy R > G and R > B.
    """
    if part_radius <= 0:
        raise ValidationError("part_radius", f"must be positive, got {part_radius}")
    if band_height <= 0:
        raise ValidationError("band_height", f"must be positive, got {band_height}")

    rng = Pcg32(texture_seed, stream=0x626C6F6F64)  # "blood"
    radius = part_radius * (1.0 + BLOOD_RADIUS_EPS)
    angles = 2.0 * np.pi * np.arange(segments) / segments

    lo_ring = []
    hi_ring = []
    for angle in angles:
        jitter_lo = 0.15 * band_height * rng.uniform(-1.0, 1.0)
        jitter_hi = 0.15 * band_height * rng.uniform(-1.0, 1.0)
        x, z = radius * np.cos(angle), radius * np.sin(angle)
        lo_ring.append((x, axial_pos + jitter_lo, z))
        hi_ring.append((x, axial_pos + band_height + jitter_hi, z))
    verts = np.array(lo_ring + hi_ring, dtype=np.float64)

    tris = []
    for k in range(segments):
        k1 = (k + 1) % segments
        tris.append((k, k1, segments + k1))
        tris.append((k, segments + k1, segments + k))

    colors = np.empty((2 * segments, 3), dtype=np.float64)
    for i in range(2 * segments):
        colors[i] = (rng.uniform(0.35, 0.62), rng.uniform(0.03, 0.12), rng.uniform(0.02, 0.10))

    blood_material = Material(base_color=(0.45, 0.06, 0.05), reflectivity=0.2)
    return Mesh(
        verts,
        np.array(tris, dtype=np.int32),
        materials=[blood_material],
        vertex_colors=colors,
    )


def parse_mesh_obj_with_warnings(text: str) -> tuple[Mesh, int]:
    """Parse the v/f Wavefront subset; returns (mesh, skipped-line count).

    Indices are 1-based in the file, 0-based in the Mesh. Face tokens may
    carry `/t/n` suffixes (ignored). Faces with more than three indices are
    fan-triangulated.
    """
    vertices: list[tuple[float, float, float]] = []
    triangles: list[tuple[int, int, int]] = []
    warnings = 0

    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        tag = tokens[0]
        if tag == "v":
            if len(tokens) != 4:
                raise MeshParseError(line_no, f"vertex line needs 3 coordinates, got {len(tokens) - 1}")
            try:
                vertices.append((float(tokens[1]), float(tokens[2]), float(tokens[3])))
            except ValueError as exc:
                raise MeshParseError(line_no, f"malformed vertex coordinate: {exc}") from None
        elif tag == "f":
            if len(tokens) < 4:
                raise MeshParseError(line_no, f"face needs >= 3 indices, got {len(tokens) - 1}")
            idx = []
            for token in tokens[1:]:
                head = token.split("/", 1)[0]
                try:
                    value = int(head)
                except ValueError:
                    raise MeshParseError(line_no, f"malformed face index {token!r}") from None
                if value < 1 or value > len(vertices):
                    raise MeshParseError(
                        line_no, f"index out of range: {value} (have {len(vertices)} vertices)"
                    )
                idx.append(value - 1)
            for k in range(1, len(idx) - 1):
                triangles.append((idx[0], idx[k], idx[k + 1]))
        else:
            warnings += 1

    if not triangles:
        raise MeshParseError(0, "no faces found")
    mesh = Mesh(
        np.array(vertices, dtype=np.float64),
        np.array(triangles, dtype=np.int32),
    )
    return mesh, warnings


def parse_mesh_obj(text: str) -> Mesh:
    mesh, _ = parse_mesh_obj_with_warnings(text)
    return mesh


def mesh_to_obj(mesh: Mesh) -> str:
    """Serialize to the v/f subset with full-precision floats (repr)."""
    lines = []
    for v in mesh.vertices:
        lines.append(f"v {v[0]!r} {v[1]!r} {v[2]!r}")
    for t in mesh.triangles:
        lines.append(f"f {t[0] + 1} {t[1] + 1} {t[2] + 1}")
    return "\n".join(lines) + "\n"
