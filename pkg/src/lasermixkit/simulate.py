"""Synthetic rotating-beam lidar: analytic ray casting against a small set of
labeled primitives, plus a seeded benchmark generator whose scenes show the
class-vs-beam-area regularity that the mixing strategies exploit.

World convention: ground plane at z = 0, sensor at (0, 0, sensor_height).
Returned clouds are in world coordinates.
"""

from dataclasses import dataclass, replace
from typing import List, Tuple, Union

import numpy as np

from . import _backend
from .camera import CalibrationParams, ImagePlane, paint_points_multi, project_points
from .cloud import PointCloud
from .errors import ValidationError

T_EPS = 1e-9
INTENSITY_NOISE = 0.05
COLOR_NOISE = 0.08


@dataclass(frozen=True)
class GroundPlane:
    class_id: int
    z: float = 0.0


@dataclass(frozen=True)
class BoxPrim:
    """Axis-aligned box given by center and full side lengths."""

    class_id: int
    center: Tuple[float, float, float]
    extents: Tuple[float, float, float]


@dataclass(frozen=True)
class CylinderPrim:
    """Vertical cylinder given by its geometric center, radius, and height."""

    class_id: int
    center: Tuple[float, float, float]
    radius: float
    height: float


Primitive = Union[GroundPlane, BoxPrim, CylinderPrim]


@dataclass
class SceneSpec:
    sensor_height: float
    beam_inclinations: np.ndarray
    azimuth_steps: int
    primitives: List[Primitive]
    max_range: float = 80.0
    seed: int = 0
    jitter: Union[float, Tuple[float, float, float]] = 0.0

    def __post_init__(self):
        beams = np.ascontiguousarray(self.beam_inclinations, dtype=np.float64)
        if beams.ndim != 1 or beams.size == 0:
            raise ValidationError("need at least one beam inclination")
        if beams.size > 1 and not (np.diff(beams) > 0).all():
            raise ValidationError("beam inclinations must be sorted ascending")
        if int(self.azimuth_steps) < 4:
            raise ValidationError("azimuth_steps must be >= 4")
        if self.max_range <= 0:
            raise ValidationError("max_range must be positive")
        self.beam_inclinations = beams
        self.azimuth_steps = int(self.azimuth_steps)
        jit = np.broadcast_to(np.asarray(self.jitter, dtype=np.float64), (3,)).copy()
        if (jit < 0).any():
            raise ValidationError("jitter stds must be nonnegative")
        self.jitter = jit


def _pack_primitives(primitives):
    kinds = np.zeros(len(primitives), dtype=np.int64)
    data = np.zeros((len(primitives), 8), dtype=np.float64)
    classes = np.zeros(len(primitives), dtype=np.int64)
    for i, prim in enumerate(primitives):
        classes[i] = prim.class_id
        if isinstance(prim, GroundPlane):
            kinds[i] = _backend.PRIM_PLANE
            data[i, 0] = prim.z
        elif isinstance(prim, BoxPrim):
            kinds[i] = _backend.PRIM_BOX
            center = np.asarray(prim.center, dtype=np.float64)
            half = np.asarray(prim.extents, dtype=np.float64) / 2.0
            data[i, 0:3] = center - half
            data[i, 3:6] = center + half
        elif isinstance(prim, CylinderPrim):
            kinds[i] = _backend.PRIM_CYLINDER
            cx, cy, cz = prim.center
            data[i, 0] = cx
            data[i, 1] = cy
            data[i, 2] = cz - prim.height / 2.0
            data[i, 3] = cz + prim.height / 2.0
            data[i, 4] = prim.radius
        else:
            raise ValidationError(f"unknown primitive type {type(prim).__name__}")
    return kinds, data, classes


def class_intensity(class_id):
    """Nominal reflectance per class: a fixed, well-spread table in (0, 1)."""
    cid = np.asarray(class_id, dtype=np.float64)
    return 0.15 + 0.7 * ((cid * 0.381966) % 1.0)


def simulate_scan(spec):
    """Cast one full revolution of rays and label hits by primitive class.

    Rays start at (0, 0, sensor_height); each (beam, azimuth step) ray keeps
    the nearest intersection within max_range. Gaussian coordinate jitter and
    intensity noise are applied after labeling, deterministically per seed.
    """
    beams = spec.beam_inclinations
    steps = spec.azimuth_steps
    alphas = -np.pi + 2.0 * np.pi * np.arange(steps) / steps
    cos_b = np.cos(beams)[:, None]
    sin_b = np.sin(beams)[:, None]
    dirs = np.empty((beams.size * steps, 3), dtype=np.float64)
    dirs[:, 0] = (cos_b * np.cos(alphas)[None, :]).ravel()
    dirs[:, 1] = (cos_b * np.sin(alphas)[None, :]).ravel()
    dirs[:, 2] = np.broadcast_to(sin_b, (beams.size, steps)).ravel()
    origin = np.array([0.0, 0.0, spec.sensor_height], dtype=np.float64)
    kinds, data, classes = _pack_primitives(spec.primitives)
    if kinds.size:
        t, prim = _backend.ray_cast(origin, dirs, kinds, data, spec.max_range, T_EPS)
    else:
        t = np.full(dirs.shape[0], np.inf)
        prim = np.full(dirs.shape[0], -1, dtype=np.int64)
    hit = prim >= 0
    coords = origin + t[hit, None] * dirs[hit]
    labels = classes[prim[hit]]
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    coords = coords + rng.standard_normal(coords.shape) * spec.jitter
    intensity = class_intensity(labels) + rng.standard_normal(labels.shape) * INTENSITY_NOISE
    intensity = np.clip(intensity, 0.0, 1.0)
    return PointCloud(coords=coords, intensity=intensity, labels=labels)


def default_scene_template():
    """Four-class street-like scene: ground, buildings, cars, poles.

    Eight beams from -22 to +3 degrees, sensor at 1.8 m. Objects stand on the
    ground at varied bearings and distances; make_benchmark re-places them per
    scene.
    """
    deg = np.pi / 180.0
    prims = [GroundPlane(class_id=0, z=0.0)]
    for rho, theta, ex, ey, ez in (
        (21.0, 15.0, 8.0, 10.0, 6.0),
        (27.0, 140.0, 9.0, 8.0, 7.0),
        (24.0, 255.0, 7.0, 9.0, 5.0),
    ):
        prims.append(BoxPrim(
            class_id=1,
            center=(rho * np.cos(theta * deg), rho * np.sin(theta * deg), ez / 2.0),
            extents=(ex, ey, ez),
        ))
    for rho, theta in ((9.0, 50.0), (13.0, 160.0), (11.0, 230.0), (16.0, 320.0)):
        prims.append(BoxPrim(
            class_id=2,
            center=(rho * np.cos(theta * deg), rho * np.sin(theta * deg), 0.75),
            extents=(3.9, 1.8, 1.5),
        ))
    for rho, theta in ((6.0, 10.0), (8.0, 95.0), (10.0, 185.0), (12.0, 275.0), (15.0, 340.0)):
        prims.append(CylinderPrim(
            class_id=3,
            center=(rho * np.cos(theta * deg), rho * np.sin(theta * deg), 2.25),
            radius=0.15,
            height=4.5,
        ))
    return SceneSpec(
        sensor_height=1.8,
        beam_inclinations=np.deg2rad(np.linspace(-22.0, 3.0, 8)),
        azimuth_steps=720,
        primitives=prims,
        max_range=80.0,
        seed=0,
        jitter=0.02,
    )


def _perturb_primitives(template, rng):
    """Re-place each object at a fresh bearing and a jittered distance/size,
    keeping it standing on the ground."""
    prims = []
    for prim in template.primitives:
        if isinstance(prim, GroundPlane):
            prims.append(prim)
            continue
        cx, cy, _ = prim.center
        rho = float(np.hypot(cx, cy))
        theta = rng.uniform(-np.pi, np.pi)
        rho = rho * rng.uniform(0.75, 1.3)
        size = rng.uniform(0.85, 1.15)
        x, y = rho * np.cos(theta), rho * np.sin(theta)
        if isinstance(prim, BoxPrim):
            extents = tuple(size * e for e in prim.extents)
            prims.append(BoxPrim(prim.class_id, (x, y, extents[2] / 2.0), extents))
        else:
            height = size * prim.height
            prims.append(CylinderPrim(
                prim.class_id, (x, y, height / 2.0), size * prim.radius, height
            ))
    return prims


def make_benchmark(template, num_scenes, seed):
    """num_scenes labeled scans from seeded per-scene perturbations of the
    template: object placement, object size, and sensor height all vary."""
    clouds = []
    for i in range(int(num_scenes)):
        place_rng = np.random.Generator(
            np.random.PCG64(np.random.SeedSequence(entropy=seed, spawn_key=(i, 0)))
        )
        spec = replace(
            template,
            sensor_height=template.sensor_height + place_rng.uniform(-0.15, 0.15),
            primitives=_perturb_primitives(template, place_rng),
            seed=seed + i,
        )
        clouds.append(simulate_scan(spec))
    return clouds


# ---------------------------------------------------------------------------
# camera painting for the benchmark


def default_prototypes():
    """Per-class color prototypes used for painted channels and class scores."""
    return np.array([
        [0.50, 0.50, 0.50],
        [0.75, 0.25, 0.20],
        [0.20, 0.35, 0.80],
        [0.90, 0.85, 0.15],
    ])


def benchmark_cameras(sensor_height, image_size=(128, 96), focal=60.0):
    """Four cameras co-located with the sensor, yawed 90 degrees apart.

    Camera z looks along the yaw direction, x right, y down; together they
    cover the full horizontal sweep.
    """
    w, h = image_size
    intrinsic = np.array([
        [focal, 0.0, w / 2.0],
        [0.0, focal, h / 2.0],
        [0.0, 0.0, 1.0],
    ])
    cams = []
    for yaw_deg in (0.0, 90.0, 180.0, 270.0):
        psi = np.deg2rad(yaw_deg)
        forward = np.array([np.cos(psi), np.sin(psi), 0.0])
        right = np.array([np.sin(psi), -np.cos(psi), 0.0])
        down = np.array([0.0, 0.0, -1.0])
        r = np.stack([right, down, forward])
        center = np.array([0.0, 0.0, sensor_height])
        ext = np.eye(4)
        ext[:3, :3] = r
        ext[:3, 3] = -r @ center
        cams.append(CalibrationParams(intrinsic=intrinsic, extrinsic=ext,
                                      image_size=(w, h)))
    return cams


def render_class_image(cloud, calib, prototypes, rng, background=0.2):
    """Rasterize the scan into the camera: each pixel takes the color
    prototype of the nearest projected point's class, plus pixel noise."""
    w, h = calib.image_size
    corr = project_points(cloud, calib)
    img = np.full((h, w, prototypes.shape[1]), background, dtype=np.float64)
    valid = corr.mask.astype(bool)
    if valid.any() and cloud.labels is not None:
        uv = corr.pixel_coords[valid]
        cols = np.clip(np.floor(uv[:, 0] + 0.5).astype(np.int64), 0, w - 1)
        rows = np.clip(np.floor(uv[:, 1] + 0.5).astype(np.int64), 0, h - 1)
        depth = corr.depth[valid]
        ids = np.arange(depth.size)
        order = np.lexsort((ids, depth))[::-1]  # nearest point written last
        img[rows[order], cols[order], :] = prototypes[cloud.labels[valid][order]]
    img = img + rng.standard_normal(img.shape) * COLOR_NOISE
    return ImagePlane(np.clip(img, 0.0, 1.0)), corr


def paint_benchmark(clouds, camera_height, seed, prototypes=None):
    """Attach painted channels to every scan via the four benchmark cameras.

    The rendered image and the painting lookup share each camera's calibration,
    so the correspondence is self-consistent by construction. Returns new
    clouds whose painted channels are (color..., validity).
    """
    if prototypes is None:
        prototypes = default_prototypes()
    cams = benchmark_cameras(camera_height)
    painted = []
    for i, cloud in enumerate(clouds):
        rng = np.random.Generator(
            np.random.PCG64(np.random.SeedSequence(entropy=seed, spawn_key=(i, 1)))
        )
        views = [render_class_image(cloud, cam, prototypes, rng) for cam in cams]
        painted.append(paint_points_multi(cloud, views))
    return painted
