"""Camera calibration, point-to-pixel projection, painting, and the masked
cosine objective used for image-feature alignment."""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import EmptyInputError, ValidationError

DEPTH_EPS = 1e-6


@dataclass(frozen=True)
class CalibrationParams:
    """Pinhole intrinsics plus a rigid lidar-to-camera transform.

    Camera convention: z forward, x right, y down. image_size is (W, H).
    """

    intrinsic: np.ndarray
    extrinsic: np.ndarray
    image_size: tuple

    def __post_init__(self):
        k = np.ascontiguousarray(self.intrinsic, dtype=np.float64)
        t = np.ascontiguousarray(self.extrinsic, dtype=np.float64)
        if k.shape != (3, 3):
            raise ValidationError(f"intrinsic must be 3x3, got {k.shape}")
        if t.shape != (4, 4):
            raise ValidationError(f"extrinsic must be 4x4, got {t.shape}")
        if not (np.isfinite(k).all() and np.isfinite(t).all()):
            raise ValidationError("calibration matrices must be finite")
        if abs(k[2, 2] - 1.0) > 1e-9 or k[2, 0] != 0.0 or k[2, 1] != 0.0:
            raise ValidationError("intrinsic bottom row must be (0, 0, 1)")
        if k[0, 0] <= 0.0 or k[1, 1] <= 0.0:
            raise ValidationError("focal lengths must be positive")
        r = t[:3, :3]
        if np.abs(r @ r.T - np.eye(3)).max() > 1e-6:
            raise ValidationError("extrinsic rotation block is not orthonormal")
        if abs(np.linalg.det(r) - 1.0) > 1e-6:
            raise ValidationError("extrinsic rotation must have determinant +1")
        if np.abs(t[3] - np.array([0.0, 0.0, 0.0, 1.0])).max() > 1e-9:
            raise ValidationError("extrinsic bottom row must be (0, 0, 0, 1)")
        w, h = self.image_size
        if int(w) < 1 or int(h) < 1:
            raise ValidationError("image_size must be positive")
        object.__setattr__(self, "intrinsic", k)
        object.__setattr__(self, "extrinsic", t)
        object.__setattr__(self, "image_size", (int(w), int(h)))


@dataclass
class Correspondence:
    """Per-point projection result: (u, v) pixels, validity mask, camera depth.

    mask=1 entries satisfy 0 <= u < W, 0 <= v < H, depth > 0; masked-out
    entries have pixel coordinates zeroed.
    """

    pixel_coords: np.ndarray
    mask: np.ndarray
    depth: np.ndarray
    image_size: tuple


@dataclass(frozen=True)
class ImagePlane:
    """Dense H x W x D image (RGB in [0,1] or feature channels)."""

    data: np.ndarray

    def __post_init__(self):
        data = np.ascontiguousarray(self.data, dtype=np.float64)
        if data.ndim != 3:
            raise ValidationError(f"image data must be (H, W, D), got {data.shape}")
        if not np.isfinite(data).all():
            raise ValidationError("image data contains non-finite values")
        object.__setattr__(self, "data", data)

    @property
    def height(self):
        return self.data.shape[0]

    @property
    def width(self):
        return self.data.shape[1]

    @property
    def channels(self):
        return self.data.shape[2]


def project_points(cloud, calib):
    """Project lidar points into the image plane of `calib`.

    Each point moves to the camera frame, is divided by its camera-frame
    depth, and passes through the intrinsics. mask=1 iff depth > 1e-6 m and
    the pixel lies inside the image; everything else gets zero-padded pixels.
    """
    coords = cloud.coords
    r = calib.extrinsic[:3, :3]
    t = calib.extrinsic[:3, 3]
    cam = coords @ r.T + t
    depth = cam[:, 2].copy()
    w, h = calib.image_size
    uv = np.zeros((coords.shape[0], 2), dtype=np.float64)
    front = depth > DEPTH_EPS
    if front.any():
        proj = cam[front] @ calib.intrinsic.T
        uv[front, 0] = proj[:, 0] / depth[front]
        uv[front, 1] = proj[:, 1] / depth[front]
    mask = front & (uv[:, 0] >= 0.0) & (uv[:, 0] < w) & (uv[:, 1] >= 0.0) & (uv[:, 1] < h)
    uv[~mask] = 0.0
    return Correspondence(pixel_coords=uv, mask=mask.astype(np.uint8), depth=depth,
                          image_size=(w, h))


def _nearest_pixel(uv, width, height):
    """Round-half-up each coordinate, then clamp into the image."""
    cols = np.floor(uv[:, 0] + 0.5).astype(np.int64)
    rows = np.floor(uv[:, 1] + 0.5).astype(np.int64)
    return np.clip(rows, 0, height - 1), np.clip(cols, 0, width - 1)


def paint_points(cloud, image, corr):
    """Attach image evidence to points: nearest-pixel lookup for mask=1 points,
    zeros otherwise, plus a trailing validity channel equal to the mask."""
    if corr.pixel_coords.shape[0] != len(cloud):
        raise ValidationError("correspondence was computed for a different cloud")
    if corr.image_size != (image.width, image.height):
        raise ValidationError("correspondence was computed for a different image size")
    n = len(cloud)
    d = image.channels
    painted = np.zeros((n, d + 1), dtype=np.float64)
    valid = corr.mask.astype(bool)
    if valid.any():
        rows, cols = _nearest_pixel(corr.pixel_coords[valid], image.width, image.height)
        painted[valid, :d] = image.data[rows, cols, :]
    painted[:, d] = corr.mask
    return cloud.with_painted(painted)


def paint_points_multi(cloud, views):
    """Paint from several cameras: masks merge by logical OR and the first
    camera (in list order) with a valid pixel supplies the painting."""
    if not views:
        raise ValidationError("paint_points_multi needs at least one (image, corr) view")
    d = views[0][0].channels
    for image, _ in views:
        if image.channels != d:
            raise ValidationError("all camera images must share the channel count")
    n = len(cloud)
    painted = np.zeros((n, d + 1), dtype=np.float64)
    taken = np.zeros(n, dtype=bool)
    for image, corr in views:
        if corr.pixel_coords.shape[0] != n:
            raise ValidationError("correspondence was computed for a different cloud")
        fresh = corr.mask.astype(bool) & ~taken
        if fresh.any():
            rows, cols = _nearest_pixel(corr.pixel_coords[fresh], image.width, image.height)
            painted[fresh, :d] = image.data[rows, cols, :]
            taken |= fresh
    painted[:, d] = taken
    return cloud.with_painted(painted)


def masked_cosine_loss(features_p, features_img, mask):
    """Mean (1 - cosine) over mask=1 rows, both sides L2-normalized.

    Returns (loss, gradient w.r.t. features_p). Zero-norm rows contribute
    loss 1 with zero gradient; gradient never flows to features_img.
    """
    fp = np.asarray(features_p, dtype=np.float64)
    fi = np.asarray(features_img, dtype=np.float64)
    mask = np.asarray(mask).astype(bool)
    if fp.ndim != 2 or fp.shape != fi.shape:
        raise ValidationError(
            f"feature arrays must share an (N, D) shape, got {fp.shape} vs {fi.shape}"
        )
    if fp.shape[1] < 1:
        raise ValidationError("features need at least one dimension")
    if mask.shape != (fp.shape[0],):
        raise ValidationError("mask must have one entry per row")
    kept = int(mask.sum())
    if kept == 0:
        raise EmptyInputError("masked_cosine_loss: no rows selected by the mask")
    grad = np.zeros_like(fp)
    p = fp[mask]
    q = fi[mask]
    norm_p = np.sqrt((p * p).sum(axis=1))
    norm_q = np.sqrt((q * q).sum(axis=1))
    ok = (norm_p > 0.0) & (norm_q > 0.0)
    cos = np.zeros(p.shape[0], dtype=np.float64)
    if ok.any():
        u = p[ok] / norm_p[ok, None]
        v = q[ok] / norm_q[ok, None]
        cos[ok] = (u * v).sum(axis=1)
        # d(1-cos)/dp = -(v - cos*u)/|p|, averaged over the kept rows
        g = -(v - cos[ok, None] * u) / norm_p[ok, None] / kept
        sub = np.zeros_like(p)
        sub[ok] = g
        grad[mask] = sub
    loss = float((1.0 - cos).sum() / kept)
    return loss, grad
