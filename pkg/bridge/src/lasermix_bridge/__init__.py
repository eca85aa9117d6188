"""Plain-array bindings over lasermixkit for use inside dataloader workers.

Every function takes and returns contiguous numpy buffers: float32 for
coordinates, intensities, painted features, and images; int32 for labels and
area indices. Inputs are validated and copied at the boundary before the core
is entered, and outputs are fresh arrays that never alias the inputs, so the
bindings are safe to call concurrently from multiple worker processes (the
core is pure). Keyword arguments mirror the CLI flags: `areas` is the number
of inclination bands, `phi_min`/`phi_max` are bounds in degrees (both or
neither; the default is the pooled data range, as in `lasermixkit mix`).
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

import lasermixkit as _core

__all__ = [
    "BoundaryError",
    "MixResult",
    "Projection",
    "laser_mix",
    "multi_modal_laser_mix",
    "assign_areas",
    "project_points",
    "paint_points",
]

__version__ = "0.1.0"


class BoundaryError(ValueError):
    """Raised when an input buffer fails validation at the binding boundary
    (wrong dtype, wrong shape, inconsistent lengths). The core is never
    entered."""


def _take(name, arr, dtype, shape):
    """Validate an input buffer and hand back a float64/int64 working copy.

    `shape` entries are ints, None (any), or a string naming a dimension that
    must agree with other buffers (resolved by the caller).
    """
    if not isinstance(arr, np.ndarray):
        raise BoundaryError(f"{name} must be a numpy array, got {type(arr).__name__}")
    if arr.dtype != dtype:
        raise BoundaryError(f"{name} must have dtype {np.dtype(dtype).name}, "
                            f"got {arr.dtype.name}")
    if arr.ndim != len(shape):
        raise BoundaryError(f"{name} must be {len(shape)}-dimensional, got shape {arr.shape}")
    for axis, want in enumerate(shape):
        if isinstance(want, int) and arr.shape[axis] != want:
            raise BoundaryError(f"{name} must have shape {shape}, got {arr.shape}")
    wide = np.float64 if dtype == np.float32 else np.int64
    return np.ascontiguousarray(arr, dtype=wide)


def _take_points(prefix, coords, intensity, labels, painted=None):
    coords = _take(f"coords{prefix}", coords, np.float32, (None, 3))
    n = coords.shape[0]
    if intensity is None:
        intensity = np.zeros(n, dtype=np.float64)
    else:
        intensity = _take(f"intensity{prefix}", intensity, np.float32, (None,))
        if intensity.shape[0] != n:
            raise BoundaryError(f"intensity{prefix} has {intensity.shape[0]} entries "
                                f"for {n} points")
    if labels is not None:
        labels = _take(f"labels{prefix}", labels, np.int32, (None,))
        if labels.shape[0] != n:
            raise BoundaryError(f"labels{prefix} has {labels.shape[0]} entries "
                                f"for {n} points")
    if painted is not None:
        painted = _take(f"painted{prefix}", painted, np.float32, (None, None))
        if painted.shape[0] != n:
            raise BoundaryError(f"painted{prefix} has {painted.shape[0]} rows "
                                f"for {n} points")
    return _core.PointCloud(coords=coords, intensity=intensity,
                            labels=labels, painted=painted)


def _give_f32(arr):
    return np.ascontiguousarray(arr, dtype=np.float32)


def _give_i32(arr):
    return np.ascontiguousarray(arr, dtype=np.int32)


def _partition(clouds, areas, phi_min, phi_max):
    if (phi_min is None) != (phi_max is None):
        raise BoundaryError("provide both phi_min and phi_max or neither")
    if phi_min is not None:
        lo = float(np.deg2rad(phi_min))
        hi = float(np.deg2rad(phi_max))
    else:
        incs = [_core.inclination(c) for c in clouds if len(c)]
        if not incs:
            raise BoundaryError("cannot derive an inclination range from empty scans")
        pooled = np.concatenate(incs)
        lo, hi = float(pooled.min()), float(pooled.max())
        if lo == hi:
            lo, hi = lo - 1e-6, hi + 1e-6
    return _core.make_inclination_partition(lo, hi, int(areas))


@dataclass(frozen=True)
class MixResult:
    """Two mixed scans as plain arrays. labels_* are None when no labels were
    given; painted_* are None outside multi_modal_laser_mix. provenance_* tag
    every output point with its source scan (0 = first input, 1 = second)."""

    coords_a: np.ndarray
    intensity_a: np.ndarray
    provenance_a: np.ndarray
    coords_b: np.ndarray
    intensity_b: np.ndarray
    provenance_b: np.ndarray
    labels_a: Optional[np.ndarray] = None
    labels_b: Optional[np.ndarray] = None
    painted_a: Optional[np.ndarray] = None
    painted_b: Optional[np.ndarray] = None


def _mix_result(out):
    return MixResult(
        coords_a=_give_f32(out.mixed_a.coords),
        intensity_a=_give_f32(out.mixed_a.intensity),
        provenance_a=_give_i32(out.provenance_a),
        coords_b=_give_f32(out.mixed_b.coords),
        intensity_b=_give_f32(out.mixed_b.intensity),
        provenance_b=_give_i32(out.provenance_b),
        labels_a=None if out.mixed_a.labels is None else _give_i32(out.mixed_a.labels),
        labels_b=None if out.mixed_b.labels is None else _give_i32(out.mixed_b.labels),
        painted_a=None if out.mixed_a.painted is None else _give_f32(out.mixed_a.painted),
        painted_b=None if out.mixed_b.painted is None else _give_f32(out.mixed_b.painted),
    )


def laser_mix(coords_a, coords_b, *, intensity_a=None, intensity_b=None,
              labels_a=None, labels_b=None, areas=6, phi_min=None, phi_max=None):
    """Swap alternating inclination bands between two scans.

    coords_*: (N, 3) float32; intensity_*: optional (N,) float32 in [0, 1]
    (zeros when omitted); labels_*: optional (N,) int32. Returns a MixResult.
    """
    a = _take_points("_a", coords_a, intensity_a, labels_a)
    b = _take_points("_b", coords_b, intensity_b, labels_b)
    part = _partition((a, b), areas, phi_min, phi_max)
    return _mix_result(_core.laser_mix(a, b, part))


def multi_modal_laser_mix(coords_a, painted_a, coords_b, painted_b, *,
                          intensity_a=None, intensity_b=None,
                          labels_a=None, labels_b=None,
                          areas=6, phi_min=None, phi_max=None):
    """laser_mix for painted scans: per-point image evidence travels along.

    painted_*: (N, D) float32 with matching D on both sides.
    """
    a = _take_points("_a", coords_a, intensity_a, labels_a, painted=painted_a)
    b = _take_points("_b", coords_b, intensity_b, labels_b, painted=painted_b)
    part = _partition((a, b), areas, phi_min, phi_max)
    return _mix_result(_core.multi_modal_laser_mix(a, b, part))


def assign_areas(coords, *, areas=6, phi_min=None, phi_max=None):
    """Inclination band index per point as (N,) int32."""
    cloud = _take_points("", coords, None, None)
    part = _partition((cloud,), areas, phi_min, phi_max)
    return _give_i32(_core.assign_areas(cloud, part))


@dataclass(frozen=True)
class Projection:
    """Per-point camera correspondence: pixel_coords (N, 2) float32, mask
    (N,) int32 (1 = valid pixel), depth (N,) float32 camera-frame depth."""

    pixel_coords: np.ndarray
    mask: np.ndarray
    depth: np.ndarray


def _calibration(intrinsic, extrinsic, image_size):
    intrinsic = np.asarray(intrinsic, dtype=np.float64)
    extrinsic = np.asarray(extrinsic, dtype=np.float64)
    width, height = (int(v) for v in image_size)
    return _core.CalibrationParams(intrinsic=intrinsic, extrinsic=extrinsic,
                                   image_size=(width, height))


def project_points(coords, *, intrinsic, extrinsic, image_size):
    """Project points into a camera. Calibration matrices are small metadata
    records and accept any float layout; the point buffer is float32.
    """
    cloud = _take_points("", coords, None, None)
    calib = _calibration(intrinsic, extrinsic, image_size)
    corr = _core.project_points(cloud, calib)
    return Projection(pixel_coords=_give_f32(corr.pixel_coords),
                      mask=_give_i32(corr.mask),
                      depth=_give_f32(corr.depth))


def paint_points(coords, image, *, intrinsic, extrinsic):
    """Project points into `image` ((H, W, C) float32) and return (N, C+1)
    float32 painted channels, the trailing channel being the validity flag."""
    cloud = _take_points("", coords, None, None)
    image = _take("image", image, np.float32, (None, None, None))
    calib = _calibration(intrinsic, extrinsic,
                         (image.shape[1], image.shape[0]))
    corr = _core.project_points(cloud, calib)
    painted = _core.paint_points(cloud, _core.ImagePlane(image), corr)
    return _give_f32(painted.painted)
