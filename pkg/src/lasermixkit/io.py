"""File formats: KITTI-style scan/label binaries, PPM/FMAP images, PGM
heatmaps, calibration text, scene templates, training configs, weight files,
and the CSV reports emitted by the CLI.

All writers are deterministic (no timestamps); all parsers reject malformed
input with the byte offset of the problem.
"""

import configparser
import csv
import io as _io
import os
import struct

import numpy as np

from .camera import CalibrationParams, ImagePlane
from .cloud import PointCloud
from .errors import FormatError, ValidationError
from .model import ModelParams
from .simulate import BoxPrim, CylinderPrim, GroundPlane, SceneSpec
from .train import LossWeights, TrainConfig

FMAP_MAGIC = b"FMAP"
SEMANTIC_MASK = 0xFFFF


def lmk_thread_cap():
    """Worker cap from LMK_THREADS (0 or unset = automatic)."""
    raw = os.environ.get("LMK_THREADS", "0").strip()
    try:
        cap = int(raw)
    except ValueError:
        raise ValidationError(f"LMK_THREADS must be an integer, got {raw!r}")
    if cap < 0:
        raise ValidationError("LMK_THREADS must be >= 0")
    return cap if cap > 0 else (os.cpu_count() or 1)


# ---------------------------------------------------------------------------
# scans and labels


def read_scan(path, label_path=None):
    """Decode little-endian float32 (x, y, z, intensity) records, with an
    optional sibling label file of uint32 ids (semantic id in the low 16 bits).

    Note: only the semantic half of each label is retained, so files with
    nonzero high (instance) bits do not round-trip bit-exactly.
    """
    with open(path, "rb") as f:
        payload = f.read()
    if len(payload) % 16 != 0:
        raise FormatError(
            f"scan {path!r} is not a whole number of 16-byte records",
            offset=16 * (len(payload) // 16),
        )
    flat = np.frombuffer(payload, dtype="<f4").astype(np.float64)
    records = flat.reshape(-1, 4)
    bad = ~np.isfinite(records).all(axis=1)
    if bad.any():
        raise FormatError(
            f"scan {path!r} contains a non-finite coordinate record",
            offset=16 * int(np.flatnonzero(bad)[0]),
        )
    bad_intensity = (records[:, 3] < 0.0) | (records[:, 3] > 1.0)
    if bad_intensity.any():
        raise FormatError(
            f"scan {path!r} has intensity outside [0, 1]",
            offset=16 * int(np.flatnonzero(bad_intensity)[0]) + 12,
        )
    labels = None
    if label_path is not None:
        labels = read_labels(label_path, expected_count=records.shape[0])
    return PointCloud(coords=records[:, :3], intensity=records[:, 3], labels=labels)


def read_labels(path, expected_count=None):
    with open(path, "rb") as f:
        payload = f.read()
    if len(payload) % 4 != 0:
        raise FormatError(
            f"label file {path!r} is not a whole number of uint32 records",
            offset=4 * (len(payload) // 4),
        )
    raw = np.frombuffer(payload, dtype="<u4")
    if expected_count is not None and raw.size != expected_count:
        raise FormatError(
            f"label file {path!r} has {raw.size} entries for {expected_count} points",
            offset=4 * min(raw.size, expected_count),
        )
    return (raw & SEMANTIC_MASK).astype(np.int64)


def write_scan(cloud, path, label_path=None):
    """Inverse of read_scan; bit-exact for files read_scan accepted (with
    zero instance bits in the labels)."""
    records = np.empty((len(cloud), 4), dtype="<f4")
    records[:, :3] = cloud.coords
    records[:, 3] = cloud.intensity
    with open(path, "wb") as f:
        f.write(records.tobytes())
    if label_path is not None:
        if cloud.labels is None:
            raise ValidationError("cloud has no labels to write")
        with open(label_path, "wb") as f:
            f.write(cloud.labels.astype("<u4").tobytes())


# ---------------------------------------------------------------------------
# images: FMAP feature container, PPM read, PGM write


def write_fmap(data, path):
    """(H, W, D) float array -> 16-byte header (magic, W, H, D) + float32 grid,
    row-major, channel-innermost."""
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 3:
        raise ValidationError(f"FMAP data must be (H, W, D), got {data.shape}")
    h, w, d = data.shape
    with open(path, "wb") as f:
        f.write(FMAP_MAGIC)
        f.write(struct.pack("<III", w, h, d))
        f.write(data.astype("<f4").tobytes())


def read_fmap(path):
    """Decode an FMAP container to an (H, W, D) float64 array."""
    with open(path, "rb") as f:
        payload = f.read()
    if len(payload) < 4 or payload[:4] != FMAP_MAGIC:
        raise FormatError(f"{path!r} lacks the FMAP magic", offset=0)
    if len(payload) < 16:
        raise FormatError(f"{path!r} header is truncated", offset=len(payload))
    w, h, d = struct.unpack("<III", payload[4:16])
    expected = 16 + 4 * w * h * d
    if len(payload) != expected:
        raise FormatError(
            f"{path!r} payload has {len(payload) - 16} bytes, expected {expected - 16}",
            offset=min(len(payload), expected),
        )
    flat = np.frombuffer(payload, dtype="<f4", offset=16).astype(np.float64)
    return flat.reshape(h, w, d)


def read_image(path):
    """Load a binary PPM (P6, 8-bit) or an FMAP container as an ImagePlane."""
    with open(path, "rb") as f:
        head = f.read(4)
    if head[:4] == FMAP_MAGIC:
        return ImagePlane(read_fmap(path))
    if head[:2] == b"P6":
        return ImagePlane(_read_ppm(path))
    raise FormatError(f"{path!r} is neither a P6 pixmap nor an FMAP container", offset=0)


def _read_ppm(path):
    with open(path, "rb") as f:
        payload = f.read()
    pos = 2  # past the magic

    def next_token():
        nonlocal pos
        while pos < len(payload):
            c = payload[pos:pos + 1]
            if c == b"#":
                while pos < len(payload) and payload[pos:pos + 1] != b"\n":
                    pos += 1
            elif c.isspace():
                pos += 1
            else:
                break
        start = pos
        while pos < len(payload) and not payload[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise FormatError(f"{path!r} header ended early", offset=start)
        return payload[start:pos], start

    dims = []
    for _ in range(3):
        token, at = next_token()
        if not token.isdigit():
            raise FormatError(f"{path!r} has a malformed header token {token!r}", offset=at)
        dims.append(int(token))
    width, height, maxval = dims
    if not (0 < maxval <= 255):
        raise FormatError(f"{path!r} maxval {maxval} is not 8-bit", offset=pos)
    pos += 1  # single whitespace after maxval
    expected = width * height * 3
    raster = payload[pos:]
    if len(raster) != expected:
        raise FormatError(
            f"{path!r} raster has {len(raster)} bytes, expected {expected}",
            offset=pos + min(len(raster), expected),
        )
    data = np.frombuffer(raster, dtype=np.uint8).astype(np.float64) / maxval
    return data.reshape(height, width, 3)


def write_ppm(image, path):
    """8-bit binary pixmap from an (H, W, 3) image in [0, 1]."""
    data = np.asarray(image.data if isinstance(image, ImagePlane) else image)
    if data.ndim != 3 or data.shape[2] != 3:
        raise ValidationError("PPM output needs (H, W, 3) data")
    scaled = np.clip(np.floor(data * 255.0 + 0.5), 0, 255).astype(np.uint8)
    with open(path, "wb") as f:
        f.write(b"P6\n%d %d\n255\n" % (data.shape[1], data.shape[0]))
        f.write(scaled.tobytes())


def write_pgm(grid, path):
    """8-bit binary graymap from a (H, W) array of values in [0, 1]."""
    grid = np.asarray(grid, dtype=np.float64)
    if grid.ndim != 2:
        raise ValidationError("PGM output needs a 2-D grid")
    scaled = np.clip(np.floor(grid * 255.0 + 0.5), 0, 255).astype(np.uint8)
    with open(path, "wb") as f:
        f.write(b"P5\n%d %d\n255\n" % (grid.shape[1], grid.shape[0]))
        f.write(scaled.tobytes())


# ---------------------------------------------------------------------------
# per-point painted channels (FMAP with H=1, W=N, D=channels)


def write_painted(painted, path):
    painted = np.asarray(painted, dtype=np.float64)
    if painted.ndim != 2:
        raise ValidationError("painted channels must be (N, D)")
    write_fmap(painted[None, :, :], path)


def read_painted(path, expected_count=None):
    data = read_fmap(path)
    if data.shape[0] != 1:
        raise FormatError(f"{path!r} is not a per-point channel file (H != 1)", offset=8)
    painted = data[0]
    if expected_count is not None and painted.shape[0] != expected_count:
        raise FormatError(
            f"{path!r} has {painted.shape[0]} rows for {expected_count} points",
            offset=4,
        )
    return painted


# ---------------------------------------------------------------------------
# model weights (FMAP with H=C, W=d+1: weights then the bias column)


def save_model(params, path):
    stacked = np.concatenate([params.weights, params.bias[:, None]], axis=1)
    write_fmap(stacked[:, :, None], path)


def load_model(path):
    data = read_fmap(path)
    if data.shape[2] != 1 or data.shape[1] < 2:
        raise FormatError(f"{path!r} is not a weight file", offset=8)
    stacked = data[:, :, 0]
    return ModelParams(weights=stacked[:, :-1], bias=stacked[:, -1])


def write_prototypes(prototypes, path):
    """Per-class feature prototypes, one row per class (FMAP, D=1)."""
    prototypes = np.asarray(prototypes, dtype=np.float64)
    if prototypes.ndim != 2:
        raise ValidationError("prototypes must be a (C, K) table")
    write_fmap(prototypes[:, :, None], path)


def read_prototypes(path):
    data = read_fmap(path)
    if data.shape[2] != 1:
        raise FormatError(f"{path!r} is not a prototype table (D != 1)", offset=12)
    return data[:, :, 0]


# ---------------------------------------------------------------------------
# calibration text (P2 intrinsic-projection and Tr extrinsic lines)


def read_calibration(path, image_size):
    """KITTI-style text: `P2: <12 reals>` and `Tr: <12 reals>`, row-major 3x4.

    P2's fourth column is folded into the extrinsic translation (b = K^-1 p4)
    so the result is a plain intrinsic + rigid-transform pair.
    """
    with open(path, "rb") as f:
        raw = f.read()
    text = raw.decode("ascii", errors="replace")
    mats = {}
    offset = 0
    for line in text.splitlines(keepends=True):
        stripped = line.strip()
        if stripped and not stripped.startswith("#"):
            key, sep, rest = stripped.partition(":")
            key = key.strip()
            if sep and key in ("P2", "Tr"):
                values = rest.split()
                if len(values) != 12:
                    raise FormatError(
                        f"calibration {path!r} line {key!r} needs 12 values, got {len(values)}",
                        offset=offset,
                    )
                try:
                    mats[key] = np.array([float(v) for v in values]).reshape(3, 4)
                except ValueError:
                    raise FormatError(
                        f"calibration {path!r} line {key!r} has a non-numeric value",
                        offset=offset,
                    )
        offset += len(line.encode("utf-8", errors="replace"))
    for key in ("P2", "Tr"):
        if key not in mats:
            raise FormatError(f"calibration {path!r} lacks a {key!r} line", offset=len(raw))
    p2 = mats["P2"]
    intrinsic = p2[:, :3]
    try:
        extra = np.linalg.solve(intrinsic, p2[:, 3])
    except np.linalg.LinAlgError:
        raise FormatError(f"calibration {path!r} P2 intrinsic block is singular", offset=0)
    extrinsic = np.eye(4)
    extrinsic[:3, :4] = mats["Tr"]
    extrinsic[:3, 3] += extra
    return CalibrationParams(intrinsic=intrinsic, extrinsic=extrinsic, image_size=image_size)


def write_calibration(calib, path):
    p2 = np.concatenate([calib.intrinsic, np.zeros((3, 1))], axis=1)
    tr = calib.extrinsic[:3, :4]
    with open(path, "w") as f:
        f.write("P2: " + " ".join(repr(float(v)) for v in p2.ravel()) + "\n")
        f.write("Tr: " + " ".join(repr(float(v)) for v in tr.ravel()) + "\n")


# ---------------------------------------------------------------------------
# scene templates ([scene] section plus one section per primitive)


def _parse_vector(text, n, where):
    parts = text.replace(",", " ").split()
    if len(parts) != n:
        raise ValidationError(f"{where} needs {n} numbers, got {text!r}")
    return tuple(float(p) for p in parts)


def read_scene_template(path):
    """Scene description: a [scene] section (sensor_height, azimuth_steps,
    max_range, seed, jitter, beams_deg) and [ground*]/[box*]/[cylinder*]
    sections for the primitives. Angles in the file are degrees."""
    parser = configparser.ConfigParser(interpolation=None, delimiters=("=",))
    try:
        with open(path) as f:
            parser.read_file(f)
    except configparser.Error as exc:
        raise FormatError(f"scene template {path!r}: {exc}", offset=0)
    if "scene" not in parser:
        raise FormatError(f"scene template {path!r} lacks a [scene] section", offset=0)
    scene = parser["scene"]
    try:
        beams_deg = [float(v) for v in scene.get("beams_deg", "").replace(",", " ").split()]
        if not beams_deg:
            raise ValidationError("beams_deg is empty")
        prims = []
        for name in parser.sections():
            if name == "scene":
                continue
            section = parser[name]
            kind = name.split()[0].lower()
            cid = section.getint("class")
            if kind == "ground":
                prims.append(GroundPlane(class_id=cid, z=section.getfloat("z", 0.0)))
            elif kind == "box":
                prims.append(BoxPrim(
                    class_id=cid,
                    center=_parse_vector(section.get("center"), 3, f"[{name}] center"),
                    extents=_parse_vector(section.get("extents"), 3, f"[{name}] extents"),
                ))
            elif kind == "cylinder":
                prims.append(CylinderPrim(
                    class_id=cid,
                    center=_parse_vector(section.get("center"), 3, f"[{name}] center"),
                    radius=section.getfloat("radius"),
                    height=section.getfloat("height"),
                ))
            else:
                raise ValidationError(f"unknown primitive section [{name}]")
        spec = SceneSpec(
            sensor_height=scene.getfloat("sensor_height", 1.8),
            beam_inclinations=np.deg2rad(beams_deg),
            azimuth_steps=scene.getint("azimuth_steps", 720),
            primitives=prims,
            max_range=scene.getfloat("max_range", 80.0),
            seed=scene.getint("seed", 0),
            jitter=_parse_vector(scene.get("jitter", "0 0 0"), 3, "jitter"),
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ValidationError):
            raise
        raise FormatError(f"scene template {path!r}: {exc}", offset=0)
    return spec


def write_scene_template(spec, path):
    lines = [
        "[scene]",
        f"sensor_height = {float(spec.sensor_height)!r}",
        f"azimuth_steps = {spec.azimuth_steps}",
        f"max_range = {float(spec.max_range)!r}",
        f"seed = {spec.seed}",
        "jitter = " + " ".join(repr(float(v)) for v in np.atleast_1d(spec.jitter)),
        "beams_deg = " + " ".join(repr(float(v)) for v in np.rad2deg(spec.beam_inclinations)),
        "",
    ]
    counters = {"ground": 0, "box": 0, "cylinder": 0}
    for prim in spec.primitives:
        if isinstance(prim, GroundPlane):
            counters["ground"] += 1
            lines += [f"[ground {counters['ground']}]", f"class = {prim.class_id}",
                      f"z = {float(prim.z)!r}", ""]
        elif isinstance(prim, BoxPrim):
            counters["box"] += 1
            lines += [
                f"[box {counters['box']}]",
                f"class = {prim.class_id}",
                "center = " + " ".join(repr(float(v)) for v in prim.center),
                "extents = " + " ".join(repr(float(v)) for v in prim.extents),
                "",
            ]
        else:
            counters["cylinder"] += 1
            lines += [
                f"[cylinder {counters['cylinder']}]",
                f"class = {prim.class_id}",
                "center = " + " ".join(repr(float(v)) for v in prim.center),
                f"radius = {float(prim.radius)!r}",
                f"height = {float(prim.height)!r}",
                "",
            ]
    with open(path, "w") as f:
        f.write("\n".join(lines))


# ---------------------------------------------------------------------------
# training configuration (flat key=value text)

_CONFIG_KEYS = {
    "num_classes": int,
    "ratio": float,
    "split": str,
    "strategy": str,
    "m_min": int,
    "m_max": int,
    "threshold": float,
    "ema": float,
    "lr": float,
    "epochs": int,
    "seed": int,
    "phi_min_deg": float,
    "phi_max_deg": float,
    "weight.mix": float,
    "weight.mt": float,
    "weight.c2l": float,
    "weight.lkg": float,
}


def read_train_config(path):
    """Flat `key = value` lines; '#' starts a comment. Unknown keys are
    rejected with their byte offset. Angles are degrees in the file."""
    with open(path, "rb") as f:
        raw = f.read()
    values = {}
    offset = 0
    for line in raw.decode("utf-8", errors="replace").splitlines(keepends=True):
        stripped = line.split("#", 1)[0].strip()
        if stripped:
            key, sep, val = stripped.partition("=")
            key = key.strip()
            val = val.strip()
            if not sep or not key:
                raise FormatError(f"config {path!r}: malformed line {stripped!r}", offset=offset)
            if key not in _CONFIG_KEYS:
                raise FormatError(f"config {path!r}: unknown key {key!r}", offset=offset)
            try:
                values[key] = _CONFIG_KEYS[key](val)
            except ValueError:
                raise FormatError(f"config {path!r}: bad value for {key!r}", offset=offset)
        offset += len(line.encode("utf-8", errors="replace"))
    weights = LossWeights(
        lambda_mix=values.pop("weight.mix", 2.0),
        lambda_mt=values.pop("weight.mt", 250.0),
        lambda_c2l=values.pop("weight.c2l", 1.5),
        lambda_lkg=values.pop("weight.lkg", 1.0),
    )
    phi_min = values.pop("phi_min_deg", None)
    phi_max = values.pop("phi_max_deg", None)
    config = TrainConfig(
        num_classes=values.pop("num_classes", 4),
        weights=weights,
        phi_min=None if phi_min is None else float(np.deg2rad(phi_min)),
        phi_max=None if phi_max is None else float(np.deg2rad(phi_max)),
        **values,
    )
    return config


def write_train_config(config, path):
    lines = [
        f"num_classes = {config.num_classes}",
        f"ratio = {float(config.ratio)!r}",
        f"split = {config.split}",
        f"strategy = {config.strategy}",
        f"m_min = {config.m_min}",
        f"m_max = {config.m_max}",
        f"threshold = {float(config.threshold)!r}",
        f"ema = {float(config.ema)!r}",
        f"lr = {float(config.lr)!r}",
        f"epochs = {config.epochs}",
        f"seed = {config.seed}",
        f"weight.mix = {float(config.weights.lambda_mix)!r}",
        f"weight.mt = {float(config.weights.lambda_mt)!r}",
        f"weight.c2l = {float(config.weights.lambda_c2l)!r}",
        f"weight.lkg = {float(config.weights.lambda_lkg)!r}",
    ]
    if config.phi_min is not None:
        lines.append(f"phi_min_deg = {float(np.rad2deg(config.phi_min))!r}")
        lines.append(f"phi_max_deg = {float(np.rad2deg(config.phi_max))!r}")
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# CSV reports


def write_provenance_csv(mix_output, path):
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["output", "index", "source"])
        for tag, prov in (("a", mix_output.provenance_a), ("b", mix_output.provenance_b)):
            for i, src in enumerate(prov):
                writer.writerow([tag, i, "a" if src == 0 else "b"])


def write_prior_report_csv(report, path):
    m = report.area_distributions.shape[1]
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["class", "proportion"] + [f"area_{k}" for k in range(m)])
        for c in range(report.class_proportions.size):
            writer.writerow(
                [f"class_{c}", repr(float(report.class_proportions[c]))]
                + [repr(float(v)) for v in report.area_distributions[c]]
            )


def write_loss_log_csv(reports, path):
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["epoch", "sup", "mix", "mt", "c2l", "lkg", "total"])
        for epoch, r in enumerate(reports):
            writer.writerow([epoch] + [repr(float(v))
                                       for v in (r.sup, r.mix, r.mt, r.c2l, r.lkg, r.total)])


def write_eval_csv(result, path):
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["class", "iou"])
        for c, iou in enumerate(result.per_class_iou):
            writer.writerow([f"class_{c}", "" if np.isnan(iou) else repr(float(iou))])
        writer.writerow(["miou", repr(float(result.miou))])
        writer.writerow(["macc", repr(float(result.macc))])


def write_correspondence_csv(corr, path):
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["index", "u", "v", "mask", "depth"])
        for i in range(corr.pixel_coords.shape[0]):
            writer.writerow([
                i,
                repr(float(corr.pixel_coords[i, 0])),
                repr(float(corr.pixel_coords[i, 1])),
                int(corr.mask[i]),
                repr(float(corr.depth[i])),
            ])


# ---------------------------------------------------------------------------
# dataset directories


def list_scan_stems(directory):
    """Sorted stems of the .bin scans in a directory (lexicographic)."""
    stems = [name[:-4] for name in os.listdir(directory) if name.endswith(".bin")]
    return sorted(stems)


def load_dataset(directory, with_painted=False):
    """Load every scan in a directory (sorted by name) with label and, when
    requested, painted-channel sidecars."""
    clouds = []
    for stem in list_scan_stems(directory):
        scan_path = os.path.join(directory, stem + ".bin")
        label_path = os.path.join(directory, stem + ".label")
        cloud = read_scan(scan_path, label_path if os.path.exists(label_path) else None)
        if with_painted:
            painted_path = os.path.join(directory, stem + ".fmap")
            if not os.path.exists(painted_path):
                raise ValidationError(f"missing painted sidecar {painted_path!r}")
            cloud = cloud.with_painted(read_painted(painted_path, expected_count=len(cloud)))
        clouds.append(cloud)
    return clouds


def save_dataset(clouds, directory, with_painted=False):
    os.makedirs(directory, exist_ok=True)
    for i, cloud in enumerate(clouds):
        stem = os.path.join(directory, f"{i:06d}")
        write_scan(cloud, stem + ".bin",
                   stem + ".label" if cloud.labels is not None else None)
        if with_painted:
            if cloud.painted is None:
                raise ValidationError("cloud has no painted channels to save")
            write_painted(cloud.painted, stem + ".fmap")
