"""End-to-end acceptance checks, one test per shipping criterion.

Each test prints a single `ACCEPTANCE <name>: PASS` line on success (visible
with -s or in captured output) and enforces its stated tolerance and runtime
budget. These are intentionally redundant with the unit suites: this file is
the contract, the unit files are the diagnostics.
"""

import math
import struct
import time

import numpy as np
import pytest

from lasermixkit import (
    CalibrationParams,
    FormatError,
    GridPartition,
    ModelParams,
    PointCloud,
    TrainConfig,
    assign_areas,
    assign_grid_areas,
    azimuth,
    class_area_distribution,
    cross_entropy_loss,
    cutmix_area,
    cutout_area,
    ema_update,
    grid_mix,
    inclination,
    label_entropy_given_areas,
    laser_mix,
    lkg_loss,
    make_inclination_partition,
    mean_teacher_loss,
    point_mixup,
    project_points,
    scene_concat,
    softmax,
)
from lasermixkit import io as lio
from lasermixkit.cli import main as cli_main
from lasermixkit.model import ProjectionHead, c2l_loss
from lasermixkit.simulate import (
    default_prototypes,
    default_scene_template,
    make_benchmark,
    paint_benchmark,
)
from lasermixkit.train import PrototypeScoreProvider, run_semi_supervised
from conftest import random_cloud


def report(name, elapsed=None):
    suffix = f" ({elapsed:.1f}s)" if elapsed is not None else ""
    print(f"ACCEPTANCE {name}: PASS{suffix}")


def record_rows(cloud):
    return np.column_stack([
        cloud.coords,
        cloud.intensity,
        cloud.labels.astype(np.float64),
    ])


def sorted_rows(rows):
    return rows[np.lexsort(rows.T[::-1])]


def same_multiset(rows_x, rows_y):
    if rows_x.shape != rows_y.shape:
        return False
    return np.array_equal(sorted_rows(rows_x), sorted_rows(rows_y))


def test_conservation_and_involution():
    t0 = time.perf_counter()
    rng = np.random.default_rng(1000)
    part = make_inclination_partition(-0.4, 0.3, 5)
    grid = GridPartition(inclination_bounds=part.bounds, azimuth_count=4)
    for trial in range(1000):
        a = random_cloud(rng, int(rng.integers(40, 160)))
        b = random_cloud(rng, int(rng.integers(40, 160)))
        pool = np.vstack([record_rows(a), record_rows(b)])

        mix = laser_mix(a, b, part)
        out = np.vstack([record_rows(mix.mixed_a), record_rows(mix.mixed_b)])
        assert same_multiset(out, pool)

        # double application with the same partition restores the originals
        back = laser_mix(mix.mixed_a, mix.mixed_b, part)
        assert same_multiset(record_rows(back.mixed_a), record_rows(a))
        assert same_multiset(record_rows(back.mixed_b), record_rows(b))

        for other in (
            grid_mix(a, b, grid),
            point_mixup(a, b, 0.5, seed=trial),
            cutmix_area(a, b, seed=trial),
        ):
            out = np.vstack([record_rows(other.mixed_a), record_rows(other.mixed_b)])
            assert same_multiset(out, pool)

        both = record_rows(scene_concat(a, b))
        assert same_multiset(both, pool)

        halves = np.vstack([
            record_rows(cutout_area(a, part, "even")),
            record_rows(cutout_area(a, part, "odd")),
        ])
        assert same_multiset(halves, record_rows(a))
    elapsed = time.perf_counter() - t0
    assert elapsed < 30.0
    report("conservation-involution", elapsed)


def test_partition_oracle():
    rng = np.random.default_rng(1001)
    n = 10_000
    coords = rng.uniform(-40.0, 40.0, size=(n, 3))
    bounds = np.sort(rng.uniform(-1.2, 1.2, size=7))
    part = make_inclination_partition(bounds[0], bounds[-1], 6)
    grid = GridPartition(inclination_bounds=part.bounds, azimuth_count=5)
    cloud = PointCloud(coords=coords, intensity=np.zeros(n))

    got_beam = assign_areas(cloud, part)
    got_grid = assign_grid_areas(cloud, grid)

    width = 2.0 * math.pi / grid.azimuth_count
    mismatches = 0
    for i in range(n):
        x, y, z = coords[i]
        phi = math.atan2(z, math.hypot(x, y))
        area = part.bounds.size - 2
        for k in range(part.bounds.size - 1):
            if part.bounds[k] <= phi < part.bounds[k + 1]:
                area = k
                break
        else:
            if phi < part.bounds[0]:
                area = 0
        if got_beam[i] != area:
            mismatches += 1

        alpha = math.atan2(y, x)
        if alpha == math.pi:
            alpha = -math.pi
        sector = min(int(math.floor((alpha + math.pi) / width)),
                     grid.azimuth_count - 1)
        if got_grid[i] != sector * part.num_areas + area:
            mismatches += 1
    assert mismatches == 0
    report("partition-oracle")


def rotation_from_quaternion(q):
    w, x, y, z = q / np.linalg.norm(q)
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def test_projection_contract():
    # hand case 1: principal ray of an axis-aligned camera
    k = np.array([[100.0, 0.0, 64.0], [0.0, 100.0, 32.0], [0.0, 0.0, 1.0]])
    calib = CalibrationParams(intrinsic=k, extrinsic=np.eye(4), image_size=(128, 64))
    corr = project_points(PointCloud(coords=np.array([[0.0, 0.0, 2.0]]),
                                     intensity=np.zeros(1)), calib)
    assert corr.mask[0] == 1
    assert np.abs(corr.pixel_coords[0] - [64.0, 32.0]).max() <= 1e-6

    # hand case 2: camera looking down +x (right=-y, down=-z, forward=+x)
    ext = np.eye(4)
    ext[:3, :3] = [[0.0, -1.0, 0.0], [0.0, 0.0, -1.0], [1.0, 0.0, 0.0]]
    calib = CalibrationParams(intrinsic=k, extrinsic=ext, image_size=(128, 64))
    corr = project_points(PointCloud(coords=np.array([[10.0, 0.0, 0.0]]),
                                     intensity=np.zeros(1)), calib)
    assert corr.mask[0] == 1
    assert np.abs(corr.pixel_coords[0] - [64.0, 32.0]).max() <= 1e-6

    rng = np.random.default_rng(1002)
    total = 0
    while total < 10_000:
        w, h = int(rng.integers(4, 300)), int(rng.integers(4, 200))
        ext = np.eye(4)
        ext[:3, :3] = rotation_from_quaternion(rng.normal(size=4))
        ext[:3, 3] = rng.normal(size=3) * 3
        k = np.array([
            [rng.uniform(10, 400), 0.0, rng.uniform(0, w)],
            [0.0, rng.uniform(10, 400), rng.uniform(0, h)],
            [0.0, 0.0, 1.0],
        ])
        calib = CalibrationParams(intrinsic=k, extrinsic=ext, image_size=(w, h))
        pts = rng.normal(size=(250, 3)) * rng.uniform(0.5, 20)
        corr = project_points(PointCloud(coords=pts, intensity=np.zeros(250)), calib)
        on = corr.mask.astype(bool)
        assert np.all(corr.depth[on] > 0.0)
        assert np.all(corr.pixel_coords[on, 0] >= 0.0)
        assert np.all(corr.pixel_coords[on, 0] < w)
        assert np.all(corr.pixel_coords[on, 1] >= 0.0)
        assert np.all(corr.pixel_coords[on, 1] < h)
        total += 250
    report("projection-contract")


def test_entropy_suite():
    for c in (2, 3, 5, 11):
        labels = np.repeat(np.arange(c), 7)
        marginal, _ = label_entropy_given_areas(labels, np.zeros(labels.size, np.int64), 1, c)
        assert abs(marginal - math.log(c)) <= 1e-9

    marginal, conditional = label_entropy_given_areas(
        np.full(64, 2, np.int64), np.arange(64) % 4, 4, 5)
    assert marginal == 0.0 and conditional == 0.0

    rng = np.random.default_rng(1003)
    for _ in range(100):
        n = int(rng.integers(5, 600))
        c = int(rng.integers(2, 7))
        m = int(rng.integers(1, 9))
        labels = rng.integers(0, c, size=n)
        areas = rng.integers(0, m, size=n)
        marginal, conditional = label_entropy_given_areas(labels, areas, m, c)
        assert conditional <= marginal + 1e-12

    marginal, conditional = label_entropy_given_areas(
        np.array([0, 1, 2, 2]), np.array([0, 0, 1, 1]), 2, 3)
    assert abs(marginal - 1.0397) <= 1e-3
    assert abs(conditional - 0.3466) <= 1e-3
    report("entropy-suite")


FD_STEP = 1e-5


def fd_grad(f, x, step=FD_STEP):
    grad = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    while not it.finished:
        idx = it.multi_index
        up = x.copy(); up[idx] += step
        dn = x.copy(); dn[idx] -= step
        grad[idx] = (f(up) - f(dn)) / (2 * step)
        it.iternext()
    return grad


def rel_err(a, b):
    denom = max(np.abs(a).max(), np.abs(b).max(), 1e-8)
    return np.abs(a - b).max() / denom


def test_gradient_suite():
    t0 = time.perf_counter()
    rng = np.random.default_rng(1004)
    for _ in range(100):
        n, c = int(rng.integers(2, 8)), int(rng.integers(2, 5))
        logits = rng.normal(size=(n, c)) * 2
        labels = rng.integers(0, c, size=n)
        _, grad = cross_entropy_loss(softmax(logits), labels)
        fd = fd_grad(lambda lg: cross_entropy_loss(softmax(lg), labels)[0], logits)
        assert rel_err(grad, fd) <= 1e-4

    for _ in range(100):
        n, c = int(rng.integers(1, 8)), int(rng.integers(2, 5))
        logits = rng.normal(size=(n, c))
        teacher = softmax(rng.normal(size=(n, c)))
        _, grad = mean_teacher_loss(softmax(logits), teacher)
        fd = fd_grad(lambda lg: mean_teacher_loss(softmax(lg), teacher)[0], logits)
        assert rel_err(grad, fd) <= 1e-4

    for _ in range(100):
        n, d, k = int(rng.integers(2, 6)), int(rng.integers(2, 5)), int(rng.integers(2, 4))
        feats = rng.normal(size=(n, d))
        painted = rng.normal(size=(n, k))
        mask = (rng.random(n) < 0.8).astype(np.uint8)
        if mask.sum() == 0:
            mask[0] = 1
        head = ProjectionHead(matrix=rng.normal(size=(k, d)))
        _, grad_m = c2l_loss(head, feats, painted, mask)
        fd = fd_grad(
            lambda m: c2l_loss(ProjectionHead(matrix=m), feats, painted, mask)[0],
            head.matrix)
        assert rel_err(grad_m, fd) <= 1e-4

    for _ in range(100):
        n, c = int(rng.integers(2, 7)), int(rng.integers(2, 5))
        logits = rng.normal(size=(n, c)) + 0.3
        scores = rng.normal(size=(n, c))
        mask = (rng.random(n) < 0.8).astype(np.uint8)
        if mask.sum() == 0:
            mask[0] = 1
        _, grad = lkg_loss(logits, scores, mask)
        fd = fd_grad(lambda lg: lkg_loss(lg, scores, mask)[0], logits)
        assert rel_err(grad, fd) <= 1e-4

    elapsed = time.perf_counter() - t0
    assert elapsed < 60.0
    report("gradient-suite", elapsed)


def test_ema_exactness():
    rng = np.random.default_rng(1005)
    alpha = 0.99
    student = ModelParams(weights=rng.normal(size=(4, 7)), bias=rng.normal(size=4))
    teacher = ModelParams(weights=rng.normal(size=(4, 7)), bias=rng.normal(size=4))
    gap_w = teacher.weights - student.weights
    gap_b = teacher.bias - student.bias
    for k in range(1, 101):
        teacher = ema_update(teacher, student, alpha)
        assert np.allclose(teacher.weights - student.weights, alpha ** k * gap_w,
                           rtol=0.0, atol=1e-14)
        assert np.allclose(teacher.bias - student.bias, alpha ** k * gap_b,
                           rtol=0.0, atol=1e-14)
    report("ema-exactness")


def test_spatial_prior_reproduction():
    t0 = time.perf_counter()
    template = default_scene_template()
    assert template.beam_inclinations.size >= 8
    clouds = make_benchmark(template, 20, seed=0)
    phi = np.concatenate([inclination(c.coords) for c in clouds])
    part = make_inclination_partition(phi.min(), phi.max(), 8)
    num_classes = int(max(c.labels.max() for c in clouds)) + 1
    assert num_classes >= 4
    rep = class_area_distribution(clouds, part, num_classes)
    assert rep.conditional_entropy < rep.marginal_entropy - 0.1
    elapsed = time.perf_counter() - t0
    assert elapsed < 60.0
    report("spatial-prior", elapsed)


def test_desk_scale_ssl_uplift():
    t0 = time.perf_counter()
    template = default_scene_template()
    train = make_benchmark(template, 200, seed=0)
    val = make_benchmark(template, 50, seed=10_000)
    train_p = paint_benchmark(train, camera_height=template.sensor_height, seed=0)
    val_p = paint_benchmark(val, camera_height=template.sensor_height, seed=1)
    provider = PrototypeScoreProvider(default_prototypes())

    miou = {"sup_only": [], "lasermix": [], "lasermix_pp": []}
    for seed in range(5):
        for strategy in miou:
            cfg = TrainConfig(num_classes=4, ratio=0.05, split="uniform",
                              strategy=strategy, threshold=0.9, ema=0.99,
                              seed=seed)
            if strategy == "lasermix_pp":
                result = run_semi_supervised(train_p, cfg, val_clouds=val_p,
                                             lkg_provider=provider)
            else:
                result = run_semi_supervised(train, cfg, val_clouds=val)
            miou[strategy].append(result.val_metrics.miou * 100.0)

    sup = float(np.mean(miou["sup_only"]))
    lmix = float(np.mean(miou["lasermix"]))
    lmpp = float(np.mean(miou["lasermix_pp"]))
    elapsed = time.perf_counter() - t0
    print(f"  sup_only {sup:.2f}  lasermix {lmix:.2f}  lasermix_pp {lmpp:.2f}")
    assert lmix >= sup + 2.0
    assert lmpp >= lmix - 0.5
    assert elapsed < 600.0
    report("ssl-uplift", elapsed)


def test_determinism(tmp_path):
    rng = np.random.default_rng(1006)
    a = random_cloud(rng, 180)
    b = random_cloud(rng, 140)
    lio.write_scan(a, tmp_path / "a.bin", tmp_path / "a.label")
    lio.write_scan(b, tmp_path / "b.bin", tmp_path / "b.label")
    mix_bytes = []
    for run in ("m1", "m2"):
        out = tmp_path / run
        code = cli_main(["mix", str(tmp_path / "a.bin"), str(tmp_path / "b.bin"),
                         str(out), "--labels-a", str(tmp_path / "a.label"),
                         "--labels-b", str(tmp_path / "b.label"),
                         "--strategy", "cutmix", "--seed", "21"])
        assert code == 0
        blob = b"".join(sorted(p.read_bytes() for p in out.iterdir()))
        mix_bytes.append(blob)
    assert mix_bytes[0] == mix_bytes[1]

    data = tmp_path / "data"
    assert cli_main(["synth", str(data), "--scenes", "8", "--seed", "7"]) == 0
    cfg = tmp_path / "cfg.txt"
    cfg.write_text("num_classes = 4\nratio = 0.25\nepochs = 2\nseed = 11\n")
    train_bytes = []
    for run in ("t1", "t2"):
        out = tmp_path / run
        assert cli_main(["train", str(cfg), str(data), str(out)]) == 0
        train_bytes.append((out / "teacher.fmap").read_bytes()
                           + (out / "loss_log.csv").read_bytes())
    assert train_bytes[0] == train_bytes[1]
    report("determinism")


def test_io_round_trips(tmp_path):
    # scan fixture: two full records
    scan_bytes = struct.pack("<8f", 1.5, -2.25, 0.5, 0.25, 4.0, 0.0, -1.0, 1.0)
    (tmp_path / "fix.bin").write_bytes(scan_bytes)
    label_bytes = struct.pack("<2I", (9 << 16) | 2, 1)
    (tmp_path / "fix.label").write_bytes(label_bytes)
    cloud = lio.read_scan(tmp_path / "fix.bin", tmp_path / "fix.label")
    assert cloud.labels.tolist() == [2, 1]
    lio.write_scan(cloud, tmp_path / "back.bin", tmp_path / "back.label")
    assert (tmp_path / "back.bin").read_bytes() == scan_bytes
    # the instance-id high bits are dropped on read, so only the semantic
    # half survives the round trip
    assert (tmp_path / "back.label").read_bytes() == struct.pack("<2I", 2, 1)

    fmap_bytes = (b"FMAP" + struct.pack("<3I", 3, 2, 1)
                  + struct.pack("<6f", *range(6)))
    (tmp_path / "fix.fmap").write_bytes(fmap_bytes)
    arr = lio.read_fmap(tmp_path / "fix.fmap")
    assert arr.shape == (2, 3, 1)
    lio.write_fmap(arr, tmp_path / "back.fmap")
    assert (tmp_path / "back.fmap").read_bytes() == fmap_bytes

    (tmp_path / "trunc.bin").write_bytes(scan_bytes[:20])
    with pytest.raises(FormatError) as err:
        lio.read_scan(tmp_path / "trunc.bin")
    assert err.value.offset == 16

    (tmp_path / "magic.fmap").write_bytes(b"XMAP" + fmap_bytes[4:])
    with pytest.raises(FormatError) as err:
        lio.read_fmap(tmp_path / "magic.fmap")
    assert err.value.offset == 0

    (tmp_path / "short.label").write_bytes(struct.pack("<I", 3))
    with pytest.raises(FormatError) as err:
        lio.read_labels(tmp_path / "short.label", expected_count=2)
    assert err.value.offset == 4
    report("io-round-trips")
