"""Boundary contract and cross-component equivalence for the bindings."""

import numpy as np
import pytest

bridge = pytest.importorskip("lasermix_bridge")
import lasermixkit
from lasermixkit import io as lio
from lasermixkit.cli import main as cli_main


def f32(rows):
    return np.asarray(rows, dtype=np.float32)


def i32(values):
    return np.asarray(values, dtype=np.int32)


def random_inputs(rng, n):
    coords = f32(rng.uniform(-20, 20, size=(n, 3)))
    intensity = f32(rng.random(n))
    labels = i32(rng.integers(0, 4, size=n))
    return coords, intensity, labels


def sorted_rows(rows):
    return rows[np.lexsort(rows.T[::-1])]


# --- round trip and equivalence against the core --------------------------


def test_round_trip_preserves_values_bit_exactly():
    rng = np.random.default_rng(0)
    ca, ia, la = random_inputs(rng, 120)
    cb, ib, lb = random_inputs(rng, 90)
    out = bridge.laser_mix(ca, cb, intensity_a=ia, intensity_b=ib,
                           labels_a=la, labels_b=lb, areas=5)
    pool_in = np.vstack([
        np.column_stack([ca, ia, la.astype(np.float32)]),
        np.column_stack([cb, ib, lb.astype(np.float32)]),
    ])
    pool_out = np.vstack([
        np.column_stack([out.coords_a, out.intensity_a, out.labels_a.astype(np.float32)]),
        np.column_stack([out.coords_b, out.intensity_b, out.labels_b.astype(np.float32)]),
    ])
    assert np.array_equal(sorted_rows(pool_out), sorted_rows(pool_in))


def test_laser_mix_matches_core_bitwise():
    rng = np.random.default_rng(1)
    ca, ia, la = random_inputs(rng, 80)
    cb, ib, lb = random_inputs(rng, 75)
    out = bridge.laser_mix(ca, cb, intensity_a=ia, intensity_b=ib,
                           labels_a=la, labels_b=lb, areas=4,
                           phi_min=-60.0, phi_max=60.0)

    part = lasermixkit.make_inclination_partition(np.deg2rad(-60.0), np.deg2rad(60.0), 4)
    a = lasermixkit.PointCloud(coords=ca, intensity=ia, labels=la)
    b = lasermixkit.PointCloud(coords=cb, intensity=ib, labels=lb)
    want = lasermixkit.laser_mix(a, b, part)

    assert np.array_equal(out.coords_a, want.mixed_a.coords.astype(np.float32))
    assert np.array_equal(out.intensity_b, want.mixed_b.intensity.astype(np.float32))
    assert np.array_equal(out.labels_a, want.mixed_a.labels.astype(np.int32))
    assert np.array_equal(out.provenance_a, want.provenance_a.astype(np.int32))
    assert np.array_equal(out.provenance_b, want.provenance_b.astype(np.int32))


def test_multi_modal_matches_core_bitwise():
    rng = np.random.default_rng(2)
    ca, ia, la = random_inputs(rng, 60)
    cb, ib, lb = random_inputs(rng, 50)
    pa = f32(rng.random((60, 4)))
    pb = f32(rng.random((50, 4)))
    out = bridge.multi_modal_laser_mix(ca, pa, cb, pb, intensity_a=ia,
                                       intensity_b=ib, labels_a=la, labels_b=lb,
                                       areas=3)
    a = lasermixkit.PointCloud(coords=ca, intensity=ia, labels=la, painted=pa)
    b = lasermixkit.PointCloud(coords=cb, intensity=ib, labels=lb, painted=pb)
    pooled = np.concatenate([lasermixkit.inclination(a.coords),
                             lasermixkit.inclination(b.coords)])
    part = lasermixkit.make_inclination_partition(pooled.min(), pooled.max(), 3)
    want = lasermixkit.multi_modal_laser_mix(a, b, part)
    assert np.array_equal(out.painted_a, want.mixed_a.painted.astype(np.float32))
    assert np.array_equal(out.painted_b, want.mixed_b.painted.astype(np.float32))


def test_assign_areas_matches_core():
    rng = np.random.default_rng(3)
    coords = f32(rng.uniform(-10, 10, size=(500, 3)))
    got = bridge.assign_areas(coords, areas=7, phi_min=-50.0, phi_max=50.0)
    part = lasermixkit.make_inclination_partition(np.deg2rad(-50.0), np.deg2rad(50.0), 7)
    want = lasermixkit.assign_areas(lasermixkit.PointCloud(
        coords=coords, intensity=np.zeros(500)), part)
    assert got.dtype == np.int32
    assert np.array_equal(got, want.astype(np.int32))


def test_projection_matches_core_bitwise():
    rng = np.random.default_rng(4)
    coords = f32(rng.normal(size=(300, 3)) * 6)
    k = np.array([[90.0, 0.0, 40.0], [0.0, 90.0, 30.0], [0.0, 0.0, 1.0]])
    proj = bridge.project_points(coords, intrinsic=k, extrinsic=np.eye(4),
                                 image_size=(80, 60))
    calib = lasermixkit.CalibrationParams(intrinsic=k, extrinsic=np.eye(4),
                                          image_size=(80, 60))
    want = lasermixkit.project_points(lasermixkit.PointCloud(
        coords=coords, intensity=np.zeros(300)), calib)
    assert np.array_equal(proj.pixel_coords, want.pixel_coords.astype(np.float32))
    assert np.array_equal(proj.mask, want.mask.astype(np.int32))
    assert np.array_equal(proj.depth, want.depth.astype(np.float32))


def test_paint_points_matches_core_bitwise():
    rng = np.random.default_rng(5)
    coords = f32(rng.normal(size=(200, 3)) * 4)
    image = f32(rng.random((60, 80, 3)))
    k = np.array([[90.0, 0.0, 40.0], [0.0, 90.0, 30.0], [0.0, 0.0, 1.0]])
    painted = bridge.paint_points(coords, image, intrinsic=k, extrinsic=np.eye(4))
    assert painted.shape == (200, 4)

    cloud = lasermixkit.PointCloud(coords=coords, intensity=np.zeros(200))
    calib = lasermixkit.CalibrationParams(intrinsic=k, extrinsic=np.eye(4),
                                          image_size=(80, 60))
    corr = lasermixkit.project_points(cloud, calib)
    want = lasermixkit.paint_points(cloud, lasermixkit.ImagePlane(image), corr)
    assert np.array_equal(painted, want.painted.astype(np.float32))


# --- cross-component oracle: the CLI on shared fixtures --------------------


def test_laser_mix_four_point_example_matches_cli(tmp_path):
    # bounds {0, 30, 60} degrees; P,Q in scan_a and R,S in scan_b land in
    # areas 0,1,0,1, so mixed_a = {P, S} and mixed_b = {R, Q}
    ca = f32([[1.0, 0.0, 0.1], [1.0, 0.0, 1.0]])
    cb = f32([[2.0, 0.0, 0.2], [1.0, 0.0, 0.9]])
    ia = f32([0.25, 0.5])
    ib = f32([0.75, 1.0])
    la = i32([1, 2])
    lb = i32([3, 0])
    out = bridge.laser_mix(ca, cb, intensity_a=ia, intensity_b=ib,
                           labels_a=la, labels_b=lb, areas=2,
                           phi_min=0.0, phi_max=60.0)
    assert np.array_equal(out.coords_a, f32([[1.0, 0.0, 0.1], [1.0, 0.0, 0.9]]))
    assert np.array_equal(out.coords_b, f32([[1.0, 0.0, 1.0], [2.0, 0.0, 0.2]]))

    lio.write_scan(lasermixkit.PointCloud(coords=ca, intensity=ia, labels=la),
                   tmp_path / "a.bin", tmp_path / "a.label")
    lio.write_scan(lasermixkit.PointCloud(coords=cb, intensity=ib, labels=lb),
                   tmp_path / "b.bin", tmp_path / "b.label")
    assert cli_main(["mix", str(tmp_path / "a.bin"), str(tmp_path / "b.bin"),
                     str(tmp_path / "out"), "--labels-a", str(tmp_path / "a.label"),
                     "--labels-b", str(tmp_path / "b.label"), "--areas", "2",
                     "--phi-min", "0", "--phi-max", "60"]) == 0

    for tag, coords, intensity, labels in (
        ("a", out.coords_a, out.intensity_a, out.labels_a),
        ("b", out.coords_b, out.intensity_b, out.labels_b),
    ):
        records = np.column_stack([coords, intensity]).astype(np.float32)
        assert (tmp_path / "out" / f"mixed_{tag}.bin").read_bytes() == records.tobytes()
        label_bytes = labels.astype(np.uint32).tobytes()
        assert (tmp_path / "out" / f"mixed_{tag}.label").read_bytes() == label_bytes


def test_default_partition_matches_cli_default(tmp_path):
    rng = np.random.default_rng(6)
    ca, ia, la = random_inputs(rng, 64)
    cb, ib, lb = random_inputs(rng, 64)
    out = bridge.laser_mix(ca, cb, intensity_a=ia, intensity_b=ib,
                           labels_a=la, labels_b=lb)
    lio.write_scan(lasermixkit.PointCloud(coords=ca, intensity=ia, labels=la),
                   tmp_path / "a.bin", tmp_path / "a.label")
    lio.write_scan(lasermixkit.PointCloud(coords=cb, intensity=ib, labels=lb),
                   tmp_path / "b.bin", tmp_path / "b.label")
    assert cli_main(["mix", str(tmp_path / "a.bin"), str(tmp_path / "b.bin"),
                     str(tmp_path / "out"), "--labels-a", str(tmp_path / "a.label"),
                     "--labels-b", str(tmp_path / "b.label")]) == 0
    records = np.column_stack([out.coords_a, out.intensity_a]).astype(np.float32)
    assert (tmp_path / "out" / "mixed_a.bin").read_bytes() == records.tobytes()


def test_projection_matches_cli_outputs(tmp_path):
    rng = np.random.default_rng(7)
    coords = f32(rng.normal(size=(150, 3)) * 8)
    cloud = lasermixkit.PointCloud(coords=coords, intensity=np.zeros(150))
    lio.write_scan(cloud, tmp_path / "scan.bin", None)

    ext = np.eye(4)
    ext[:3, :3] = [[0.0, -1.0, 0.0], [0.0, 0.0, -1.0], [1.0, 0.0, 0.0]]
    k = np.array([[70.0, 0.0, 48.0], [0.0, 70.0, 36.0], [0.0, 0.0, 1.0]])
    calib = lasermixkit.CalibrationParams(intrinsic=k, extrinsic=ext,
                                          image_size=(96, 72))
    lio.write_calibration(calib, tmp_path / "calib.txt")
    image = rng.random((72, 96, 3))
    lio.write_fmap(image, tmp_path / "img.fmap")
    assert cli_main(["project", str(tmp_path / "scan.bin"), str(tmp_path / "calib.txt"),
                     str(tmp_path / "img.fmap"), str(tmp_path / "out")]) == 0

    proj = bridge.project_points(coords, intrinsic=k, extrinsic=ext,
                                 image_size=(96, 72))
    rows = (tmp_path / "out" / "correspondence.csv").read_text().strip().splitlines()[1:]
    assert len(rows) == 150
    for row in rows:
        idx, u, v, mask, depth = row.split(",")
        i = int(idx)
        assert proj.mask[i] == int(mask)
        # the CSV carries the full-precision values; the binding rounds once
        # to the float32 boundary
        assert proj.pixel_coords[i, 0] == np.float32(float(u))
        assert proj.pixel_coords[i, 1] == np.float32(float(v))
        assert proj.depth[i] == np.float32(float(depth))

    painted = bridge.paint_points(coords, f32(image.astype(np.float32)),
                                  intrinsic=k, extrinsic=ext)
    stored = lio.read_painted(tmp_path / "out" / "painted.fmap")
    assert np.array_equal(painted, stored.astype(np.float32))


# --- boundary validation ----------------------------------------------------


def test_wrong_dtype_rejected_before_core(monkeypatch):
    calls = []
    monkeypatch.setattr(lasermixkit, "laser_mix",
                        lambda *a, **k: calls.append(1))
    coords64 = np.zeros((4, 3), dtype=np.float64)
    good = f32(np.ones((4, 3)))
    with pytest.raises(bridge.BoundaryError):
        bridge.laser_mix(coords64, good)
    with pytest.raises(bridge.BoundaryError):
        bridge.laser_mix(good, good, labels_a=np.zeros(4, dtype=np.int64),
                         labels_b=i32(np.zeros(4)))
    with pytest.raises(bridge.BoundaryError):
        bridge.laser_mix(good, good, intensity_a=np.zeros(4),
                         intensity_b=f32(np.zeros(4)))
    assert calls == []


def test_shape_mismatch_rejected():
    good = f32(np.ones((4, 3)))
    with pytest.raises(bridge.BoundaryError):
        bridge.laser_mix(f32(np.ones((4, 4))), good)
    with pytest.raises(bridge.BoundaryError):
        bridge.laser_mix(good, good, labels_a=i32([1, 2]), labels_b=i32([1, 2, 3, 4]))
    with pytest.raises(bridge.BoundaryError):
        bridge.assign_areas(f32(np.ones(12)))
    with pytest.raises(bridge.BoundaryError):
        bridge.laser_mix(good, good, phi_min=-10.0)
    with pytest.raises(bridge.BoundaryError):
        bridge.paint_points(good, f32(np.ones((4, 4))),
                            intrinsic=np.eye(3), extrinsic=np.eye(4))
    with pytest.raises(bridge.BoundaryError):
        bridge.laser_mix([[0.0, 0.0, 0.0]], good)


def test_multi_modal_painted_dtype_rejected():
    good = f32(np.ones((4, 3)))
    with pytest.raises(bridge.BoundaryError):
        bridge.multi_modal_laser_mix(good, np.ones((4, 2)), good,
                                     f32(np.ones((4, 2))))


def test_outputs_never_alias_inputs():
    rng = np.random.default_rng(8)
    ca, ia, la = random_inputs(rng, 40)
    cb, ib, lb = random_inputs(rng, 40)
    snapshot = ca.tobytes()
    out = bridge.laser_mix(ca, cb, intensity_a=ia, intensity_b=ib,
                           labels_a=la, labels_b=lb, areas=1)
    # areas=1 routes every scan_a point straight to mixed_a, the aliasing
    # worst case
    for produced in (out.coords_a, out.coords_b, out.intensity_a,
                     out.labels_a, out.provenance_a):
        for supplied in (ca, cb, ia, ib, la, lb):
            assert not np.shares_memory(produced, supplied)
    before = out.coords_a.copy()
    ca[:] = -1.0
    assert np.array_equal(out.coords_a, before)
    assert snapshot != ca.tobytes()  # the input itself did change


def test_output_dtypes_are_boundary_dtypes():
    rng = np.random.default_rng(9)
    ca, ia, la = random_inputs(rng, 30)
    cb, ib, lb = random_inputs(rng, 30)
    out = bridge.laser_mix(ca, cb, intensity_a=ia, intensity_b=ib,
                           labels_a=la, labels_b=lb)
    assert out.coords_a.dtype == np.float32
    assert out.intensity_b.dtype == np.float32
    assert out.labels_a.dtype == np.int32
    assert out.provenance_b.dtype == np.int32
    areas = bridge.assign_areas(ca)
    assert areas.dtype == np.int32
