import numpy as np
import pytest

from earth4d.encoder import (
    PROJECTIONS,
    Earth4DConfig,
    Earth4DEncoder,
    count_parameters,
)
from earth4d.hashgrid import GridConfig, build_levels
from earth4d.probing import ProbeConfig


def test_projection_axes():
    assert PROJECTIONS == (
        ("xyz", (0, 1, 2)),
        ("xyt", (0, 1, 3)),
        ("yzt", (1, 2, 3)),
        ("xzt", (0, 2, 3)),
    )


def test_default_output_dim_192():
    assert Earth4DConfig().output_dim == 192
    enc = Earth4DEncoder(
        Earth4DConfig(grid=GridConfig(num_levels=2, max_rows=1 << 10))
    )
    assert enc.output_dim == 4 * 2 * 2


def test_default_parameter_counts():
    counts = count_parameters(Earth4DConfig())
    assert counts["feature_parameters"] == 723_779_584
    assert counts["probe_parameters"] == 0
    assert counts["total_parameters"] == 723_779_584
    assert counts["output_dim"] == 192
    assert counts["grids"] == ["xyz", "xyt", "yzt", "xzt"]
    assert len(counts["levels_per_grid"]) == 24


def test_default_probing_parameter_counts():
    cfg = Earth4DConfig(grid=GridConfig(probing=ProbeConfig()))
    counts = count_parameters(cfg)
    # 21 hashed levels x 2^16 probe rows x 8 slots x 4 grids
    assert counts["probe_parameters"] == 4 * 21 * (1 << 16) * 8 == 44_040_192
    assert counts["feature_parameters"] == 723_779_584
    assert counts["total_parameters"] == 723_779_584 + 44_040_192


def test_tmax_2_14_parameter_count():
    cfg = Earth4DConfig(grid=GridConfig(max_rows=1 << 14))
    counts = count_parameters(cfg)
    # every level hashes since 32^3 = 2^15 > 2^14
    assert counts["feature_parameters"] == 4 * 24 * (1 << 14) * 2 == 3_145_728


def test_single_dense_level_count():
    cfg = Earth4DConfig(grid=GridConfig(num_levels=1))
    counts = count_parameters(cfg)
    assert counts["feature_parameters"] == 4 * 32768 * 2 == 262_144


def test_count_matches_brute_force_enumeration():
    rng = np.random.default_rng(0)
    for _ in range(20):
        grid = GridConfig(
            num_levels=int(rng.integers(1, 10)),
            max_rows=1 << int(rng.integers(3, 18)),
            features_per_level=int(rng.integers(1, 5)),
            base_resolution_exp=int(rng.integers(1, 6)),
        )
        counts = count_parameters(Earth4DConfig(grid=grid))
        brute = 0
        for spec in build_levels(grid):
            n3 = spec.resolution**3
            brute += min(n3, grid.max_rows) * grid.features_per_level
        assert counts["feature_parameters"] == 4 * brute


def test_count_parameters_matches_allocation(desk_grid):
    cfg = Earth4DConfig(grid=desk_grid)
    counts = count_parameters(cfg)
    enc = Earth4DEncoder(cfg)
    allocated = sum(p.values.size for p in enc.parameters())
    assert allocated == counts["total_parameters"]


def test_encode_batch_shape_dtype(desk_grid_plain):
    enc = Earth4DEncoder(Earth4DConfig(grid=desk_grid_plain))
    pts = np.random.default_rng(1).random((7, 4))
    out = enc.encode_batch(pts)
    assert out.shape == (7, 64)
    assert out.dtype == np.float32


def test_encode_zero_tables_zero_output(desk_grid_plain):
    enc = Earth4DEncoder(Earth4DConfig(grid=desk_grid_plain))
    for p in enc.parameters():
        p.values[:] = 0
    out = enc.encode_batch(np.random.default_rng(2).random((5, 4)))
    assert not out.any()


@pytest.mark.parametrize(
    "axis,quiet_grid",
    [(3, "xyz"), (2, "xyt"), (0, "yzt"), (1, "xzt")],
)
def test_decomposition_slices(axis, quiet_grid, desk_grid_plain):
    # perturbing one input axis must leave the grid that ignores it
    # bitwise unchanged while the other three slices move
    enc = Earth4DEncoder(Earth4DConfig(grid=desk_grid_plain), seed=3)
    dim = desk_grid_plain.output_dim
    p = np.array([[0.31, 0.42, 0.53, 0.64]])
    q = p.copy()
    q[0, axis] += 0.17
    a, b = enc.encode_batch(p), enc.encode_batch(q)
    names = [name for name, _ in PROJECTIONS]
    gi = names.index(quiet_grid)
    sl = slice(gi * dim, (gi + 1) * dim)
    assert np.array_equal(a[0, sl], b[0, sl])
    for other in range(4):
        if other == gi:
            continue
        osl = slice(other * dim, (other + 1) * dim)
        assert not np.array_equal(a[0, osl], b[0, osl])


def test_backward_slice_routing(desk_grid_plain):
    enc = Earth4DEncoder(Earth4DConfig(grid=desk_grid_plain), seed=4)
    pts = np.random.default_rng(5).random((6, 4))
    dim = desk_grid_plain.output_dim
    upstream = np.zeros((6, enc.output_dim), dtype=np.float32)
    upstream[:, :dim] = 1.0  # only the xyz slice carries gradient
    enc.encode_backward(pts, upstream)
    moved = {
        name: any(p.grad is not None and p.grad.any() for p in enc.grids[name].parameters())
        for name, _ in PROJECTIONS
    }
    assert moved == {"xyz": True, "xyt": False, "yzt": False, "xzt": False}


def test_backward_zero_upstream_no_change(desk_grid_plain):
    enc = Earth4DEncoder(Earth4DConfig(grid=desk_grid_plain), seed=6)
    pts = np.random.default_rng(7).random((6, 4))
    enc.encode_backward(pts, np.zeros((6, enc.output_dim), dtype=np.float32))
    assert all(p.grad is None or not p.grad.any() for p in enc.parameters())


def test_backward_finite_difference(desk_grid_plain):
    # float64 tables so central differences resolve the gradient
    grid = GridConfig(
        num_levels=2, max_rows=1 << 8, features_per_level=2, dtype="float64"
    )
    enc = Earth4DEncoder(Earth4DConfig(grid=grid), seed=8)
    rng = np.random.default_rng(9)
    pts = rng.random((5, 4))
    upstream = rng.standard_normal((5, enc.output_dim))
    enc.encode_backward(pts, upstream)
    h = 1e-2  # loss is linear in each table entry
    for p in enc.parameters():
        flat = p.values.reshape(-1)
        idx = rng.choice(flat.size, size=4, replace=False)
        for i in idx:
            keep = flat[i]
            flat[i] = keep + h
            lp = float(np.sum(enc.encode_batch(pts) * upstream))
            flat[i] = keep - h
            lm = float(np.sum(enc.encode_batch(pts) * upstream))
            flat[i] = keep
            fd = (lp - lm) / (2 * h)
            an = p.grad.reshape(-1)[i]
            assert an == pytest.approx(fd, rel=1e-6, abs=1e-9)


def test_encoder_deterministic_across_builds(desk_grid):
    pts = np.random.default_rng(10).random((20, 4))
    a = Earth4DEncoder(Earth4DConfig(grid=desk_grid), seed=11).encode_batch(pts)
    b = Earth4DEncoder(Earth4DConfig(grid=desk_grid), seed=11).encode_batch(pts)
    assert np.array_equal(a, b)
    c = Earth4DEncoder(Earth4DConfig(grid=desk_grid), seed=12).encode_batch(pts)
    assert not np.array_equal(a, c)


def test_grids_initialized_independently(desk_grid_plain):
    enc = Earth4DEncoder(Earth4DConfig(grid=desk_grid_plain), seed=13)
    t0 = enc.grids["xyz"].tables[0].values
    t1 = enc.grids["xyt"].tables[0].values
    assert not np.array_equal(t0, t1)


def test_encode_geodetic_matches_manual_normalization(desk_grid_plain):
    from earth4d.geocoords import normalize_batch

    enc = Earth4DEncoder(Earth4DConfig(grid=desk_grid_plain), seed=14)
    lat = np.array([37.42, -12.0])
    lon = np.array([-122.08, 45.5])
    elev = np.array([30.0, 500.0])
    ts = np.array([1.6e9, 1.0e9])
    direct = enc.encode_geodetic(lat, lon, elev, ts)
    manual = enc.encode_batch(
        normalize_batch(lat, lon, elev, ts, enc.config.normalization)
    )
    assert np.array_equal(direct, manual)


def test_clamp_counter(desk_grid_plain):
    enc = Earth4DEncoder(Earth4DConfig(grid=desk_grid_plain))
    enc.encode_batch(np.array([[0.5, 0.5, 0.5, 1.5], [0.1, 0.2, 0.3, 0.4]]))
    assert enc.clamped_points == 1


def test_config_dict_round_trip(desk_grid):
    cfg = Earth4DConfig(grid=desk_grid)
    assert Earth4DConfig.from_dict(cfg.to_dict()) == cfg
