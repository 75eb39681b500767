"""Hash-collision measurement over ten point-distribution scenarios.

Each scenario draws geodetic points with a distinctive spatial/temporal
footprint, from globally uniform down to one building-sized patch. For
every grid and level the lab counts the distinct lattice vertices the
points touch and the distinct table rows those vertices land on, exactly
(no sketches). Two collision readings are reported per level:

  rate             1 - occupied_rows / distinct_vertices
  sharing_fraction fraction of distinct vertices whose row is shared

plus both birthday-model expectations for uniform hashing, so measured
rates can be compared against chance.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass

import numpy as np

from .encoder import PROJECTIONS, Earth4DConfig
from .errors import DomainError
from .fileio import atomic_write_text
from .geocoords import NormalizationConfig, normalize_batch, validate_geodetic
from .hashgrid import GridConfig, build_levels, distinct_vertices
from .probing import ProbeConfig, assigned_rows, greedy_probe_logits

_HOUR_S = 3600.0
_M_PER_DEG = 111_320.0
# patch centers stay below this latitude so east/north offsets are well posed
_MAX_CENTER_LAT = 85.0

SCENARIO_NAMES = (
    "uniform_random",
    "continental_sparse",
    "moderate_spatial_cluster",
    "moderate_temporal_cluster",
    "moderate_spatiotemporal",
    "extreme_spatial_single",
    "extreme_spatial_multi",
    "extreme_temporal_single",
    "extreme_temporal_multi",
    "time_series",
)


@dataclass
class ScenarioPoints:
    name: str
    seed: int
    latitude: np.ndarray
    longitude: np.ndarray
    elevation_m: np.ndarray
    time_s: np.ndarray
    envelope: dict

    def __len__(self) -> int:
        return self.latitude.shape[0]


@dataclass(frozen=True)
class LevelStats:
    grid: str
    level: int
    resolution: int
    rows: int
    dense: bool
    distinct_vertices: int
    occupied_rows: int
    rate: float
    sharing_fraction: float
    expected_rate: float
    expected_sharing_fraction: float

    def to_dict(self) -> dict:
        return {
            "grid": self.grid,
            "level": self.level,
            "resolution": self.resolution,
            "rows": self.rows,
            "dense": self.dense,
            "distinct_vertices": self.distinct_vertices,
            "occupied_rows": self.occupied_rows,
            "rate": self.rate,
            "sharing_fraction": self.sharing_fraction,
            "expected_rate": self.expected_rate,
            "expected_sharing_fraction": self.expected_sharing_fraction,
        }


def expected_occupied(table_rows: int, vertices: int) -> float:
    """E[distinct occupied rows] when hashing `vertices` distinct keys
    uniformly into `table_rows` rows."""
    if vertices == 0:
        return 0.0
    if vertices == 1:
        return 1.0
    return -table_rows * math.expm1(vertices * math.log1p(-1.0 / table_rows))


def expected_rate(table_rows: int, vertices: int) -> float:
    """Birthday expectation of 1 - occupied/vertices under uniform hashing."""
    if vertices == 0:
        return 0.0
    return 1.0 - expected_occupied(table_rows, vertices) / vertices


def expected_sharing_fraction(table_rows: int, vertices: int) -> float:
    """Probability a vertex shares its row with at least one of the other
    vertices: 1 - (1 - 1/T)^(V-1)."""
    if vertices <= 1:
        return 0.0
    return -math.expm1((vertices - 1) * math.log1p(-1.0 / table_rows))


def _area_uniform(rng, n, sin_lo=-1.0, sin_hi=1.0, lon_lo=-180.0, lon_hi=180.0):
    lat = np.degrees(np.arcsin(rng.uniform(sin_lo, sin_hi, n)))
    lon = rng.uniform(lon_lo, lon_hi, n)
    return lat, lon


def _patch_centers(rng, count: int):
    lat, lon = _area_uniform(rng, count)
    while True:
        bad = np.abs(lat) > _MAX_CENTER_LAT
        if not bad.any():
            return lat, lon
        k = int(bad.sum())
        lat[bad] = np.degrees(np.arcsin(rng.uniform(-1.0, 1.0, k)))
        lon[bad] = rng.uniform(-180.0, 180.0, k)


def _wrap_lon(lon):
    return (lon + 180.0) % 360.0 - 180.0


def _patch_points(rng, center_lat, center_lon, half_side_m: float, n: int):
    pick = rng.integers(0, center_lat.shape[0], size=n)
    east = rng.uniform(-half_side_m, half_side_m, n)
    north = rng.uniform(-half_side_m, half_side_m, n)
    clat = center_lat[pick]
    clon = center_lon[pick]
    lat = clat + north / _M_PER_DEG
    lon = _wrap_lon(clon + east / (_M_PER_DEG * np.cos(np.radians(clat))))
    return lat, lon


def _window_starts(rng, cfg: NormalizationConfig, count: int):
    return rng.uniform(cfg.time_start_s, cfg.time_end_s - _HOUR_S, count)


def _window_times(rng, starts, n: int):
    pick = rng.integers(0, starts.shape[0], size=n)
    return starts[pick] + rng.uniform(0.0, _HOUR_S, n)


def _full_times(rng, cfg: NormalizationConfig, n: int):
    return rng.uniform(cfg.time_start_s, cfg.time_end_s, n)


def generate(
    name: str,
    seed: int,
    n: int,
    normalization: NormalizationConfig | None = None,
) -> ScenarioPoints:
    """Draw n points for the named scenario. time_series rounds n to a full
    locations x 100-step product."""
    cfg = normalization if normalization is not None else NormalizationConfig()
    if name not in SCENARIO_NAMES:
        raise DomainError(
            f"unknown scenario {name!r}; expected one of {', '.join(SCENARIO_NAMES)}"
        )
    if n < 1:
        raise DomainError("point count must be at least 1")
    rng = np.random.default_rng(seed)
    spatial: dict = {"kind": "global"}
    temporal: dict = {"kind": "full"}
    # fixed-location scenarios pin elevation per location; others draw per point
    elevation = None

    if name == "uniform_random":
        lat, lon = _area_uniform(rng, n)
        time_s = _full_times(rng, cfg, n)
    elif name == "continental_sparse":
        box = {
            "lat_min": 15.0,
            "lat_max": 72.0,
            "lon_min": -168.0,
            "lon_max": -52.0,
        }
        lat, lon = _area_uniform(
            rng,
            n,
            sin_lo=math.sin(math.radians(box["lat_min"])),
            sin_hi=math.sin(math.radians(box["lat_max"])),
            lon_lo=box["lon_min"],
            lon_hi=box["lon_max"],
        )
        time_s = _full_times(rng, cfg, n)
        spatial = {"kind": "band", **box}
    elif name in (
        "moderate_spatial_cluster",
        "moderate_spatiotemporal",
        "extreme_spatial_single",
        "extreme_spatial_multi",
    ):
        patches = 10 if name == "extreme_spatial_multi" else 1
        side_m = {
            "moderate_spatial_cluster": 10_000.0,
            "moderate_spatiotemporal": 1_000.0,
            "extreme_spatial_single": 10.0,
            "extreme_spatial_multi": 10.0,
        }[name]
        clat, clon = _patch_centers(rng, patches)
        lat, lon = _patch_points(rng, clat, clon, side_m / 2.0, n)
        spatial = {
            "kind": "patches",
            "centers": np.stack([clat, clon], axis=1).tolist(),
            "half_side_m": side_m / 2.0,
        }
        if name == "moderate_spatiotemporal":
            starts = _window_starts(rng, cfg, 1)
            time_s = _window_times(rng, starts, n)
            temporal = {"kind": "windows", "windows": [[float(starts[0]), float(starts[0] + _HOUR_S)]]}
        else:
            time_s = _full_times(rng, cfg, n)
    elif name == "moderate_temporal_cluster":
        locations = min(1000, n)
        llat, llon = _area_uniform(rng, locations)
        lelev = rng.uniform(0.0, 100.0, locations)
        pick = rng.integers(0, locations, size=n)
        lat, lon = llat[pick], llon[pick]
        elevation = lelev[pick]
        time_s = _full_times(rng, cfg, n)
        spatial = {"kind": "locations", "count": locations}
    elif name in ("extreme_temporal_single", "extreme_temporal_multi"):
        windows = 10 if name == "extreme_temporal_multi" else 1
        lat, lon = _area_uniform(rng, n)
        starts = _window_starts(rng, cfg, windows)
        time_s = _window_times(rng, starts, n)
        temporal = {
            "kind": "windows",
            "windows": [[float(s), float(s + _HOUR_S)] for s in starts],
        }
    else:  # time_series
        steps = 100
        locations = max(1, n // steps)
        n = locations * steps
        llat, llon = _area_uniform(rng, locations)
        lelev = rng.uniform(0.0, 100.0, locations)
        lat = np.repeat(llat, steps)
        lon = np.repeat(llon, steps)
        elevation = np.repeat(lelev, steps)
        span = cfg.time_end_s - cfg.time_start_s
        grid_times = cfg.time_start_s + (np.arange(steps) + 0.5) * (span / steps)
        time_s = np.tile(grid_times, locations)
        spatial = {"kind": "locations", "count": locations}
        temporal = {"kind": "steps", "count": steps}

    if elevation is None:
        elevation = rng.uniform(0.0, 100.0, n)
    return ScenarioPoints(
        name=name,
        seed=seed,
        latitude=lat,
        longitude=lon,
        elevation_m=elevation,
        time_s=time_s,
        envelope={"spatial": spatial, "temporal": temporal},
    )


def check_envelope(points: ScenarioPoints, normalization: NormalizationConfig | None = None) -> bool:
    """Verify every point sits inside the scenario's declared bounds."""
    cfg = normalization if normalization is not None else NormalizationConfig()
    validate_geodetic(
        points.latitude, points.longitude, points.elevation_m, points.time_s, cfg
    )
    spatial = points.envelope["spatial"]
    if spatial["kind"] == "band":
        if not (
            np.all(points.latitude >= spatial["lat_min"])
            and np.all(points.latitude <= spatial["lat_max"])
            and np.all(points.longitude >= spatial["lon_min"])
            and np.all(points.longitude <= spatial["lon_max"])
        ):
            return False
    elif spatial["kind"] == "patches":
        half = spatial["half_side_m"] + 1e-3
        inside = np.zeros(len(points), dtype=bool)
        for clat, clon in spatial["centers"]:
            north = (points.latitude - clat) * _M_PER_DEG
            dlon = (points.longitude - clon + 180.0) % 360.0 - 180.0
            east = dlon * _M_PER_DEG * np.cos(np.radians(clat))
            inside |= (np.abs(north) <= half) & (np.abs(east) <= half)
        if not inside.all():
            return False
    elif spatial["kind"] == "locations":
        triples = np.unique(
            np.stack(
                [points.latitude, points.longitude, points.elevation_m], axis=1
            ),
            axis=0,
        )
        if triples.shape[0] > spatial["count"]:
            return False
    temporal = points.envelope["temporal"]
    if temporal["kind"] == "windows":
        ok = np.zeros(len(points), dtype=bool)
        for t0, t1 in temporal["windows"]:
            ok |= (points.time_s >= t0) & (points.time_s <= t1 + 1e-6)
        if not ok.all():
            return False
    elif temporal["kind"] == "steps":
        if np.unique(points.time_s).size > temporal["count"]:
            return False
    return True


def measure_normalized(
    points4: np.ndarray,
    grid_config: GridConfig,
    logits: dict | None = None,
    level_subset: tuple | None = None,
) -> list[LevelStats]:
    """Per grid x level collision statistics for normalized points (n, 4).
    `logits` optionally maps (grid_name, level) to probe-logit arrays; rows
    are then assigned in hard probing mode. `level_subset` restricts the
    measurement to the named level indices."""
    levels = build_levels(grid_config)
    if level_subset is not None:
        levels = [s for s in levels if s.index in level_subset]
    stats = []
    for grid_name, axes in PROJECTIONS:
        pts3 = np.ascontiguousarray(points4[:, axes])
        for spec in levels:
            verts = distinct_vertices(pts3, spec.resolution)
            v = verts.shape[0]
            if spec.dense:
                stats.append(
                    LevelStats(
                        grid=grid_name,
                        level=spec.index,
                        resolution=spec.resolution,
                        rows=spec.rows,
                        dense=True,
                        distinct_vertices=v,
                        occupied_rows=v,
                        rate=0.0,
                        sharing_fraction=0.0,
                        expected_rate=0.0,
                        expected_sharing_fraction=0.0,
                    )
                )
                continue
            level_logits = None if logits is None else logits.get((grid_name, spec.index))
            rows = assigned_rows(verts, spec.rows, level_logits)
            _, counts = np.unique(rows, return_counts=True)
            occupied = counts.size
            alone = int(np.count_nonzero(counts == 1))
            stats.append(
                LevelStats(
                    grid=grid_name,
                    level=spec.index,
                    resolution=spec.resolution,
                    rows=spec.rows,
                    dense=False,
                    distinct_vertices=v,
                    occupied_rows=occupied,
                    rate=1.0 - occupied / v,
                    sharing_fraction=1.0 - alone / v,
                    expected_rate=expected_rate(spec.rows, v),
                    expected_sharing_fraction=expected_sharing_fraction(spec.rows, v),
                )
            )
    return stats


def measure(
    points: ScenarioPoints,
    config: Earth4DConfig,
    logits: dict | None = None,
    level_subset: tuple | None = None,
) -> dict:
    """CollisionReport for one scenario draw."""
    if len(points) == 0:
        raise DomainError("cannot measure an empty point set")
    points4 = normalize_batch(
        points.latitude,
        points.longitude,
        points.elevation_m,
        points.time_s,
        config.normalization,
    )
    stats = measure_normalized(points4, config.grid, logits, level_subset)
    return {
        "scenario": points.name,
        "seed": points.seed,
        "points": len(points),
        "probed": logits is not None,
        "grid_config": config.grid.to_dict(),
        "levels": [s.to_dict() for s in stats],
    }


def greedy_logits(
    points4: np.ndarray,
    grid_config: GridConfig,
    probe_config: ProbeConfig | None = None,
    dtype=np.float32,
) -> dict:
    """Greedy collision-minimizing probe logits for every hashed level of
    every grid, keyed by (grid_name, level)."""
    probe_config = probe_config if probe_config is not None else ProbeConfig()
    out = {}
    for grid_name, axes in PROJECTIONS:
        pts3 = np.ascontiguousarray(points4[:, axes])
        for spec in build_levels(grid_config):
            if spec.dense:
                continue
            verts = distinct_vertices(pts3, spec.resolution)
            out[(grid_name, spec.index)] = greedy_probe_logits(
                verts, spec.rows, probe_config, dtype=dtype
            )
    return out


def compare_probing(
    points: ScenarioPoints,
    config: Earth4DConfig,
    logits: dict,
) -> dict:
    """Fixed-hash versus hard-probed collision statistics, with relative
    reduction percentages per hashed level."""
    fixed = measure(points, config, logits=None)
    probed = measure(points, config, logits=logits)
    reductions = []
    for f, p in zip(fixed["levels"], probed["levels"]):
        if f["dense"]:
            continue
        reduction = (
            0.0
            if f["rate"] == 0.0
            else 100.0 * (f["rate"] - p["rate"]) / f["rate"]
        )
        reductions.append(
            {
                "grid": f["grid"],
                "level": f["level"],
                "distinct_vertices": f["distinct_vertices"],
                "rows": f["rows"],
                "fixed_rate": f["rate"],
                "probed_rate": p["rate"],
                "reduction_pct": reduction,
            }
        )
    return {
        "scenario": points.name,
        "seed": points.seed,
        "points": len(points),
        "fixed": fixed,
        "probed": probed,
        "reductions": reductions,
    }


def write_report_json(path, report) -> None:
    atomic_write_text(path, json.dumps(report, indent=2, sort_keys=True) + "\n")


_CSV_FIELDS = (
    "scenario",
    "seed",
    "points",
    "grid",
    "level",
    "resolution",
    "rows",
    "dense",
    "distinct_vertices",
    "occupied_rows",
    "rate",
    "sharing_fraction",
    "expected_rate",
    "expected_sharing_fraction",
)


def write_report_csv(path, reports) -> None:
    """Flatten one or more CollisionReports to scenario x grid x level rows."""
    if isinstance(reports, dict):
        reports = [reports]
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(_CSV_FIELDS)
    for report in reports:
        for s in report["levels"]:
            writer.writerow(
                [
                    report["scenario"],
                    report["seed"],
                    report["points"],
                    s["grid"],
                    s["level"],
                    s["resolution"],
                    s["rows"],
                    int(s["dense"]),
                    s["distinct_vertices"],
                    s["occupied_rows"],
                    repr(s["rate"]),
                    repr(s["sharing_fraction"]),
                    repr(s["expected_rate"]),
                    repr(s["expected_sharing_fraction"]),
                ]
            )
    atomic_write_text(path, buf.getvalue())
