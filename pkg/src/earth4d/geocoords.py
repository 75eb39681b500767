"""Geodetic coordinates, WGS-84 ECEF conversion, and unit-4-cube normalization.

All encoder grids consume points in the half-open unit 4-cube [0, 1)^4.
Spatial axes are an affine map of Earth-centered Earth-fixed (ECEF) meters
into a cube of configurable half-width centered at Earth's center; the time
axis is an affine map of epoch seconds over a configurable window.

Every function here is a pure function of immutable inputs and is safe to
call concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import datetime, timezone

import numpy as np

from .errors import DomainError

# WGS-84 reference ellipsoid
WGS84_A = 6378137.0
WGS84_F = 1.0 / 298.257223563

# Default window: [1900-01-01, 2100-01-01) UTC
TIME_START_DEFAULT = -2208988800.0
TIME_END_DEFAULT = 4102444800.0

ELEVATION_MIN_DEFAULT = -11000.0
ELEVATION_MAX_DEFAULT = 9000.0

# Cube half-width covering the ellipsoid plus the elevation band with
# little wasted volume: a + 9000 m < 6.5e6 m.
HALF_WIDTH_DEFAULT = 6.5e6


@dataclass(frozen=True)
class NormalizationConfig:
    semi_major_axis_m: float = WGS84_A
    flattening: float = WGS84_F
    half_width_m: float = HALF_WIDTH_DEFAULT
    elevation_min_m: float = ELEVATION_MIN_DEFAULT
    elevation_max_m: float = ELEVATION_MAX_DEFAULT
    time_start_s: float = TIME_START_DEFAULT
    time_end_s: float = TIME_END_DEFAULT

    def __post_init__(self):
        if not self.time_end_s > self.time_start_s:
            raise DomainError("time_end_s must exceed time_start_s")
        if not self.half_width_m > self.semi_major_axis_m + self.elevation_max_m:
            raise DomainError(
                "half_width_m must exceed semi_major_axis_m + elevation_max_m"
            )

    @property
    def eccentricity_sq(self) -> float:
        return self.flattening * (2.0 - self.flattening)

    @property
    def semi_minor_axis_m(self) -> float:
        return self.semi_major_axis_m * (1.0 - self.flattening)

    def to_dict(self) -> dict:
        return {
            "semi_major_axis_m": self.semi_major_axis_m,
            "flattening": self.flattening,
            "half_width_m": self.half_width_m,
            "elevation_min_m": self.elevation_min_m,
            "elevation_max_m": self.elevation_max_m,
            "time_start_s": self.time_start_s,
            "time_end_s": self.time_end_s,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NormalizationConfig":
        return cls(**d)


@dataclass(frozen=True)
class GeodeticPoint:
    """Raw observation coordinate: degrees, meters above the ellipsoid, and
    epoch seconds (signed, 1970-01-01T00:00:00Z origin)."""

    latitude_deg: float
    longitude_deg: float
    elevation_m: float
    time_s: float


@dataclass(frozen=True)
class NormalizedPoint4:
    """A coordinate inside the unit 4-cube, every component in [0, 1)."""

    x: float
    y: float
    z: float
    t: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z, self.t], dtype=np.float64)


def validate_geodetic(
    latitude_deg,
    longitude_deg,
    elevation_m,
    time_s=None,
    cfg: NormalizationConfig = NormalizationConfig(),
) -> None:
    """Check GeodeticPoint invariants, raising DomainError naming the
    offending field (and first offending index for array inputs)."""
    lat = np.asarray(latitude_deg, dtype=np.float64)
    lon = np.asarray(longitude_deg, dtype=np.float64)
    elev = np.asarray(elevation_m, dtype=np.float64)

    def first_bad(mask) -> str:
        idx = np.flatnonzero(np.atleast_1d(mask))
        return f" at index {idx[0]}" if np.ndim(mask) else ""

    bad = ~((lat >= -90.0) & (lat <= 90.0))
    if np.any(bad):
        raise DomainError(f"latitude_deg outside [-90, 90]{first_bad(bad)}")
    bad = ~((lon >= -180.0) & (lon < 180.0))
    if np.any(bad):
        raise DomainError(f"longitude_deg outside [-180, 180){first_bad(bad)}")
    bad = ~((elev >= cfg.elevation_min_m) & (elev <= cfg.elevation_max_m))
    if np.any(bad):
        raise DomainError(
            f"elevation_m outside [{cfg.elevation_min_m}, {cfg.elevation_max_m}]"
            f"{first_bad(bad)}"
        )
    if time_s is not None:
        t = np.asarray(time_s, dtype=np.float64)
        bad = ~((t >= cfg.time_start_s) & (t < cfg.time_end_s))
        if np.any(bad):
            raise DomainError(
                f"time_s outside [{cfg.time_start_s}, {cfg.time_end_s})"
                f"{first_bad(bad)}"
            )


def geodetic_to_ecef(
    latitude_deg,
    longitude_deg,
    elevation_m,
    cfg: NormalizationConfig = NormalizationConfig(),
    validate: bool = True,
):
    """Closed-form geodetic -> ECEF conversion on the configured ellipsoid.

    Accepts scalars or arrays; returns (X, Y, Z) in meters.
    """
    if validate:
        validate_geodetic(latitude_deg, longitude_deg, elevation_m, None, cfg)
    lat = np.deg2rad(np.asarray(latitude_deg, dtype=np.float64))
    lon = np.deg2rad(np.asarray(longitude_deg, dtype=np.float64))
    h = np.asarray(elevation_m, dtype=np.float64)

    sin_lat = np.sin(lat)
    cos_lat = np.cos(lat)
    e2 = cfg.eccentricity_sq
    # prime-vertical radius of curvature
    n = cfg.semi_major_axis_m / np.sqrt(1.0 - e2 * sin_lat * sin_lat)

    x = (n + h) * cos_lat * np.cos(lon)
    y = (n + h) * cos_lat * np.sin(lon)
    z = (n * (1.0 - e2) + h) * sin_lat
    return x, y, z


def ecef_to_geodetic(
    x,
    y,
    z,
    cfg: NormalizationConfig = NormalizationConfig(),
    max_iter: int = 10,
):
    """Invert ECEF meters to geodetic coordinates by fixed-point iteration.

    Raises DomainError when the point lies too far from the ellipsoid shell
    for the inversion to be meaningful (e.g. near Earth's center).
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    a = cfg.semi_major_axis_m
    b = cfg.semi_minor_axis_m
    e2 = cfg.eccentricity_sq

    r = np.sqrt(x * x + y * y + z * z)
    if np.any(r < 0.5 * b):
        raise DomainError("ECEF point too close to Earth's center for geodetic inversion")

    lon = np.arctan2(y, x)
    p = np.sqrt(x * x + y * y)
    on_axis = p < 1e-9

    lat = np.arctan2(z, p * (1.0 - e2))
    for _ in range(max_iter):
        sin_lat = np.sin(lat)
        n = a / np.sqrt(1.0 - e2 * sin_lat * sin_lat)
        h = np.where(
            np.abs(np.cos(lat)) > 1e-12,
            p / np.cos(lat) - n,
            np.abs(z) / np.maximum(np.abs(sin_lat), 1e-300) - n * (1.0 - e2),
        )
        lat = np.arctan2(z, p * (1.0 - e2 * n / (n + h)))

    sin_lat = np.sin(lat)
    n = a / np.sqrt(1.0 - e2 * sin_lat * sin_lat)
    h = np.where(
        np.abs(np.cos(lat)) > 1e-12,
        p / np.cos(lat) - n,
        np.abs(z) / np.maximum(np.abs(sin_lat), 1e-300) - n * (1.0 - e2),
    )
    lat = np.where(on_axis, np.copysign(np.pi / 2.0, z), lat)
    h = np.where(on_axis, np.abs(z) - b, h)
    lon = np.where(on_axis, 0.0, lon)

    margin = 200.0
    bad = (h < cfg.elevation_min_m - margin) | (h > cfg.elevation_max_m + margin)
    if np.any(bad):
        raise DomainError(
            "ECEF point falls outside the configured elevation band; "
            "geodetic inversion rejected"
        )
    return np.rad2deg(lat), np.rad2deg(lon), h


def normalize_batch(
    latitude_deg,
    longitude_deg,
    elevation_m,
    time_s,
    cfg: NormalizationConfig = NormalizationConfig(),
    validate: bool = True,
) -> np.ndarray:
    """Map geodetic coordinates into the unit 4-cube; returns an (n, 4)
    float64 array of (x, y, z, t), affine in ECEF X/Y/Z and in time_s."""
    if validate:
        validate_geodetic(latitude_deg, longitude_deg, elevation_m, time_s, cfg)
    ex, ey, ez = geodetic_to_ecef(
        latitude_deg, longitude_deg, elevation_m, cfg, validate=False
    )
    hw = cfg.half_width_m
    t = np.asarray(time_s, dtype=np.float64)
    q = np.stack(
        [
            (np.atleast_1d(ex) + hw) / (2.0 * hw),
            (np.atleast_1d(ey) + hw) / (2.0 * hw),
            (np.atleast_1d(ez) + hw) / (2.0 * hw),
            (np.atleast_1d(t) - cfg.time_start_s) / (cfg.time_end_s - cfg.time_start_s),
        ],
        axis=-1,
    )
    return q


def normalize(p: GeodeticPoint, cfg: NormalizationConfig = NormalizationConfig()) -> NormalizedPoint4:
    q = normalize_batch(p.latitude_deg, p.longitude_deg, p.elevation_m, p.time_s, cfg)[0]
    return NormalizedPoint4(float(q[0]), float(q[1]), float(q[2]), float(q[3]))


def denormalize_batch(q: np.ndarray, cfg: NormalizationConfig = NormalizationConfig()):
    """Invert normalize_batch: (n, 4) unit-cube coordinates -> geodetic
    arrays (lat, lon, elev, time_s)."""
    q = np.asarray(q, dtype=np.float64)
    if np.any((q < 0.0) | (q >= 1.0)):
        raise DomainError("normalized components must lie in [0, 1)")
    hw = cfg.half_width_m
    x = q[..., 0] * 2.0 * hw - hw
    y = q[..., 1] * 2.0 * hw - hw
    z = q[..., 2] * 2.0 * hw - hw
    t = cfg.time_start_s + q[..., 3] * (cfg.time_end_s - cfg.time_start_s)
    lat, lon, elev = ecef_to_geodetic(x, y, z, cfg)
    # keep longitude in the half-open convention
    lon = np.where(lon >= 180.0, lon - 360.0, lon)
    return lat, lon, elev, t


def denormalize(q: NormalizedPoint4, cfg: NormalizationConfig = NormalizationConfig()) -> GeodeticPoint:
    lat, lon, elev, t = denormalize_batch(q.as_array()[None, :], cfg)
    return GeodeticPoint(float(lat[0]), float(lon[0]), float(elev[0]), float(t[0]))


def parse_time(value: str) -> float:
    """Parse a CLI timestamp: raw epoch seconds or an ISO-8601 UTC string.

    Numeric strings are parsed exactly as decimals; ISO strings may end in
    'Z' or carry an explicit offset, and naive strings are taken as UTC.
    """
    s = value.strip()
    try:
        return float(s)
    except ValueError:
        pass
    iso = s[:-1] + "+00:00" if s.endswith(("Z", "z")) else s
    try:
        dt = datetime.fromisoformat(iso)
    except ValueError as exc:
        raise DomainError(f"unparseable timestamp: {value!r}") from exc
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.timestamp()


def cell_edge_m(cfg: NormalizationConfig, resolution: int) -> float:
    """Physical edge length of one grid cell at a given per-axis vertex
    resolution (vertices span the cube, so there are resolution-1 cells)."""
    return 2.0 * cfg.half_width_m / (resolution - 1)


def format_time(time_s: float) -> str:
    return (
        datetime.fromtimestamp(time_s, tz=timezone.utc).isoformat().replace("+00:00", "Z")
    )


__all__ = [
    "WGS84_A",
    "WGS84_F",
    "NormalizationConfig",
    "GeodeticPoint",
    "NormalizedPoint4",
    "validate_geodetic",
    "geodetic_to_ecef",
    "ecef_to_geodetic",
    "normalize",
    "normalize_batch",
    "denormalize",
    "denormalize_batch",
    "parse_time",
    "cell_edge_m",
    "format_time",
]
