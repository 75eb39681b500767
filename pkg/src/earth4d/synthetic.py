"""Synthetic sample generators with known structure.

Two families: a globally smooth field that any well-formed encoder head
should fit almost perfectly, and a tightly clustered patch whose target
varies at a chosen wavelength, which stresses fine hashed levels and gives
learned probing collisions worth removing.
"""

from __future__ import annotations

import numpy as np

from .dataset import SampleSet
from .geocoords import NormalizationConfig, normalize_batch

_TWO_PI = 2.0 * np.pi
# meters per degree of latitude, WGS-84 mean
_M_PER_DEG = 111_320.0


def area_uniform_latlon(rng, n: int):
    """Latitude/longitude pairs uniform over the sphere's area."""
    lat = np.degrees(np.arcsin(rng.uniform(-1.0, 1.0, n)))
    lon = rng.uniform(-180.0, 180.0, n)
    return lat, lon


def smooth_field(points4: np.ndarray) -> np.ndarray:
    """One-cycle sinusoids over the normalized cube, in percent units."""
    x, y, z, t = np.asarray(points4, dtype=np.float64).T
    return (
        100.0
        + 40.0 * np.sin(_TWO_PI * x) * np.cos(_TWO_PI * y)
        + 25.0 * np.sin(_TWO_PI * z)
        + 15.0 * np.cos(_TWO_PI * t)
    )


def smooth_global_samples(
    n: int,
    seed: int,
    normalization: NormalizationConfig | None = None,
) -> SampleSet:
    """Samples spread over the whole globe and time window, labeled by the
    smooth field at their normalized position."""
    cfg = normalization if normalization is not None else NormalizationConfig()
    rng = np.random.default_rng(seed)
    lat, lon = area_uniform_latlon(rng, n)
    elev = rng.uniform(0.0, 100.0, n)
    time_s = rng.uniform(cfg.time_start_s, cfg.time_end_s, n)
    points = normalize_batch(lat, lon, elev, time_s, cfg)
    return SampleSet(
        latitude=lat,
        longitude=lon,
        elevation_m=elev,
        time_s=time_s,
        species=[""] * n,
        target=smooth_field(points),
    )


def clustered_samples(
    n: int,
    seed: int,
    center_lat: float = 37.0,
    center_lon: float = -120.0,
    radius_m: float = 10_000.0,
    wavelength_m: float = 2_000.0,
    time_span_s: float = 2_592_000.0,
    time_wavelength_s: float = 600_000.0,
    normalization: NormalizationConfig | None = None,
) -> SampleSet:
    """Samples in one disc of the given radius and one slice of time, with
    a target that oscillates at wavelength_m across the patch. The signal
    only resolves on grid levels finer than the wavelength, so small hash
    tables collide exactly where the information lives."""
    cfg = normalization if normalization is not None else NormalizationConfig()
    rng = np.random.default_rng(seed)
    # uniform over the disc
    r = radius_m * np.sqrt(rng.uniform(0.0, 1.0, n))
    theta = rng.uniform(0.0, _TWO_PI, n)
    east_m = r * np.cos(theta)
    north_m = r * np.sin(theta)
    lat = center_lat + north_m / _M_PER_DEG
    lon = center_lon + east_m / (_M_PER_DEG * np.cos(np.radians(center_lat)))
    elev = rng.uniform(0.0, 100.0, n)
    mid = 0.5 * (cfg.time_start_s + cfg.time_end_s)
    dt = rng.uniform(-0.5 * time_span_s, 0.5 * time_span_s, n)
    time_s = mid + dt
    target = (
        100.0
        + 40.0 * np.sin(_TWO_PI * east_m / wavelength_m)
        * np.cos(_TWO_PI * north_m / wavelength_m)
        + 20.0 * np.sin(_TWO_PI * dt / time_wavelength_s)
    )
    return SampleSet(
        latitude=lat,
        longitude=lon,
        elevation_m=elev,
        time_s=time_s,
        species=[""] * n,
        target=target,
    )
