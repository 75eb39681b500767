"""Planet-scale 4D positional encoding from four projected 3D hash grids.

A normalized (x, y, z, t) point is projected onto the four axis triples
(x, y, z), (x, y, t), (y, z, t), (x, z, t). Each projection feeds its own
multi-resolution hash grid, and the four feature vectors are concatenated.
The pure-space grid resolves static structure while the three space-time
grids resolve dynamics, at a fraction of the parameters a true 4D lattice
would need.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geocoords import NormalizationConfig, normalize_batch
from .hashgrid import GridConfig, HashGrid, build_levels
from .optim import Parameter

PROJECTIONS = (
    ("xyz", (0, 1, 2)),
    ("xyt", (0, 1, 3)),
    ("yzt", (1, 2, 3)),
    ("xzt", (0, 2, 3)),
)

_ONE_BELOW = float(np.nextafter(1.0, 0.0))


@dataclass(frozen=True)
class Earth4DConfig:
    grid: GridConfig = field(default_factory=GridConfig)
    normalization: NormalizationConfig = field(default_factory=NormalizationConfig)

    @property
    def output_dim(self) -> int:
        return len(PROJECTIONS) * self.grid.output_dim

    def to_dict(self) -> dict:
        return {
            "grid": self.grid.to_dict(),
            "normalization": self.normalization.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Earth4DConfig":
        return cls(
            grid=GridConfig.from_dict(d["grid"]),
            normalization=NormalizationConfig.from_dict(d["normalization"]),
        )


def count_parameters(config: Earth4DConfig) -> dict:
    """Parameter accounting without allocating any table."""
    levels = build_levels(config.grid)
    nf = config.grid.features_per_level
    per_level = [
        {
            "level": spec.index,
            "resolution": spec.resolution,
            "rows": spec.rows,
            "dense": spec.dense,
            "entries": spec.rows * nf,
        }
        for spec in levels
    ]
    features_per_grid = sum(spec.rows for spec in levels) * nf
    probing = config.grid.probing
    if probing is None:
        probe_per_grid = 0
    else:
        hashed = sum(1 for spec in levels if not spec.dense)
        probe_per_grid = hashed * probing.table_rows * probing.num_probes
    num_grids = len(PROJECTIONS)
    return {
        "grids": [name for name, _ in PROJECTIONS],
        "levels_per_grid": per_level,
        "feature_parameters": num_grids * features_per_grid,
        "probe_parameters": num_grids * probe_per_grid,
        "total_parameters": num_grids * (features_per_grid + probe_per_grid),
        "output_dim": num_grids * len(levels) * nf,
    }


class Earth4DEncoder:
    """Four hash grids over the axis projections of normalized 4D points."""

    def __init__(self, config: Earth4DConfig | None = None, seed: int = 0):
        self.config = config if config is not None else Earth4DConfig()
        rng = np.random.default_rng(seed)
        self.grids = {
            name: HashGrid(self.config.grid, name=name, rng=rng)
            for name, _ in PROJECTIONS
        }
        self.clamped_points = 0

    @property
    def output_dim(self) -> int:
        return self.config.output_dim

    def _prepare(self, points: np.ndarray) -> np.ndarray:
        pts = np.ascontiguousarray(points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 4:
            raise ValueError(f"expected points of shape (n, 4), got {pts.shape}")
        outside = (pts < 0.0) | (pts >= 1.0)
        if outside.any():
            self.clamped_points += int(np.count_nonzero(outside.any(axis=1)))
            pts = np.clip(pts, 0.0, _ONE_BELOW)
        return pts

    def encode_batch(self, points: np.ndarray, hard: bool = False) -> np.ndarray:
        """Encode normalized points (n, 4) to features (n, output_dim),
        grid-major in PROJECTIONS order."""
        pts = self._prepare(points)
        blocks = [
            self.grids[name].encode(pts[:, axes], hard=hard)
            for name, axes in PROJECTIONS
        ]
        return np.concatenate(blocks, axis=1)

    def encode_geodetic(
        self, lat, lon, elevation_m, time_s, hard: bool = False
    ) -> np.ndarray:
        """Encode geodetic coordinates plus epoch-second timestamps."""
        pts = normalize_batch(lat, lon, elevation_m, time_s, self.config.normalization)
        return self.encode_batch(pts, hard=hard)

    def encode_backward(
        self, points: np.ndarray, upstream: np.ndarray, hard: bool = False
    ) -> None:
        """Route upstream feature gradients (n, output_dim) to each grid."""
        pts = self._prepare(points)
        dim = self.config.grid.output_dim
        if upstream.shape != (pts.shape[0], self.output_dim):
            raise ValueError(
                f"expected upstream of shape {(pts.shape[0], self.output_dim)}, "
                f"got {upstream.shape}"
            )
        for gi, (name, axes) in enumerate(PROJECTIONS):
            self.grids[name].encode_backward(
                pts[:, axes], upstream[:, gi * dim : (gi + 1) * dim], hard=hard
            )

    def parameters(self) -> list[Parameter]:
        params: list[Parameter] = []
        for name, _ in PROJECTIONS:
            params.extend(self.grids[name].parameters())
        return params

    def zero_grad(self) -> None:
        for name, _ in PROJECTIONS:
            self.grids[name].zero_grad()
