"""Multi-resolution 3D hash grid with trilinear interpolation.

Level ``l`` covers the unit cube with an ``N_l`` per-axis lattice,
``N_l = 2 ** (l + base_resolution_exp)``. Levels whose full lattice fits in
``max_rows`` store one row per vertex (dense, collision free); finer levels
hash vertices into ``max_rows`` rows and may collide. Feature lookup
trilinearly blends the 8 surrounding lattice vertices; training scatters
gradients back through the same weights. Hashed levels can carry learned
probing (see probing.py) to steer colliding vertices apart.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import backends
from .optim import Parameter
from .probing import ProbeConfig

# Largest representable per-axis resolution: vertex coordinates must pack
# into 28 bits for exact distinct-vertex counting.
MAX_RESOLUTION_EXP = 28

_ONE_BELOW = float(np.nextafter(1.0, 0.0))


@dataclass(frozen=True)
class LevelSpec:
    index: int
    resolution: int
    rows: int
    dense: bool


@dataclass(frozen=True)
class GridConfig:
    num_levels: int = 24
    max_rows: int = 1 << 22
    features_per_level: int = 2
    base_resolution_exp: int = 5
    dtype: str = "float32"
    init_scale: float = 1e-4
    probing: ProbeConfig | None = None

    def __post_init__(self):
        if self.num_levels < 1:
            raise ValueError("num_levels must be at least 1")
        if self.max_rows < 8 or self.max_rows & (self.max_rows - 1):
            raise ValueError("max_rows must be a power of two, at least 8")
        if self.features_per_level < 1:
            raise ValueError("features_per_level must be at least 1")
        if self.base_resolution_exp < 1:
            raise ValueError("base_resolution_exp must be at least 1")
        top = self.num_levels - 1 + self.base_resolution_exp
        if top > MAX_RESOLUTION_EXP:
            raise ValueError(
                f"finest resolution 2**{top} exceeds the 2**{MAX_RESOLUTION_EXP} limit"
            )
        if np.dtype(self.dtype) not in (np.dtype(np.float32), np.dtype(np.float64)):
            raise ValueError("dtype must be float32 or float64")

    @property
    def output_dim(self) -> int:
        return self.num_levels * self.features_per_level

    def to_dict(self) -> dict:
        d = {
            "num_levels": self.num_levels,
            "max_rows": self.max_rows,
            "features_per_level": self.features_per_level,
            "base_resolution_exp": self.base_resolution_exp,
            "dtype": self.dtype,
            "init_scale": self.init_scale,
            "probing": None if self.probing is None else self.probing.to_dict(),
        }
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "GridConfig":
        d = dict(d)
        if d.get("probing") is not None:
            d["probing"] = ProbeConfig.from_dict(d["probing"])
        return cls(**d)


def build_levels(config: GridConfig) -> tuple[LevelSpec, ...]:
    """Level schedule: resolution doubles per level, storage is dense while
    the full lattice fits in max_rows and hashed after."""
    levels = []
    for l in range(config.num_levels):
        resolution = 1 << (l + config.base_resolution_exp)
        vertex_count = resolution**3
        dense = vertex_count <= config.max_rows
        rows = vertex_count if dense else config.max_rows
        levels.append(LevelSpec(l, resolution, rows, dense))
    return tuple(levels)


def distinct_vertices(points: np.ndarray, resolution: int) -> np.ndarray:
    """Distinct lattice vertices touched by interpolation at one level,
    as a (m, 3) uint64 array."""
    pts = np.ascontiguousarray(points, dtype=np.float64)
    corners = backends.corner_vertices(pts, resolution).reshape(-1, 3)
    if resolution <= (1 << 21):
        # all three coordinates fit one 63-bit key
        b = np.uint64(21)
        key = corners[:, 0] | (corners[:, 1] << b) | (corners[:, 2] << (b + b))
        key = np.unique(key)
        m = np.uint64((1 << 21) - 1)
        out = np.empty((key.size, 3), dtype=np.uint64)
        out[:, 0] = key & m
        out[:, 1] = (key >> b) & m
        out[:, 2] = key >> (b + b)
        return out
    b = np.uint64(MAX_RESOLUTION_EXP)
    lo = corners[:, 0] | (corners[:, 1] << b)
    pairs = np.unique(np.stack([lo, corners[:, 2]], axis=1), axis=0)
    m = np.uint64((1 << MAX_RESOLUTION_EXP) - 1)
    out = np.empty((pairs.shape[0], 3), dtype=np.uint64)
    out[:, 0] = pairs[:, 0] & m
    out[:, 1] = pairs[:, 0] >> b
    out[:, 2] = pairs[:, 1]
    return out


class HashGrid:
    """One 3D grid: a feature table per level plus optional probe logits on
    hashed levels. Points must lie in the unit cube; anything outside is
    clamped into it and counted in ``clamped_points``."""

    def __init__(self, config: GridConfig, name: str = "grid", rng=None):
        self.config = config
        self.name = name
        self.levels = build_levels(config)
        self.clamped_points = 0
        if rng is None:
            rng = np.random.default_rng(0)
        dtype = np.dtype(config.dtype)
        self.tables: list[Parameter] = []
        for spec in self.levels:
            values = rng.uniform(
                -config.init_scale,
                config.init_scale,
                size=(spec.rows, config.features_per_level),
            ).astype(dtype)
            self.tables.append(Parameter(f"{name}.level{spec.index:02d}.table", values))
        self.probe_logits: dict[int, Parameter] = {}
        if config.probing is not None:
            shape = (config.probing.table_rows, config.probing.num_probes)
            for spec in self.levels:
                if not spec.dense:
                    self.probe_logits[spec.index] = Parameter(
                        f"{name}.level{spec.index:02d}.probe_logits",
                        np.zeros(shape, dtype=dtype),
                    )

    @property
    def output_dim(self) -> int:
        return self.config.output_dim

    def parameters(self) -> list[Parameter]:
        params = list(self.tables)
        params.extend(self.probe_logits[i] for i in sorted(self.probe_logits))
        return params

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.zero_grad()

    def _prepare(self, points: np.ndarray, count: bool) -> np.ndarray:
        pts = np.ascontiguousarray(points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise ValueError(f"expected points of shape (n, 3), got {pts.shape}")
        outside = (pts < 0.0) | (pts >= 1.0)
        if outside.any():
            if count:
                self.clamped_points += int(np.count_nonzero(outside.any(axis=1)))
            pts = np.clip(pts, 0.0, _ONE_BELOW)
        return pts

    def encode(self, points: np.ndarray, hard: bool = False) -> np.ndarray:
        """Features for points (n, 3) in [0, 1)^3, shape (n, output_dim),
        level-major. ``hard`` switches probed levels from softmax mixing to
        argmax row selection."""
        pts = self._prepare(points, count=True)
        nf = self.config.features_per_level
        out = np.empty(
            (pts.shape[0], self.output_dim), dtype=np.dtype(self.config.dtype)
        )
        for spec in self.levels:
            table = self.tables[spec.index].values
            probe = self.probe_logits.get(spec.index)
            if probe is None:
                feats = backends.level_forward(pts, spec.resolution, spec.dense, table)
            else:
                feats = backends.probed_level_forward(
                    pts,
                    spec.resolution,
                    table,
                    probe.values,
                    self.config.probing.tau,
                    hard,
                )
            out[:, spec.index * nf : (spec.index + 1) * nf] = feats
        return out

    def encode_backward(
        self, points: np.ndarray, upstream: np.ndarray, hard: bool = False
    ) -> None:
        """Accumulate gradients of sum(upstream * encode(points)) into the
        table (and, in soft mode, probe logit) gradient buffers."""
        pts = self._prepare(points, count=False)
        nf = self.config.features_per_level
        if upstream.shape != (pts.shape[0], self.output_dim):
            raise ValueError(
                f"expected upstream of shape {(pts.shape[0], self.output_dim)}, "
                f"got {upstream.shape}"
            )
        for spec in self.levels:
            table = self.tables[spec.index]
            up = upstream[:, spec.index * nf : (spec.index + 1) * nf]
            probe = self.probe_logits.get(spec.index)
            if probe is None:
                backends.level_backward(
                    pts, spec.resolution, spec.dense, up, table.ensure_grad()
                )
            else:
                backends.probed_level_backward(
                    pts,
                    spec.resolution,
                    table.values,
                    probe.values,
                    self.config.probing.tau,
                    hard,
                    up,
                    table.ensure_grad(),
                    None if hard else probe.ensure_grad(),
                )

    def feature_count(self) -> int:
        return sum(p.values.size for p in self.tables)

    def probe_count(self) -> int:
        return sum(p.values.size for p in self.probe_logits.values())
