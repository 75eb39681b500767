"""Learned hash probing: per-vertex choice among consecutive table rows.

Every hashed vertex gets a base row from the spatial hash and a probe row
from an independent hash into a small logit table. The logits score the
``num_probes`` candidate rows ``(base + k) & mask``; training mixes them
with a softmax (soft mode) while inference takes the argmax (hard mode).
Vertices sharing a probe row share one decision, which keeps the logit
table small. ``greedy_probe_logits`` builds a collision-minimizing
assignment directly, without training.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import backends


@dataclass(frozen=True)
class ProbeConfig:
    num_probes: int = 8
    table_rows: int = 1 << 16
    tau: float = 1.0

    def __post_init__(self):
        if self.num_probes < 1:
            raise ValueError("num_probes must be at least 1")
        if self.table_rows < 1 or self.table_rows & (self.table_rows - 1):
            raise ValueError("table_rows must be a power of two")
        if not self.tau > 0:
            raise ValueError("tau must be positive")

    def to_dict(self) -> dict:
        return {
            "num_probes": self.num_probes,
            "table_rows": self.table_rows,
            "tau": self.tau,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ProbeConfig":
        return cls(**d)


def assigned_rows(
    vertices: np.ndarray,
    table_rows: int,
    logits: np.ndarray | None = None,
) -> np.ndarray:
    """Hard-mode table row for each vertex (n, 3). Without logits this is
    the plain spatial hash."""
    base = backends.spatial_hash(vertices, table_rows)
    if logits is None:
        return base
    probe_rows = backends.probe_hash(vertices, logits.shape[0])
    k = np.argmax(logits[probe_rows], axis=-1).astype(np.uint64)
    return (base + k) & np.uint64(table_rows - 1)


def collision_rate(
    vertices: np.ndarray,
    table_rows: int,
    logits: np.ndarray | None = None,
) -> float:
    """1 - occupied_rows / distinct_vertices for already-distinct vertices."""
    if vertices.shape[0] == 0:
        return 0.0
    rows = assigned_rows(vertices, table_rows, logits)
    occupied = np.unique(rows).size
    return 1.0 - occupied / vertices.shape[0]


def greedy_probe_logits(
    vertices: np.ndarray,
    table_rows: int,
    config: ProbeConfig,
    dtype=np.float32,
    margin: float = 8.0,
) -> np.ndarray:
    """Greedy collision-minimizing logits for one level's distinct vertices.

    Vertices are grouped by probe row and groups are processed largest
    first. Each group picks the offset that lands the most of its vertices
    on rows nobody occupies yet, ties going to the lowest offset. The
    winning offset gets ``margin`` added to its logit so both argmax and a
    unit-temperature softmax concentrate on it.
    """
    logits = np.zeros((config.table_rows, config.num_probes), dtype=dtype)
    if vertices.shape[0] == 0:
        return logits
    mask = np.uint64(table_rows - 1)
    base = backends.spatial_hash(vertices, table_rows)
    probe_rows = backends.probe_hash(vertices, config.table_rows)

    order = np.argsort(probe_rows, kind="stable")
    sorted_rows = probe_rows[order]
    group_ids, starts, counts = np.unique(
        sorted_rows, return_index=True, return_counts=True
    )
    # largest groups first; equal sizes in probe-row order for determinism
    by_size = np.lexsort((group_ids, -counts))

    occupied = np.zeros(table_rows, dtype=bool)
    for gi in by_size:
        members = order[starts[gi] : starts[gi] + counts[gi]]
        group_base = base[members]
        best_k = 0
        best_new = -1
        for k in range(config.num_probes):
            cand = (group_base + np.uint64(k)) & mask
            new = np.count_nonzero(~occupied[np.unique(cand)])
            if new > best_new:
                best_new = new
                best_k = k
        logits[group_ids[gi], best_k] = margin
        occupied[(group_base + np.uint64(best_k)) & mask] = True
    return logits
