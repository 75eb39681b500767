"""Pure-numpy reference kernels for grid indexing, interpolation, and probing.

The compiled core in ``_core.pyx`` mirrors these functions operation for
operation. Accumulation runs corner-major in float64 so the two backends
agree bit for bit on every plain path (probed paths may differ in the last
ulp because exp() and accumulation interleaving are not pinned).
"""

from __future__ import annotations

import numpy as np

# XOR-prime vertex hash of the multi-resolution hash encoding family.
PRIMES = (np.uint64(1), np.uint64(2654435761), np.uint64(805459861))
# Independent triple for probe-slot addressing, so vertices that collide in
# the base table can still receive different probe decisions.
PROBE_PRIMES = (np.uint64(2097192037), np.uint64(1434869437), np.uint64(2165219737))


def spatial_hash(vertices: np.ndarray, table_rows: int) -> np.ndarray:
    """Hash integer vertices (..., 3) to rows of a power-of-two table."""
    v = np.ascontiguousarray(vertices, dtype=np.uint64)
    mask = np.uint64(table_rows - 1)
    h = (v[..., 0] * PRIMES[0]) ^ (v[..., 1] * PRIMES[1]) ^ (v[..., 2] * PRIMES[2])
    return h & mask


def probe_hash(vertices: np.ndarray, table_rows: int) -> np.ndarray:
    v = np.ascontiguousarray(vertices, dtype=np.uint64)
    mask = np.uint64(table_rows - 1)
    h = (
        (v[..., 0] * PROBE_PRIMES[0])
        ^ (v[..., 1] * PROBE_PRIMES[1])
        ^ (v[..., 2] * PROBE_PRIMES[2])
    )
    return h & mask


def dense_index(vertices: np.ndarray, resolution: int) -> np.ndarray:
    """Bijective row index i + N*j + N^2*k for vertices of a dense level."""
    v = np.ascontiguousarray(vertices, dtype=np.uint64)
    n = np.uint64(resolution)
    return v[..., 0] + n * (v[..., 1] + n * v[..., 2])


def base_cells(points: np.ndarray, resolution: int):
    """Split points in [0, 1)^3 into base vertex (n, 3) and fractional
    offset (n, 3). The base vertex is clamped to resolution - 2 so the far
    corner stays inside [0, resolution)."""
    x = points * float(resolution - 1)
    i0 = np.floor(x)
    np.minimum(i0, float(resolution - 2), out=i0)
    frac = x - i0
    return i0.astype(np.uint64), frac


def corner_offset(c: int) -> tuple[int, int, int]:
    return c & 1, (c >> 1) & 1, (c >> 2) & 1


def _corner(i0, frac, c):
    dx, dy, dz = corner_offset(c)
    v = i0 + np.array([dx, dy, dz], dtype=np.uint64)
    w = (
        (frac[:, 0] if dx else 1.0 - frac[:, 0])
        * (frac[:, 1] if dy else 1.0 - frac[:, 1])
        * (frac[:, 2] if dz else 1.0 - frac[:, 2])
    )
    return v, w


def level_forward(
    points: np.ndarray,
    resolution: int,
    dense: bool,
    table: np.ndarray,
) -> np.ndarray:
    """Trilinear interpolation of one level's features at points (n, 3)."""
    i0, frac = base_cells(points, resolution)
    acc = np.zeros((points.shape[0], table.shape[1]), dtype=np.float64)
    for c in range(8):
        v, w = _corner(i0, frac, c)
        rows = dense_index(v, resolution) if dense else spatial_hash(v, table.shape[0])
        acc += w[:, None] * table[rows].astype(np.float64)
    return acc.astype(table.dtype)


def level_backward(
    points: np.ndarray,
    resolution: int,
    dense: bool,
    upstream: np.ndarray,
    grad_table: np.ndarray,
) -> None:
    """Accumulate d(output)/d(table) contributions: each touched row gains
    its trilinear weight times the upstream gradient."""
    i0, frac = base_cells(points, resolution)
    up = upstream.astype(np.float64)
    for c in range(8):
        v, w = _corner(i0, frac, c)
        rows = (
            dense_index(v, resolution)
            if dense
            else spatial_hash(v, grad_table.shape[0])
        )
        contrib = (w[:, None] * up).astype(grad_table.dtype)
        np.add.at(grad_table, rows, contrib)


def _probe_weights(logits: np.ndarray, probe_rows: np.ndarray, tau: float):
    z = logits[probe_rows].astype(np.float64) / tau
    z -= z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def probed_level_forward(
    points: np.ndarray,
    resolution: int,
    table: np.ndarray,
    logits: np.ndarray,
    tau: float,
    hard: bool,
) -> np.ndarray:
    """Interpolation over a hashed level where each corner feature is a
    softmax mixture (soft) or argmax selection (hard) of the candidate rows
    starting at the corner's base hash slot."""
    n = points.shape[0]
    table_rows = table.shape[0]
    mask = np.uint64(table_rows - 1)
    num_probes = logits.shape[1]
    i0, frac = base_cells(points, resolution)
    acc = np.zeros((n, table.shape[1]), dtype=np.float64)
    for c in range(8):
        v, w = _corner(i0, frac, c)
        rows = spatial_hash(v, table_rows)
        pr = probe_hash(v, logits.shape[0])
        if hard:
            k = np.argmax(logits[pr], axis=1).astype(np.uint64)
            acc += w[:, None] * table[(rows + k) & mask].astype(np.float64)
        else:
            s = _probe_weights(logits, pr, tau)
            mix = np.zeros((n, table.shape[1]), dtype=np.float64)
            for k in range(num_probes):
                cand = (rows + np.uint64(k)) & mask
                mix += s[:, k : k + 1] * table[cand].astype(np.float64)
            acc += w[:, None] * mix
    return acc.astype(table.dtype)


def probed_level_backward(
    points: np.ndarray,
    resolution: int,
    table: np.ndarray,
    logits: np.ndarray,
    tau: float,
    hard: bool,
    upstream: np.ndarray,
    grad_table: np.ndarray,
    grad_logits: np.ndarray | None,
) -> None:
    """Exact gradients of the probed lookup w.r.t. candidate-row features
    and (in soft mode) probe logits. Hard mode routes feature gradients
    through the argmax row and leaves logits untouched."""
    n = points.shape[0]
    table_rows = table.shape[0]
    mask = np.uint64(table_rows - 1)
    num_probes = logits.shape[1]
    i0, frac = base_cells(points, resolution)
    up = upstream.astype(np.float64)
    for c in range(8):
        v, w = _corner(i0, frac, c)
        rows = spatial_hash(v, table_rows)
        pr = probe_hash(v, logits.shape[0])
        if hard:
            k = np.argmax(logits[pr], axis=1).astype(np.uint64)
            contrib = (w[:, None] * up).astype(grad_table.dtype)
            np.add.at(grad_table, (rows + k) & mask, contrib)
            continue
        s = _probe_weights(logits, pr, tau)
        # dot(upstream, candidate feature) per probe slot, (n, P)
        g = np.empty((n, num_probes), dtype=np.float64)
        for k in range(num_probes):
            cand = (rows + np.uint64(k)) & mask
            g[:, k] = np.einsum("nf,nf->n", up, table[cand].astype(np.float64))
            contrib = ((w * s[:, k])[:, None] * up).astype(grad_table.dtype)
            np.add.at(grad_table, cand, contrib)
        if grad_logits is not None:
            sg = np.einsum("nk,nk->n", s, g)
            dlogits = ((w / tau)[:, None] * s * (g - sg[:, None])).astype(
                grad_logits.dtype
            )
            np.add.at(grad_logits, pr, dlogits)


def corner_vertices(points: np.ndarray, resolution: int) -> np.ndarray:
    """All 8 interpolation-corner vertices per point, shape (n, 8, 3)."""
    i0, _ = base_cells(points, resolution)
    out = np.empty((points.shape[0], 8, 3), dtype=np.uint64)
    for c in range(8):
        out[:, c, :] = i0 + np.array(corner_offset(c), dtype=np.uint64)
    return out
