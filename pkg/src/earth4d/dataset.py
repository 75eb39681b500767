"""Sample container, strict CSV ingestion, and train/validation splits."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .geocoords import NormalizationConfig, parse_time

REQUIRED_COLUMNS = ("latitude", "longitude", "elevation_m", "time", "species", "target")


@dataclass
class SampleSet:
    latitude: np.ndarray
    longitude: np.ndarray
    elevation_m: np.ndarray
    time_s: np.ndarray
    species: list
    target: np.ndarray

    def __len__(self) -> int:
        return self.latitude.shape[0]

    def subset(self, idx) -> "SampleSet":
        idx = np.asarray(idx)
        return SampleSet(
            latitude=self.latitude[idx],
            longitude=self.longitude[idx],
            elevation_m=self.elevation_m[idx],
            time_s=self.time_s[idx],
            species=[self.species[i] for i in idx],
            target=self.target[idx],
        )


def _check_range(name: str, value: float, lo: float, hi: float, hi_open: bool):
    if hi_open:
        ok = lo <= value < hi
        span = f"[{lo}, {hi})"
    else:
        ok = lo <= value <= hi
        span = f"[{lo}, {hi}]"
    if not ok:
        raise DomainError(f"{name} {value!r} outside {span}")


def _load(path, cfg: NormalizationConfig, skip_bad: bool, need_labels: bool):
    required = REQUIRED_COLUMNS if need_labels else REQUIRED_COLUMNS[:4]
    lat, lon, elev, time_s, species, target = [], [], [], [], [], []
    skipped: list[str] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DomainError(f"{path}: empty file, expected a header row")
        columns = [c.strip().casefold() for c in header]
        missing = [c for c in required if c not in columns]
        extra = [c for c in columns if c not in REQUIRED_COLUMNS]
        if missing or extra:
            parts = []
            if missing:
                parts.append(f"missing columns {missing}")
            if extra:
                parts.append(f"unexpected columns {extra}")
            raise DomainError(f"{path}: {'; '.join(parts)}")
        at = {c: columns.index(c) for c in columns}
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            try:
                if len(row) != len(columns):
                    raise DomainError(f"expected {len(columns)} fields, got {len(row)}")
                la = float(row[at["latitude"]])
                lo_ = float(row[at["longitude"]])
                el = float(row[at["elevation_m"]])
                ts = parse_time(row[at["time"]])
                _check_range("latitude", la, -90.0, 90.0, hi_open=False)
                _check_range("longitude", lo_, -180.0, 180.0, hi_open=True)
                _check_range(
                    "elevation_m",
                    el,
                    cfg.elevation_min_m,
                    cfg.elevation_max_m,
                    hi_open=False,
                )
                _check_range("time", ts, cfg.time_start_s, cfg.time_end_s, hi_open=True)
                if need_labels:
                    tg = float(row[at["target"]])
                    if not np.isfinite(tg):
                        raise DomainError(f"target {row[at['target']]!r} is not finite")
            except (ValueError, DomainError) as exc:
                message = f"line {line_no}: {exc}"
                if skip_bad:
                    skipped.append(message)
                    continue
                raise DomainError(f"{path}: {message}") from None
            lat.append(la)
            lon.append(lo_)
            elev.append(el)
            time_s.append(ts)
            if need_labels:
                species.append(row[at["species"]])
                target.append(tg)
    coords = (
        np.array(lat, dtype=np.float64),
        np.array(lon, dtype=np.float64),
        np.array(elev, dtype=np.float64),
        np.array(time_s, dtype=np.float64),
    )
    return coords, species, np.array(target, dtype=np.float64), skipped


def read_csv(
    path,
    normalization: NormalizationConfig | None = None,
    skip_bad: bool = False,
):
    """Load labeled samples from a CSV with exactly the columns
    latitude, longitude, elevation_m, time, species, target (any order,
    case-insensitive). Returns (SampleSet, skipped) where skipped lists one
    "line N: reason" entry per rejected row; without skip_bad the first bad
    row raises DomainError instead."""
    cfg = normalization if normalization is not None else NormalizationConfig()
    coords, species, target, skipped = _load(path, cfg, skip_bad, need_labels=True)
    samples = SampleSet(
        latitude=coords[0],
        longitude=coords[1],
        elevation_m=coords[2],
        time_s=coords[3],
        species=species,
        target=target,
    )
    return samples, skipped


def read_points_csv(
    path,
    normalization: NormalizationConfig | None = None,
    skip_bad: bool = False,
):
    """Load coordinate rows for encoding: requires latitude, longitude,
    elevation_m, time and tolerates species/target columns alongside.
    Returns ((lat, lon, elev, time_s), skipped)."""
    cfg = normalization if normalization is not None else NormalizationConfig()
    coords, _, _, skipped = _load(path, cfg, skip_bad, need_labels=False)
    return coords, skipped


def write_predictions_csv(path, samples: SampleSet, predictions: np.ndarray) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([*REQUIRED_COLUMNS, "prediction"])
        for i in range(len(samples)):
            writer.writerow(
                [
                    repr(float(samples.latitude[i])),
                    repr(float(samples.longitude[i])),
                    repr(float(samples.elevation_m[i])),
                    repr(float(samples.time_s[i])),
                    samples.species[i],
                    repr(float(samples.target[i])),
                    repr(float(predictions[i])),
                ]
            )


def split_random(n: int, val_fraction: float, seed: int):
    """Seeded random split into (train_idx, val_idx)."""
    if not 0.0 < val_fraction < 1.0:
        raise ValueError("val_fraction must be in (0, 1)")
    order = np.random.default_rng(seed).permutation(n)
    n_val = max(1, int(round(n * val_fraction)))
    if n_val >= n:
        raise ValueError("val_fraction leaves no training samples")
    return np.sort(order[n_val:]), np.sort(order[:n_val])


def split_spatial_blocks(
    latitude: np.ndarray,
    longitude: np.ndarray,
    val_fraction: float,
    seed: int,
    block_deg: float = 1.0,
):
    """Split on lat/lon blocks so validation sites are spatially disjoint
    from training sites. Whole blocks go to validation until it holds at
    least val_fraction of the samples."""
    if not 0.0 < val_fraction < 1.0:
        raise ValueError("val_fraction must be in (0, 1)")
    n = latitude.shape[0]
    bi = np.floor((np.asarray(latitude) + 90.0) / block_deg).astype(np.int64)
    bj = np.floor((np.asarray(longitude) + 180.0) / block_deg).astype(np.int64)
    block = bi * 1_000_000 + bj
    unique_blocks, counts = np.unique(block, return_counts=True)
    if unique_blocks.size < 2:
        raise ValueError("need at least 2 spatial blocks to split; shrink block_deg")
    order = np.random.default_rng(seed).permutation(unique_blocks.size)
    goal = val_fraction * n
    val_blocks = []
    total = 0
    for k in order:
        if total >= goal or len(val_blocks) == unique_blocks.size - 1:
            break
        val_blocks.append(unique_blocks[k])
        total += counts[k]
    mask = np.isin(block, val_blocks)
    return np.nonzero(~mask)[0], np.nonzero(mask)[0]
