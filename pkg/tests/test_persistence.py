import json
import struct

import numpy as np
import pytest

from earth4d.encoder import Earth4DConfig
from earth4d.errors import CheckpointError
from earth4d.hashgrid import GridConfig
from earth4d.optim import Adam
from earth4d.persistence import MAGIC, load_checkpoint, save_checkpoint
from earth4d.probing import ProbeConfig
from earth4d.regressor import LFMCRegressor, RegressorConfig

CFG = Earth4DConfig(
    grid=GridConfig(
        num_levels=4, max_rows=1 << 12, probing=ProbeConfig(table_rows=1 << 10)
    )
)
SPECIES = ("quercus alba", "pinus ponderosa")


def _build(seed=7):
    return LFMCRegressor.build(
        CFG, species_names=SPECIES, config=RegressorConfig(), seed=seed
    )


def _batch(rng, n=16):
    points4 = rng.random((n, 4))
    species_idx = rng.integers(0, len(SPECIES) + 1, size=n)
    return points4, species_idx


def test_round_trip_bitwise(tmp_path):
    rng = np.random.default_rng(0)
    model = _build()
    path = tmp_path / "model.e4d"
    save_checkpoint(path, model)

    loaded = load_checkpoint(path)
    twin = loaded["regressor"]
    assert loaded["optimizer"] is None
    assert twin.species.names == model.species.names

    by_name = {p.name: p for p in twin.parameters()}
    for p in model.parameters():
        q = by_name[p.name]
        assert q.values.dtype == p.values.dtype
        assert np.array_equal(q.values, p.values)

    points4, species_idx = _batch(rng)
    for hard in (False, True):
        a = model.predict(points4, species_idx, hard=hard)
        b = twin.predict(points4, species_idx, hard=hard)
        assert np.array_equal(a, b)


def test_optimizer_round_trip_resumes_identically(tmp_path):
    rng = np.random.default_rng(1)
    points4, species_idx = _batch(rng)
    targets = rng.uniform(50.0, 150.0, points4.shape[0])

    model = _build()
    optim = Adam(
        [(model.table_parameters(), 1e-2), (model.network_parameters(), 1e-3)]
    )
    for _ in range(3):
        optim.zero_grad()
        model.forward_backward(points4, species_idx, targets)
        optim.step()

    path = tmp_path / "resume.e4d"
    save_checkpoint(path, model, optimizer=optim)
    loaded = load_checkpoint(path)
    twin, twin_optim = loaded["regressor"], loaded["optimizer"]
    assert twin_optim is not None
    assert twin_optim.step_count == optim.step_count
    assert [lr for _, lr in twin_optim.groups] == [lr for _, lr in optim.groups]

    # two more identical steps on both copies stay bitwise in lockstep
    for _ in range(2):
        for m, o in ((model, optim), (twin, twin_optim)):
            o.zero_grad()
            m.forward_backward(points4, species_idx, targets)
            o.step()
    for p, q in zip(model.parameters(), twin.parameters()):
        assert np.array_equal(p.values, q.values), p.name


def test_extra_payload_round_trip(tmp_path):
    path = tmp_path / "extra.e4d"
    save_checkpoint(path, _build(), extra={"step": 5, "val_mae": 12.5})
    assert load_checkpoint(path)["extra"] == {"step": 5, "val_mae": 12.5}


def _saved_bytes(tmp_path):
    path = tmp_path / "base.e4d"
    save_checkpoint(path, _build())
    return path.read_bytes()


def test_bad_magic_rejected(tmp_path):
    data = _saved_bytes(tmp_path)
    bad = tmp_path / "bad.e4d"
    bad.write_bytes(b"NOPE" + data[4:])
    with pytest.raises(CheckpointError, match="bad magic"):
        load_checkpoint(bad)


def test_unsupported_version_rejected(tmp_path):
    data = _saved_bytes(tmp_path)
    bad = tmp_path / "bad.e4d"
    bad.write_bytes(MAGIC + struct.pack("<I", 99) + data[8:])
    with pytest.raises(CheckpointError, match="version 99"):
        load_checkpoint(bad)


def test_truncated_header_rejected(tmp_path):
    data = _saved_bytes(tmp_path)
    (header_len,) = struct.unpack_from("<Q", data, 8)
    bad = tmp_path / "bad.e4d"
    bad.write_bytes(data[: 16 + header_len // 2])
    with pytest.raises(CheckpointError, match="truncated checkpoint header"):
        load_checkpoint(bad)


def test_truncated_arrays_rejected(tmp_path):
    data = _saved_bytes(tmp_path)
    bad = tmp_path / "bad.e4d"
    bad.write_bytes(data[:-8])
    with pytest.raises(CheckpointError, match="truncated checkpoint data"):
        load_checkpoint(bad)


def test_trailing_bytes_rejected(tmp_path):
    data = _saved_bytes(tmp_path)
    bad = tmp_path / "bad.e4d"
    bad.write_bytes(data + b"\x00")
    with pytest.raises(CheckpointError, match="trailing bytes"):
        load_checkpoint(bad)


def test_missing_array_rejected(tmp_path):
    # drop the last manifest entry and its blob: the rebuilt model then
    # finds no stored values for that parameter
    data = _saved_bytes(tmp_path)
    (header_len,) = struct.unpack_from("<Q", data, 8)
    header = json.loads(data[16 : 16 + header_len].decode("utf-8"))
    removed = header["arrays"].pop()
    nbytes = np.dtype(removed["dtype"]).itemsize * int(np.prod(removed["shape"]))
    encoded = json.dumps(header, sort_keys=True).encode("utf-8")
    bad = tmp_path / "bad.e4d"
    bad.write_bytes(
        MAGIC
        + struct.pack("<I", 1)
        + struct.pack("<Q", len(encoded))
        + encoded
        + data[16 + header_len : len(data) - nbytes]
    )
    with pytest.raises(CheckpointError, match="missing array"):
        load_checkpoint(bad)


def test_corrupt_header_json_rejected(tmp_path):
    data = _saved_bytes(tmp_path)
    (header_len,) = struct.unpack_from("<Q", data, 8)
    bad = tmp_path / "bad.e4d"
    bad.write_bytes(data[:16] + b"{" * header_len + data[16 + header_len :])
    with pytest.raises(CheckpointError, match="corrupt checkpoint header"):
        load_checkpoint(bad)
