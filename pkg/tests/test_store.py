import json
import os

import numpy as np
import pandas as pd
import pytest

from sky_nowcast.errors import DataError
from sky_nowcast.infra.store import (
    INGEST_INDEX,
    ArtifactStore,
    IngestEntry,
    StoreLockedError,
    file_sha1,
    tensor_name,
)


@pytest.mark.asyncio
async def test_exclusive_lock_is_released(tmp_path):
    store = ArtifactStore(tmp_path / "out")
    async with store.exclusive():
        assert store.exists(".sky_nowcast.lock")
        with pytest.raises(StoreLockedError):
            async with ArtifactStore(tmp_path / "out").exclusive():
                pass
    assert not store.exists(".sky_nowcast.lock")
    async with store.exclusive():
        pass


@pytest.mark.asyncio
async def test_atomic_writes_leave_no_temporary_files(tmp_path):
    store = ArtifactStore(tmp_path)
    await store.write_json("report.json", {"rmse": 12.5})
    await store.write_csv("nested/pairs.csv", pd.DataFrame({"a": [1, 2]}))
    assert store.read_json("report.json") == {"rmse": 12.5}
    assert store.read_csv("nested/pairs.csv")["a"].tolist() == [1, 2]
    assert not list(tmp_path.rglob("*.tmp"))


def test_missing_artifacts_are_data_errors(tmp_path):
    store = ArtifactStore(tmp_path)
    with pytest.raises(DataError):
        store.read_csv("pairs.csv")
    with pytest.raises(DataError):
        store.read_json("split.json")
    (tmp_path / "split.json").write_text("{")
    with pytest.raises(DataError):
        store.read_json("split.json")


@pytest.mark.asyncio
async def test_ingest_index_round_trip(tmp_path):
    store = ArtifactStore(tmp_path / "out")
    assert store.load_ingest_index() == {}
    source = tmp_path / "img.png"
    source.write_bytes(b"pixels")
    stat = source.stat()
    entry = IngestEntry(path="img.png", sha1=file_sha1(source), mtime=stat.st_mtime, size=stat.st_size)
    await store.save_ingest_index({"img.png": entry}, root=tmp_path)
    assert store.load_ingest_index() == {"img.png": entry}
    assert store.ingest_root() == tmp_path.resolve()
    payload = json.loads(store.path(INGEST_INDEX).read_text())
    assert payload["files"][0]["sha1"] == entry.sha1


@pytest.mark.asyncio
async def test_ingest_index_without_root(tmp_path):
    store = ArtifactStore(tmp_path)
    await store.save_ingest_index({})
    with pytest.raises(DataError):
        store.ingest_root()
    store.path(INGEST_INDEX).write_text("not json")
    assert store.load_ingest_index() == {}


def test_tensor_directory_reads_lazily(tmp_path):
    store = ArtifactStore(tmp_path)
    pixels = np.full((4, 4, 3), 9, dtype=np.uint8)
    store.save_tensor("site/a.png", pixels)
    assert tensor_name("site/a.png") == "site__a.png.skyt"
    frames = store.tensors(["site/a.png", "site/a.png", "site/b.png"])
    assert len(frames) == 2
    assert "site/a.png" in frames
    assert np.array_equal(frames["site/a.png"], pixels)
    with pytest.raises(KeyError):
        frames["site/c.png"]
    assert frames.get_path("site/c.png") is None
    assert os.path.basename(frames.get_path("site/a.png")) == "site__a.png.skyt"
