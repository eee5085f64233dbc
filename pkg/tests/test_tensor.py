import numpy as np
import pytest

from sky_nowcast.imaging.tensor import (
    HEADER_SIZE,
    TensorFormatError,
    decode_tensor,
    encode_tensor,
    read_tensor,
    write_tensor,
)


def test_header_layout():
    pixels = np.arange(2 * 3 * 4, dtype=np.uint8).reshape(2, 3, 4)
    payload = encode_tensor(pixels)
    assert payload[:4] == b"SKYT"
    assert len(payload) == HEADER_SIZE + pixels.size
    assert int.from_bytes(payload[8:12], "little") == 2
    assert int.from_bytes(payload[12:16], "little") == 3
    assert int.from_bytes(payload[16:20], "little") == 4
    assert payload[HEADER_SIZE:] == pixels.tobytes()
    assert np.array_equal(decode_tensor(payload), pixels)


def test_write_and_read(tmp_path):
    pixels = np.full((64, 64, 3), 7, dtype=np.uint8)
    path = tmp_path / "nested" / "frame.skyt"
    write_tensor(path, pixels)
    assert np.array_equal(read_tensor(path), pixels)
    assert not list(path.parent.glob("*.tmp"))


def test_encode_rejects_other_dtypes():
    with pytest.raises(TensorFormatError):
        encode_tensor(np.zeros((2, 2, 3), dtype=np.float32))
    with pytest.raises(TensorFormatError):
        encode_tensor(np.zeros((2, 2), dtype=np.uint8))


@pytest.mark.parametrize(
    "mutate",
    [
        lambda payload: payload[:10],
        lambda payload: b"XXXX" + payload[4:],
        lambda payload: payload[:4] + (2).to_bytes(2, "little") + payload[6:],
        lambda payload: payload[:-1],
    ],
)
def test_decode_rejects_malformed_payloads(mutate):
    payload = encode_tensor(np.zeros((2, 2, 3), dtype=np.uint8))
    with pytest.raises(TensorFormatError):
        decode_tensor(mutate(payload))


def test_read_missing_file(tmp_path):
    with pytest.raises(TensorFormatError):
        read_tensor(tmp_path / "absent.skyt")
