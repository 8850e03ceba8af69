import struct

import numpy as np
import pytest

from jointscreen import Observation, data_io, unit_normalize


def test_csv_round_trip_dictionary(rng, tmp_path):
    d = unit_normalize(rng.normal(size=(7, 11)))
    path = tmp_path / "dict.csv"
    data_io.save_dictionary(path, d)
    loaded = data_io.load_dictionary(path)
    np.testing.assert_array_equal(loaded.atoms, d.atoms)


def test_binary_round_trip_dictionary(rng, tmp_path):
    d = unit_normalize(rng.normal(size=(5, 9)))
    path = tmp_path / "dict.bin"
    data_io.save_dictionary(path, d, binary=True)
    loaded = data_io.load_dictionary(path)
    np.testing.assert_array_equal(loaded.atoms, d.atoms)


def test_observation_round_trips(rng, tmp_path):
    obs = Observation(rng.normal(size=6))
    for name, binary in (("obs.csv", False), ("obs.bin", True)):
        path = tmp_path / name
        data_io.save_observation(path, obs, binary=binary)
        np.testing.assert_array_equal(data_io.load_observation(path).y, obs.y)


def test_binary_layout_is_little_endian_column_major(tmp_path):
    mat = np.array([[1.0, 3.0], [2.0, 4.0]])
    path = tmp_path / "mat.bin"
    data_io.save_matrix_binary(path, mat)
    raw = path.read_bytes()
    m, n = struct.unpack_from("<QQ", raw)
    assert (m, n) == (2, 2)
    values = struct.unpack_from("<4d", raw, 16)
    assert values == (1.0, 2.0, 3.0, 4.0)  # column-major walk


def test_csv_uses_dot_decimal_separator(tmp_path):
    path = tmp_path / "m.csv"
    data_io.save_matrix_csv(path, np.array([[0.5, -1.25]]))
    assert path.read_text(encoding="utf-8") == "0.5,-1.25\n"


def test_truncated_binary_rejected(tmp_path):
    path = tmp_path / "bad.bin"
    path.write_bytes(struct.pack("<QQ", 3, 3) + b"\x00" * 10)
    with pytest.raises(ValueError, match="expected"):
        data_io.load_matrix_binary(path)


def test_ragged_csv_rejected(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("1.0,2.0\n3.0\n", encoding="utf-8")
    with pytest.raises(ValueError, match="ragged"):
        data_io.load_matrix_csv(path)


def test_observation_requires_single_column(tmp_path):
    path = tmp_path / "two.csv"
    data_io.save_matrix_csv(path, np.ones((3, 2)))
    with pytest.raises(ValueError, match="single column"):
        data_io.load_observation(path)
