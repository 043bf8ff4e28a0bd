import os

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hartree5d.grid import make_grid
from hartree5d.io import (
    FORMAT_VERSION,
    MAGIC,
    FieldFileError,
    atomic_write_bytes,
    decode_field,
    encode_field,
    load_field,
    load_field_csv,
    save_field,
    sha256_file,
    write_csv,
)

G = make_grid(64, 10.0)


def test_real_roundtrip_is_bit_exact(tmp_path):
    f = np.exp(-G.nodes) * np.cos(3 * G.nodes)
    path = save_field(G, f, tmp_path / "f.bin")
    grid, back = load_field(path, G)
    assert grid.same_as(G)
    assert back.tobytes() == f.tobytes()
    assert not np.iscomplexobj(back)


def test_complex_roundtrip_is_bit_exact(tmp_path):
    f = np.exp(-G.nodes) * np.exp(1j * G.nodes)
    _, back = load_field(save_field(G, f, tmp_path / "c.bin"))
    assert np.iscomplexobj(back)
    assert back.real.tobytes() == f.real.tobytes()
    assert back.imag.tobytes() == f.imag.tobytes()


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(allow_nan=False, allow_infinity=False, width=64), min_size=64, max_size=64))
def test_csv_twin_roundtrips_float64(tmp_path_factory, values):
    f = np.array(values)
    path = save_field(G, f, tmp_path_factory.mktemp("csv") / "f.bin")
    nodes, back = load_field_csv(path.with_suffix(".csv"))
    assert nodes.tobytes() == G.nodes.tobytes()
    assert back.tobytes() == f.tobytes()


def test_complex_csv_twin(tmp_path):
    f = (1 + 2j) * np.exp(-G.nodes)
    path = save_field(G, f, tmp_path / "c.bin")
    assert path.with_suffix(".csv").read_text().splitlines()[0] == "r,real,imag"
    _, back = load_field_csv(path.with_suffix(".csv"))
    assert np.array_equal(back, f)


def test_no_csv_twin_when_disabled(tmp_path):
    path = save_field(G, np.ones(64), tmp_path / "f.bin", csv_twin=False)
    assert not path.with_suffix(".csv").exists()


def test_other_grid_is_refused_without_interpolation(tmp_path):
    path = save_field(G, np.ones(64), tmp_path / "f.bin")
    with pytest.raises(FieldFileError, match="no interpolation"):
        load_field(path, make_grid(128, 10.0))
    with pytest.raises(FieldFileError, match="grid mismatch"):
        load_field(path, make_grid(64, 12.0))


def test_shape_mismatch_on_encode():
    with pytest.raises(FieldFileError):
        encode_field(G, np.ones(63))


def test_truncated_files():
    data = encode_field(G, np.ones(64))
    with pytest.raises(FieldFileError, match="incomplete header"):
        decode_field(data[:10])
    with pytest.raises(FieldFileError, match="truncated"):
        decode_field(data[:-8])
    with pytest.raises(FieldFileError, match="oversized"):
        decode_field(data + b"\0" * 8)


def test_bad_magic_version_and_flag():
    data = bytearray(encode_field(G, np.ones(64)))
    assert bytes(data[:8]) == MAGIC
    bad = bytes(b"X" + data[1:])
    with pytest.raises(FieldFileError, match="magic"):
        decode_field(bad)
    versioned = bytearray(data)
    versioned[8:12] = (FORMAT_VERSION + 1).to_bytes(4, "little")
    with pytest.raises(FieldFileError, match="version"):
        decode_field(bytes(versioned))
    flagged = bytearray(data)
    flagged[24] = 7
    with pytest.raises(FieldFileError, match="flag"):
        decode_field(bytes(flagged))


def test_atomic_write_leaves_no_temporaries(tmp_path):
    target = tmp_path / "sub" / "out.bin"
    atomic_write_bytes(target, b"first")
    atomic_write_bytes(target, b"second")
    assert target.read_bytes() == b"second"
    assert os.listdir(target.parent) == ["out.bin"]


def test_atomic_write_cleans_up_on_failure(tmp_path):
    class Boom:
        def __len__(self):
            return 1

    with pytest.raises(TypeError):
        atomic_write_bytes(tmp_path / "x.bin", Boom())
    assert os.listdir(tmp_path) == []


def test_csv_uses_seventeen_digits(tmp_path):
    path = write_csv(tmp_path / "t.csv", ["a", "b"], [(0.1, 3)])
    assert path.read_text() == "a,b\n0.10000000000000001,3\n"


def test_digest_changes_with_content(tmp_path):
    a = atomic_write_bytes(tmp_path / "a", b"x")
    b = atomic_write_bytes(tmp_path / "b", b"x")
    c = atomic_write_bytes(tmp_path / "c", b"y")
    assert sha256_file(a) == sha256_file(b) != sha256_file(c)


def test_unknown_csv_header(tmp_path):
    path = write_csv(tmp_path / "t.csv", ["x", "y"], [(1.0, 2.0)])
    with pytest.raises(FieldFileError):
        load_field_csv(path)
