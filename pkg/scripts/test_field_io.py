#!/usr/bin/env python3
"""
Tests for the binary field format, CSV exports and atomic writes
"""

import os
import struct
import sys

import numpy as np
import pytest

sys.path.append(os.path.join(os.path.dirname(__file__), '..', 'services', 'olim'))

from app.errors import FieldFormatError
from app.field_io import (
    HEADER_SIZE,
    MAGIC,
    atomic_open,
    file_sha256,
    list_outputs,
    read_field,
    read_field_csv,
    write_field,
    write_field_csv,
    write_pair_field,
    write_path_csv,
    write_text,
)
from app.grid_core import Domain, Grid
from app.postproc import Path


@pytest.fixture
def grid():
    return Grid(nx=7, ny=5, domain=Domain(xmin=-3.8, xmax=4.2, ymin=-4.0, ymax=4.0))


@pytest.fixture
def field(grid):
    rng = np.random.default_rng(9)
    u = rng.uniform(0, 4, size=grid.shape)
    u[0, :3] = np.inf
    u[4, 6] = np.nan
    u[2, 2] = 1.0 / 3.0
    return u


def test_scalar_field_round_trip_is_bit_exact(tmp_path, grid, field):
    path = tmp_path / "u.qpf"
    write_field(path, field, grid)
    assert os.path.getsize(path) == HEADER_SIZE + grid.n_nodes * 8
    record = read_field(path)
    assert not record.is_pair
    assert record.grid == grid
    assert np.array_equal(record.data.view(np.uint64), field.view(np.uint64))


def test_header_layout(tmp_path, grid, field):
    path = tmp_path / "u.qpf"
    write_field(path, field, grid)
    raw = path.read_bytes()
    assert raw[:8] == MAGIC
    assert struct.unpack_from("<II", raw, 8) == (7, 5)
    assert struct.unpack_from("<4d", raw, 16) == (-3.8, 4.2, -4.0, 4.0)
    assert raw[48] == 1
    assert raw[49:HEADER_SIZE] == b"\x00" * (HEADER_SIZE - 49)


def test_pair_field_round_trip(tmp_path, grid, field):
    path = tmp_path / "grad.qpf"
    write_pair_field(path, field, -field, grid)
    record = read_field(path)
    assert record.is_pair
    assert record.data.shape == grid.shape + (2,)
    assert np.array_equal(record.data[..., 0], field, equal_nan=True)
    assert np.array_equal(record.data[..., 1], -field, equal_nan=True)


def test_shape_mismatch_rejected(tmp_path, grid):
    with pytest.raises(FieldFormatError):
        write_field(tmp_path / "bad.qpf", np.zeros((7, 5)), grid)
    assert not (tmp_path / "bad.qpf").exists()


def test_truncated_file(tmp_path, grid, field):
    path = tmp_path / "u.qpf"
    write_field(path, field, grid)
    raw = path.read_bytes()
    path.write_bytes(raw[:-8])
    with pytest.raises(FieldFormatError):
        read_field(path)
    path.write_bytes(raw[:20])
    with pytest.raises(FieldFormatError):
        read_field(path)
    path.write_bytes(raw + b"\x00" * 8)
    with pytest.raises(FieldFormatError):
        read_field(path)


def test_bad_magic_and_tag(tmp_path, grid, field):
    path = tmp_path / "u.qpf"
    write_field(path, field, grid)
    raw = bytearray(path.read_bytes())
    bad = bytearray(raw)
    bad[:8] = b"NOTAFILE"
    path.write_bytes(bytes(bad))
    with pytest.raises(FieldFormatError) as exc:
        read_field(path)
    assert "magic" in str(exc.value)
    bad = bytearray(raw)
    bad[48] = 7
    path.write_bytes(bytes(bad))
    with pytest.raises(FieldFormatError):
        read_field(path)


def test_invalid_grid_in_header(tmp_path):
    header = struct.pack("<8sII4dB", MAGIC, 1, 3, 0.0, 1.0, 0.0, 1.0, 1)
    header += b"\x00" * (HEADER_SIZE - len(header))
    path = tmp_path / "tiny.qpf"
    path.write_bytes(header + np.zeros(3).tobytes())
    with pytest.raises(FieldFormatError):
        read_field(path)


def test_missing_file(tmp_path):
    with pytest.raises(FieldFormatError):
        read_field(tmp_path / "absent.qpf")


def test_field_csv_keeps_full_precision(tmp_path, grid, field):
    path = tmp_path / "u.csv"
    write_field_csv(path, field, grid)
    assert path.read_text().splitlines()[0] == "x,y,u"
    rows = read_field_csv(path)
    finite = np.isfinite(field)
    assert rows.shape == (int(finite.sum()), 3)
    X, Y = grid.mesh()
    assert np.array_equal(rows[:, 2], field[finite])
    assert np.array_equal(rows[:, 0], X[finite])
    assert "0.3333333333333333" in path.read_text()


def test_path_csv(tmp_path):
    path = Path(np.array([[0.0, 0.0], [3.0, 4.0]]))
    out = tmp_path / "map_0.csv"
    write_path_csv(path, out)
    rows = read_field_csv(out)
    assert out.read_text().splitlines()[0] == "x,y,arclength"
    assert np.allclose(rows[-1], [3.0, 4.0, 5.0])


def test_failed_atomic_write_leaves_nothing(tmp_path):
    target = tmp_path / "report.txt"
    with pytest.raises(RuntimeError):
        with atomic_open(target, "w") as fh:
            fh.write("partial")
            raise RuntimeError("boom")
    assert not target.exists()
    assert os.listdir(tmp_path) == []


def test_atomic_write_replaces_existing(tmp_path):
    target = tmp_path / "report.txt"
    write_text(target, "first\n")
    write_text(target, "second\n")
    assert target.read_text() == "second\n"
    assert list_outputs(tmp_path) == ["report.txt"]


def test_listing_and_checksums(tmp_path):
    write_text(tmp_path / "b.txt", "abc")
    write_text(tmp_path / "a.txt", "abc")
    (tmp_path / ".tmp-leftover").write_text("x")
    (tmp_path / "sub").mkdir()
    assert list_outputs(tmp_path) == ["a.txt", "b.txt"]
    assert file_sha256(tmp_path / "a.txt") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"


def main():
    print("🧪 Field I/O tests")
    print("=" * 50)
    code = pytest.main([__file__, "-q"])
    print("✅ All field I/O tests passed" if code == 0 else "❌ Field I/O tests failed")
    sys.exit(code)


if __name__ == "__main__":
    main()
