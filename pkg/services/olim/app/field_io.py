"""
Field, path and report files.

Binary field layout (little-endian):
    bytes 0-7    b"QPOTFLD1"
    u32 nx, u32 ny
    f64 xmin, xmax, ymin, ymax
    u8  dtype tag (1 = scalar, 2 = pair)
    zero padding up to 64 bytes
    row-major f64 payload, shape (ny, nx) or (ny, nx, 2)
"""

import hashlib
import logging
import os
import struct
import tempfile
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Iterable, Iterator, List, Sequence, Union

import numpy as np

from .errors import FieldFormatError
from .grid_core import Domain, Grid
from .postproc import Path

logger = logging.getLogger(__name__)

MAGIC = b"QPOTFLD1"
HEADER_SIZE = 64
_HEADER = struct.Struct("<8sII4dB")
DTYPE_SCALAR = 1
DTYPE_PAIR = 2


@dataclass
class FieldRecord:
    data: np.ndarray
    grid: Grid

    @property
    def is_pair(self) -> bool:
        return self.data.ndim == 3


@contextmanager
def atomic_open(path: Union[str, os.PathLike], mode: str = "wb") -> Iterator:
    """Write to a sibling temp file and rename it over `path` only on success"""
    directory = os.path.dirname(os.path.abspath(path)) or "."
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=directory)
    try:
        with os.fdopen(fd, mode) as fh:
            yield fh
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.remove(tmp)
        raise


def write_field(path: Union[str, os.PathLike], data: np.ndarray, grid: Grid) -> str:
    arr = np.ascontiguousarray(data, dtype="<f8")
    if arr.shape == grid.shape:
        tag = DTYPE_SCALAR
    elif arr.shape == grid.shape + (2,):
        tag = DTYPE_PAIR
    else:
        raise FieldFormatError(f"field shape {arr.shape} does not match grid {grid.shape}")
    header = _HEADER.pack(MAGIC, grid.nx, grid.ny, *grid.domain.as_tuple(), tag)
    header += b"\x00" * (HEADER_SIZE - len(header))
    with atomic_open(path) as fh:
        fh.write(header)
        fh.write(arr.tobytes(order="C"))
    logger.debug(f"wrote field {path} ({grid.nx}x{grid.ny}, tag {tag})")
    return str(path)


def write_pair_field(path, first: np.ndarray, second: np.ndarray, grid: Grid) -> str:
    return write_field(path, np.stack([first, second], axis=-1), grid)


def read_field(path: Union[str, os.PathLike]) -> FieldRecord:
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as e:
        raise FieldFormatError(f"cannot read field file {path}: {e}")
    if len(raw) < HEADER_SIZE:
        raise FieldFormatError(f"{path}: truncated header ({len(raw)} bytes)")
    magic, nx, ny, xmin, xmax, ymin, ymax, tag = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise FieldFormatError(f"{path}: bad magic {magic!r}")
    if tag not in (DTYPE_SCALAR, DTYPE_PAIR):
        raise FieldFormatError(f"{path}: unknown dtype tag {tag}")
    per_node = 1 if tag == DTYPE_SCALAR else 2
    expected = HEADER_SIZE + nx * ny * per_node * 8
    if len(raw) != expected:
        raise FieldFormatError(f"{path}: payload is {len(raw) - HEADER_SIZE} bytes, "
                               f"expected {expected - HEADER_SIZE} for {nx}x{ny}")
    try:
        grid = Grid(nx=nx, ny=ny, domain=Domain(xmin=xmin, xmax=xmax, ymin=ymin, ymax=ymax))
    except Exception as e:
        raise FieldFormatError(f"{path}: invalid grid in header: {e}")
    data = np.frombuffer(raw, dtype="<f8", offset=HEADER_SIZE).astype(np.float64)
    shape = grid.shape if per_node == 1 else grid.shape + (2,)
    return FieldRecord(data=data.reshape(shape), grid=grid)


def _csv_lines(header: str, rows: Iterable[Sequence[float]]) -> Iterator[str]:
    yield header + "\n"
    for row in rows:
        yield ",".join(repr(float(v)) for v in row) + "\n"


def write_field_csv(path, u: np.ndarray, grid: Grid) -> str:
    """One x,y,u row per finite node in shortest round-trip form"""
    X, Y = grid.mesh()
    mask = np.isfinite(u)
    rows = zip(X[mask], Y[mask], u[mask])
    with atomic_open(path, "w") as fh:
        fh.writelines(_csv_lines("x,y,u", rows))
    return str(path)


def read_field_csv(path) -> np.ndarray:
    """(n, 3) array of x, y, u rows"""
    return np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)


def write_path_csv(path: Path, file) -> str:
    rows = ((x, y, s) for (x, y), s in zip(path.vertices, path.arclength))
    with atomic_open(file, "w") as fh:
        fh.writelines(_csv_lines("x,y,arclength", rows))
    return str(file)


def write_text(file, text: str) -> str:
    with atomic_open(file, "w") as fh:
        fh.write(text)
    return str(file)


def file_sha256(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def list_outputs(directory) -> List[str]:
    return sorted(
        name for name in os.listdir(directory)
        if os.path.isfile(os.path.join(directory, name)) and not name.startswith(".tmp-")
    )
