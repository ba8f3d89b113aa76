"""
Mesh geometry, node labels and the indexed min-heap that orders the sweep.

Nodes are stored flat in row-major order: node = i + j*nx, with i along x and
j along y. Field arrays are shaped (ny, nx) so that field.ravel()[node] is the
value at node.
"""

import logging
from dataclasses import dataclass
from enum import IntEnum
from typing import List, Optional, Sequence, Tuple

import numpy as np
from numba import njit
from pydantic import BaseModel, model_validator

from .errors import DomainError, HeapError

logger = logging.getLogger(__name__)


class Label(IntEnum):
    UNKNOWN = 0
    CONSIDERED = 1
    ACCEPTED_FRONT = 2
    ACCEPTED = 3


class Domain(BaseModel):
    """Axis-aligned box in model units"""

    xmin: float
    xmax: float
    ymin: float
    ymax: float

    @model_validator(mode="after")
    def _check_extent(self):
        if not (self.xmax > self.xmin and self.ymax > self.ymin):
            raise ValueError(
                f"empty domain box [{self.xmin},{self.xmax}]x[{self.ymin},{self.ymax}]"
            )
        return self

    @classmethod
    def from_bounds(cls, bounds: Sequence[float]) -> "Domain":
        xmin, xmax, ymin, ymax = (float(b) for b in bounds)
        return cls(xmin=xmin, xmax=xmax, ymin=ymin, ymax=ymax)

    def as_tuple(self) -> Tuple[float, float, float, float]:
        return (self.xmin, self.xmax, self.ymin, self.ymax)

    def contains(self, x: Sequence[float]) -> bool:
        return self.xmin <= x[0] <= self.xmax and self.ymin <= x[1] <= self.ymax


@dataclass(frozen=True)
class Grid:
    nx: int
    ny: int
    domain: Domain

    def __post_init__(self):
        if self.nx < 2 or self.ny < 2:
            raise DomainError(f"grid needs at least 2 nodes per axis, got {self.nx}x{self.ny}")

    @classmethod
    def square(cls, N: int, domain: Domain) -> "Grid":
        return cls(nx=N, ny=N, domain=domain)

    @property
    def h1(self) -> float:
        return (self.domain.xmax - self.domain.xmin) / (self.nx - 1)

    @property
    def h2(self) -> float:
        return (self.domain.ymax - self.domain.ymin) / (self.ny - 1)

    @property
    def h(self) -> float:
        return max(self.h1, self.h2)

    @property
    def n_nodes(self) -> int:
        return self.nx * self.ny

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.ny, self.nx)

    @property
    def xs(self) -> np.ndarray:
        return self.domain.xmin + np.arange(self.nx) * self.h1

    @property
    def ys(self) -> np.ndarray:
        return self.domain.ymin + np.arange(self.ny) * self.h2

    def mesh(self) -> Tuple[np.ndarray, np.ndarray]:
        """Coordinate arrays X, Y shaped (ny, nx)"""
        return np.meshgrid(self.xs, self.ys)

    def index(self, i: int, j: int) -> int:
        return i + j * self.nx

    def ij(self, node: int) -> Tuple[int, int]:
        return node % self.nx, node // self.nx

    def position(self, node: int) -> np.ndarray:
        i, j = self.ij(node)
        return np.array([self.domain.xmin + i * self.h1, self.domain.ymin + j * self.h2])

    def valid(self, node: int) -> bool:
        return 0 <= node < self.n_nodes

    def nearest_node(self, x: Sequence[float]) -> int:
        i = int(round((x[0] - self.domain.xmin) / self.h1))
        j = int(round((x[1] - self.domain.ymin) / self.h2))
        i = min(max(i, 0), self.nx - 1)
        j = min(max(j, 0), self.ny - 1)
        return self.index(i, j)

    def is_boundary(self, node: int) -> bool:
        i, j = self.ij(node)
        return i == 0 or j == 0 or i == self.nx - 1 or j == self.ny - 1


# row-major (dj outer, di inner) so neighbor lists are deterministic
NEIGHBOR8_OFFSETS = np.array(
    [(di, dj) for dj in (-1, 0, 1) for di in (-1, 0, 1) if (di, dj) != (0, 0)],
    dtype=np.int64,
)


def neighbors8(grid: Grid, node: int) -> List[int]:
    """In-bounds members of the 8-point nearest neighborhood"""
    i, j = grid.ij(node)
    out = []
    for di, dj in NEIGHBOR8_OFFSETS:
        ii, jj = i + di, j + dj
        if 0 <= ii < grid.nx and 0 <= jj < grid.ny:
            out.append(grid.index(ii, jj))
    return out


def far_offsets(grid: Grid, K: int) -> np.ndarray:
    """Index offsets (di, dj) whose physical length is at most K*h"""
    if K < 1:
        raise DomainError(f"update factor K must be >= 1, got {K}")
    radius = K * grid.h
    r2 = radius * radius * (1.0 + 1e-12)
    mi = int(np.floor(radius / grid.h1 + 1e-9))
    mj = int(np.floor(radius / grid.h2 + 1e-9))
    offsets = []
    for dj in range(-mj, mj + 1):
        for di in range(-mi, mi + 1):
            if di == 0 and dj == 0:
                continue
            if (di * grid.h1) ** 2 + (dj * grid.h2) ** 2 <= r2:
                offsets.append((di, dj))
    return np.array(offsets, dtype=np.int64).reshape(-1, 2)


def far_neighborhood(grid: Grid, node: int, K: int) -> List[int]:
    """All in-bounds nodes within Euclidean distance K*h, excluding node"""
    i, j = grid.ij(node)
    out = []
    for di, dj in far_offsets(grid, K):
        ii, jj = i + di, j + dj
        if 0 <= ii < grid.nx and 0 <= jj < grid.ny:
            out.append(grid.index(ii, jj))
    return out


# ---------------------------------------------------------------------------
# Indexed binary min-heap over flat arrays.
#   heap[k]  node stored in slot k
#   pos[n]   slot of node n, -1 when absent
#   keys[n]  key of node n
#   size[0]  number of occupied slots
# Ties on equal keys go to the smaller node index.
# ---------------------------------------------------------------------------

@njit(cache=True)
def _before(keys, a, b):
    ka = keys[a]
    kb = keys[b]
    return ka < kb or (ka == kb and a < b)


@njit(cache=True)
def heap_sift_up(heap, pos, keys, k):
    node = heap[k]
    while k > 0:
        parent = (k - 1) >> 1
        other = heap[parent]
        if _before(keys, node, other):
            heap[k] = other
            pos[other] = k
            k = parent
        else:
            break
    heap[k] = node
    pos[node] = k


@njit(cache=True)
def heap_sift_down(heap, pos, keys, k, size):
    node = heap[k]
    while True:
        child = 2 * k + 1
        if child >= size:
            break
        right = child + 1
        if right < size and _before(keys, heap[right], heap[child]):
            child = right
        if _before(keys, heap[child], node):
            heap[k] = heap[child]
            pos[heap[k]] = k
            k = child
        else:
            break
    heap[k] = node
    pos[node] = k


@njit(cache=True)
def heap_push(heap, pos, keys, size, node, key):
    keys[node] = key
    k = size[0]
    heap[k] = node
    pos[node] = k
    size[0] = k + 1
    heap_sift_up(heap, pos, keys, k)


@njit(cache=True)
def heap_decrease(heap, pos, keys, node, key):
    keys[node] = key
    heap_sift_up(heap, pos, keys, pos[node])


@njit(cache=True)
def heap_pop(heap, pos, keys, size):
    if size[0] == 0:
        return -1
    top = heap[0]
    last = size[0] - 1
    size[0] = last
    pos[top] = -1
    if last > 0:
        heap[0] = heap[last]
        pos[heap[0]] = 0
        heap_sift_down(heap, pos, keys, 0, last)
    return top


class IndexedMinHeap:
    """Checked Python front end to the compiled heap routines"""

    def __init__(self, n_nodes: int, keys: Optional[np.ndarray] = None):
        self.heap = np.zeros(n_nodes, dtype=np.int64)
        self.pos = np.full(n_nodes, -1, dtype=np.int64)
        # the solver passes its u array so heap keys and tentative values are one buffer
        self.keys = np.full(n_nodes, np.inf) if keys is None else keys
        self.size = np.zeros(1, dtype=np.int64)

    def __len__(self) -> int:
        return int(self.size[0])

    def __contains__(self, node: int) -> bool:
        return 0 <= node < len(self.pos) and self.pos[node] >= 0

    def key(self, node: int) -> float:
        if node not in self:
            raise HeapError(f"node {node} is not in the heap")
        return float(self.keys[node])

    def insert(self, node: int, key: float):
        if not 0 <= node < len(self.pos):
            raise HeapError(f"node {node} out of range")
        if node in self:
            raise HeapError(f"node {node} is already in the heap")
        heap_push(self.heap, self.pos, self.keys, self.size, node, float(key))

    def decrease_key(self, node: int, key: float):
        if node not in self:
            raise HeapError(f"decrease_key on absent node {node}")
        if key > self.keys[node]:
            raise HeapError(f"decrease_key would raise node {node} from {self.keys[node]} to {key}")
        heap_decrease(self.heap, self.pos, self.keys, node, float(key))

    def extract_min(self) -> Optional[Tuple[int, float]]:
        """(node, key) of the minimum, or None when empty"""
        node = heap_pop(self.heap, self.pos, self.keys, self.size)
        if node < 0:
            return None
        return int(node), float(self.keys[node])

    def check_invariants(self) -> bool:
        n = len(self)
        for k in range(n):
            node = self.heap[k]
            if self.pos[node] != k:
                return False
            if k > 0:
                parent = self.heap[(k - 1) >> 1]
                if not (self.keys[parent] < self.keys[node]
                        or (self.keys[parent] == self.keys[node] and parent < node)):
                    return False
        return int(np.count_nonzero(self.pos >= 0)) == n
