"""Polyline-chain data model and densification.

Coordinate convention used everywhere in this package: (row, col) with the
origin at the top-left pixel, row increasing downward. Angles are measured
as atan2(d_row, d_col) and normalized to [0, 2*pi).

Instances are branchless chains: the edge set is implicit in consecutive
vertex pairs. All types are immutable and safe to share across workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

TWO_PI = 2.0 * math.pi


class Vertex(NamedTuple):
    row: int
    col: int


def _ceil_div(n: int, d: int) -> int:
    # d > 0
    return -((-n) // d)


def digital_line(a: Vertex, b: Vertex) -> list[Vertex]:
    """8-connected digital line from a to b, both endpoints included.

    Rounded-DDA form of the midpoint scheme: step along the axis with the
    larger |delta| and round the ideal value of the other coordinate, with
    exact-half ties resolved toward the lower coordinate. Integer-only
    arithmetic, so output is identical on every platform.
    """
    dr = b.row - a.row
    dc = b.col - a.col
    if dr == 0 and dc == 0:
        return [a]
    if abs(dc) >= abs(dr):
        q = abs(dc)
        step = 1 if dc > 0 else -1
        # row(i) = ceil(a.row + i*dr/q - 1/2)
        return [
            Vertex(_ceil_div(2 * (a.row * q + i * dr) - q, 2 * q), a.col + step * i)
            for i in range(q + 1)
        ]
    q = abs(dr)
    step = 1 if dr > 0 else -1
    return [
        Vertex(a.row + step * i, _ceil_div(2 * (a.col * q + i * dc) - q, 2 * q))
        for i in range(q + 1)
    ]


def is_king_move(a: Vertex, b: Vertex) -> bool:
    return max(abs(a.row - b.row), abs(a.col - b.col)) == 1


@dataclass(frozen=True)
class BoundaryInstance:
    """One boundary: an ordered chain of integer pixel vertices.

    Sparse instances hold the annotated vertices; densified instances hold
    the full 8-connected chain plus ``key_indices`` marking where the
    annotated vertices sit inside it.
    """

    id: int
    vertices: tuple[Vertex, ...]
    densified: bool = False
    key_indices: tuple[int, ...] | None = None

    def __post_init__(self) -> None:
        if self.id <= 0:
            raise ValueError(f"instance id must be positive, got {self.id}")
        if len(self.vertices) < 2:
            raise ValueError("an instance needs at least 2 vertices")
        if self.densified:
            for u, v in zip(self.vertices, self.vertices[1:]):
                if not is_king_move(u, v):
                    raise ValueError(f"densified chain has a non-8-neighbor step {u} -> {v}")
            if self.key_indices is not None:
                k = self.key_indices
                if k[0] != 0 or k[-1] != len(self.vertices) - 1 or list(k) != sorted(set(k)):
                    raise ValueError("key_indices must be increasing and cover both chain ends")

    @property
    def endpoints(self) -> tuple[Vertex, Vertex]:
        return self.vertices[0], self.vertices[-1]

    def reversed(self) -> "BoundaryInstance":
        keys = None
        if self.key_indices is not None:
            n = len(self.vertices) - 1
            keys = tuple(n - i for i in reversed(self.key_indices))
        return BoundaryInstance(self.id, tuple(reversed(self.vertices)), self.densified, keys)


@dataclass(frozen=True)
class BoundaryGraph:
    """A set of boundary instances with unique ids."""

    instances: tuple[BoundaryInstance, ...] = ()

    def __post_init__(self) -> None:
        ids = [inst.id for inst in self.instances]
        if len(ids) != len(set(ids)):
            raise ValueError("instance ids must be unique within a graph")

    def __len__(self) -> int:
        return len(self.instances)

    def densified(self) -> "BoundaryGraph":
        return BoundaryGraph(tuple(densify(inst) for inst in self.instances))

    def by_id(self, instance_id: int) -> BoundaryInstance:
        for inst in self.instances:
            if inst.id == instance_id:
                return inst
        raise KeyError(instance_id)


def densify(instance: BoundaryInstance) -> BoundaryInstance:
    """Interpolate the chain so consecutive vertices are 8-neighbors.

    Consecutive duplicate annotation vertices are dropped first; they carry
    no geometry. Idempotent: densified input is returned unchanged.
    """
    if instance.densified:
        return instance
    verts: list[Vertex] = [instance.vertices[0]]
    for v in instance.vertices[1:]:
        if v != verts[-1]:
            verts.append(v)
    if len(verts) < 2:
        raise ValueError("instance degenerates to a single point after deduplication")
    chain: list[Vertex] = [verts[0]]
    keys: list[int] = [0]
    for a, b in zip(verts, verts[1:]):
        chain.extend(digital_line(a, b)[1:])
        keys.append(len(chain) - 1)
    return BoundaryInstance(instance.id, tuple(chain), True, tuple(keys))


def key_vertices(instance: BoundaryInstance) -> BoundaryInstance:
    """Recover the sparse annotation chain from a densified instance."""
    if not instance.densified or instance.key_indices is None:
        raise ValueError("key_vertices needs a densified instance with key markers")
    verts = tuple(instance.vertices[i] for i in instance.key_indices)
    return BoundaryInstance(instance.id, verts, False, None)


def instance_pixel_count(instance: BoundaryInstance) -> int:
    """Number of distinct pixels covered by a densified chain."""
    if not instance.densified:
        raise ValueError("instance_pixel_count needs a densified instance")
    return len(set(instance.vertices))


def edge_radian(a: Vertex, b: Vertex) -> float:
    """Direction of the edge a -> b as a radian in [0, 2*pi)."""
    return math.atan2(b.row - a.row, b.col - a.col) % TWO_PI


def circular_difference(a: float, b: float) -> float:
    """Distance between two radians on the circle, in [0, pi]."""
    d = abs(a - b) % TWO_PI
    return min(d, TWO_PI - d)
