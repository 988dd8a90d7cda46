"""Nested structured meshes on the unit square.

Cells are axis-aligned squares indexed row-major from the bottom-left corner:
fine cell ``k = row * n_fine + col`` and coarse cell ``j = R * n_coarse + C``.
Oversampling regions are rectangles of coarse cells, so every region is
itself a structured sub-grid and its fine cells keep the global row-major
order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property

import numpy as np

# Boundary face sides, used by FaceList.boundary_side.
WEST, EAST, SOUTH, NORTH = 0, 1, 2, 3


@dataclass(frozen=True)
class GridPair:
    """Coarse mesh with ``n_coarse`` cells per side, each split into
    ``refine x refine`` fine cells."""

    n_coarse: int
    refine: int

    def __post_init__(self):
        for name in ("n_coarse", "refine"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or isinstance(value, bool):
                raise TypeError(f"{name} must be an integer, got {value!r}")
            if value < 1:
                raise ValueError(f"{name} must be >= 1, got {value}")

    @property
    def n_fine(self) -> int:
        return self.n_coarse * self.refine

    @property
    def H(self) -> Fraction:
        return Fraction(1, self.n_coarse)

    @property
    def h(self) -> Fraction:
        return Fraction(1, self.n_fine)

    @property
    def num_coarse(self) -> int:
        return self.n_coarse**2

    @property
    def num_fine(self) -> int:
        return self.n_fine**2

    @property
    def coarse_area(self) -> float:
        return float(self.H**2)

    @property
    def fine_area(self) -> float:
        return float(self.h**2)

    @cached_property
    def fine_to_coarse(self) -> np.ndarray:
        """Coarse index of every fine cell."""
        rows, cols = np.divmod(np.arange(self.num_fine), self.n_fine)
        return (rows // self.refine) * self.n_coarse + cols // self.refine

    def coarse_fine_cells(self, j: int) -> np.ndarray:
        """Fine cells of coarse cell ``j`` in ascending (row-major) order."""
        self._check_coarse(j)
        R, C = divmod(j, self.n_coarse)
        r = np.arange(R * self.refine, (R + 1) * self.refine)
        c = np.arange(C * self.refine, (C + 1) * self.refine)
        return (r[:, None] * self.n_fine + c[None, :]).ravel()

    def cell_centers(self) -> tuple[np.ndarray, np.ndarray]:
        """Fine cell-center coordinates ``(x, y)`` as flat arrays."""
        rows, cols = np.divmod(np.arange(self.num_fine), self.n_fine)
        h = 1.0 / self.n_fine
        return (cols + 0.5) * h, (rows + 0.5) * h

    def domain(self) -> OversampleRegion:
        """The whole domain as a region (no center, no layers)."""
        return OversampleRegion(self, None, None, 0, self.n_coarse, 0, self.n_coarse)

    def _check_coarse(self, j):
        if not (0 <= j < self.num_coarse):
            raise IndexError(f"coarse index {j} outside [0, {self.num_coarse})")


def build_grid(n_coarse: int, refine: int) -> GridPair:
    return GridPair(n_coarse, refine)


@dataclass(frozen=True)
class OversampleRegion:
    """Rectangle of coarse cells ``[row0, row1) x [col0, col1)``.

    ``center`` and ``layers`` are ``None`` for the whole-domain region.
    """

    grid: GridPair = field(repr=False)
    center: int | None
    layers: int | None
    row0: int
    row1: int
    col0: int
    col1: int

    @property
    def shape_coarse(self) -> tuple[int, int]:
        return self.row1 - self.row0, self.col1 - self.col0

    @property
    def shape_fine(self) -> tuple[int, int]:
        r = self.grid.refine
        return (self.row1 - self.row0) * r, (self.col1 - self.col0) * r

    @property
    def is_domain(self) -> bool:
        n = self.grid.n_coarse
        return (self.row0, self.row1, self.col0, self.col1) == (0, n, 0, n)

    @cached_property
    def cells(self) -> np.ndarray:
        rows = np.arange(self.row0, self.row1)
        cols = np.arange(self.col0, self.col1)
        return (rows[:, None] * self.grid.n_coarse + cols[None, :]).ravel()

    @cached_property
    def fine_cells(self) -> np.ndarray:
        r = self.grid.refine
        rows = np.arange(self.row0 * r, self.row1 * r)
        cols = np.arange(self.col0 * r, self.col1 * r)
        return (rows[:, None] * self.grid.n_fine + cols[None, :]).ravel()

    @cached_property
    def global_to_local(self) -> np.ndarray:
        """Map from global fine index to local index, -1 outside the region."""
        out = np.full(self.grid.num_fine, -1, dtype=np.int64)
        out[self.fine_cells] = np.arange(self.fine_cells.size)
        return out

    @property
    def num_fine(self) -> int:
        return int(self.fine_cells.size)

    @property
    def area_ratio(self) -> float:
        return self.cells.size / self.grid.num_coarse

    def contains_cell(self, j: int) -> bool:
        R, C = divmod(j, self.grid.n_coarse)
        return self.row0 <= R < self.row1 and self.col0 <= C < self.col1

    def to_text(self) -> str:
        """Plain-text index dump, one header line then one index per line."""
        lines = [
            f"center {self.center} layers {self.layers} "
            f"rows {self.row0}:{self.row1} cols {self.col0}:{self.col1}",
            "coarse " + " ".join(map(str, self.cells)),
            "fine " + " ".join(map(str, self.fine_cells)),
        ]
        return "\n".join(lines) + "\n"


def oversample(grid: GridPair, j: int, m: int) -> OversampleRegion:
    """Coarse cell ``j`` enlarged by ``m`` layers of coarse cells, clipped to the domain."""
    grid._check_coarse(j)
    if m < 0:
        raise ValueError(f"layers must be >= 0, got {m}")
    R, C = divmod(j, grid.n_coarse)
    n = grid.n_coarse
    return OversampleRegion(
        grid, j, m, max(R - m, 0), min(R + m + 1, n), max(C - m, 0), min(C + m + 1, n)
    )


@dataclass(frozen=True)
class FaceList:
    """Fine faces of a region in local cell indices.

    Interior faces: ``interior[:, 0]`` and ``interior[:, 1]`` are the two
    adjacent cells (x-direction faces first, then y-direction). Boundary
    faces: ``boundary_cell`` is the cell inside the region and
    ``boundary_side`` its outward side (WEST, EAST, SOUTH, NORTH).
    """

    interior: np.ndarray
    boundary_cell: np.ndarray
    boundary_side: np.ndarray


def face_list(grid: GridPair, region: OversampleRegion | None = None) -> FaceList:
    if region is None:
        region = grid.domain()
    ny, nx = region.shape_fine
    idx = np.arange(ny * nx).reshape(ny, nx)
    horizontal = np.stack([idx[:, :-1].ravel(), idx[:, 1:].ravel()], axis=1)
    vertical = np.stack([idx[:-1, :].ravel(), idx[1:, :].ravel()], axis=1)
    interior = np.concatenate([horizontal, vertical]).astype(np.int64)

    west, east = idx[:, 0], idx[:, -1]
    south, north = idx[0, :], idx[-1, :]
    boundary_cell = np.concatenate([west, east, south, north]).astype(np.int64)
    boundary_side = np.concatenate(
        [
            np.full(ny, WEST),
            np.full(ny, EAST),
            np.full(nx, SOUTH),
            np.full(nx, NORTH),
        ]
    )
    return FaceList(interior, boundary_cell, boundary_side)
