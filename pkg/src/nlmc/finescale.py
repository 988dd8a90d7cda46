"""Two-point flux finite-volume realization of the dual-continuum forms and the
fine-scale reference solvers.

Unknowns of an operator on a region are ordered continuum-major: all
continuum-1 cells, then all continuum-2 cells, each in region-local order.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np
import scipy.sparse as sp

from nlmc.grid import GridPair, OversampleRegion, face_list
from nlmc.linalg import RTOL, SPDSolver
from nlmc.media import MediaField

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Piecewise-constant pair ``(p1, p2)`` over the fine cells of a region.

    ``values`` has shape ``(2, n_cells)``; ``region=None`` means the whole
    domain.
    """

    values: np.ndarray
    region: OversampleRegion | None = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] != 2:
            raise ValueError(f"GridFunction values must have shape (2, n), got {v.shape}")
        if self.region is not None and v.shape[1] != self.region.num_fine:
            raise ValueError(
                f"GridFunction has {v.shape[1]} cells, region has {self.region.num_fine}"
            )
        object.__setattr__(self, "values", v)

    @classmethod
    def from_vector(cls, x, region=None) -> GridFunction:
        x = np.asarray(x, dtype=float)
        return cls(x.reshape(2, -1), region)

    @classmethod
    def zeros(cls, n: int, region=None) -> GridFunction:
        return cls(np.zeros((2, n)), region)

    @property
    def p1(self) -> np.ndarray:
        return self.values[0]

    @property
    def p2(self) -> np.ndarray:
        return self.values[1]

    @property
    def num_cells(self) -> int:
        return self.values.shape[1]

    def vector(self) -> np.ndarray:
        """Stacked ``[p1, p2]`` in operator ordering."""
        return self.values.ravel()

    def as_grids(self) -> tuple[np.ndarray, np.ndarray]:
        """Reshape each continuum to ``(rows, cols)`` of its region."""
        n = int(round(np.sqrt(self.num_cells)))
        shape = self.region.shape_fine if self.region is not None else (n, n)
        return self.values[0].reshape(shape), self.values[1].reshape(shape)

    def extend(self, grid: GridPair) -> GridFunction:
        """Zero-extension to the whole domain."""
        if self.region is None or self.region.is_domain:
            return GridFunction(self.values)
        out = np.zeros((2, grid.num_fine))
        out[:, self.region.fine_cells] = self.values
        return GridFunction(out)

    def __add__(self, other):
        _check_same(self, other)
        return GridFunction(self.values + other.values, self.region)

    def __sub__(self, other):
        _check_same(self, other)
        return GridFunction(self.values - other.values, self.region)

    def __mul__(self, scalar):
        return GridFunction(self.values * scalar, self.region)

    __rmul__ = __mul__


def _check_same(u: GridFunction, v: GridFunction):
    if u.values.shape != v.values.shape:
        raise ValueError(f"shape mismatch {u.values.shape} vs {v.values.shape}")


def _region(grid, region):
    region = grid.domain() if region is None else region
    if region.num_fine == 0:
        raise ValueError("empty region")
    return region


def assemble_stiffness(grid: GridPair, field: MediaField, region: OversampleRegion | None = None) -> sp.csr_matrix:
    """Diffusion part ``a`` with zero Dirichlet data on the region boundary.

    Interior faces get the harmonic transmissibility
    ``2 k k' / (k + k')``; boundary faces the half-cell value ``2 k``.
    Face length and center distance are both ``h`` and cancel.
    """
    field.check_grid(grid)
    region = _region(grid, region)
    faces = face_list(grid, region)
    n = region.num_fine
    blocks = []
    for i in (1, 2):
        kappa = field.kappa(i)[region.fine_cells]
        a, b = faces.interior[:, 0], faces.interior[:, 1]
        t = 2.0 * kappa[a] * kappa[b] / (kappa[a] + kappa[b])
        diag = np.bincount(a, t, n) + np.bincount(b, t, n).astype(float)
        diag += np.bincount(faces.boundary_cell, 2.0 * kappa[faces.boundary_cell], n)
        rows = np.concatenate([a, b, np.arange(n)])
        cols = np.concatenate([b, a, np.arange(n)])
        vals = np.concatenate([-t, -t, diag])
        blocks.append(sp.csr_matrix((vals, (rows, cols)), shape=(n, n)))
    return sp.block_diag(blocks, format="csr")


def assemble_exchange(grid: GridPair, field: MediaField, region: OversampleRegion | None = None) -> sp.csr_matrix:
    """Mass-transfer part ``q``: per cell ``sigma h^2 [[1, -1], [-1, 1]]``."""
    field.check_grid(grid)
    region = _region(grid, region)
    s = field.sigma.ravel()[region.fine_cells] * grid.fine_area
    D = sp.diags(s)
    return sp.bmat([[D, -D], [-D, D]], format="csr")


def assemble_aQ(grid: GridPair, field: MediaField, region: OversampleRegion | None = None) -> sp.csr_matrix:
    return (assemble_stiffness(grid, field, region) + assemble_exchange(grid, field, region)).tocsr()


def assemble_mass(grid: GridPair, field: MediaField, region: OversampleRegion | None = None) -> sp.csr_matrix:
    field.check_grid(grid)
    region = _region(grid, region)
    cells = region.fine_cells
    c = np.concatenate([field.compressibility(1)[cells], field.compressibility(2)[cells]])
    return sp.diags(c * grid.fine_area, format="csr")


def load_vector(grid: GridPair, f: GridFunction) -> np.ndarray:
    """Right-hand side ``(f, v)`` tested against cell indicators."""
    return f.vector() * grid.fine_area


def l2_pair(grid: GridPair, u: GridFunction, v: GridFunction) -> float:
    _check_same(u, v)
    return float(np.sum(u.values * v.values) * grid.fine_area)


def energy(A: sp.spmatrix, v: GridFunction | np.ndarray) -> float:
    """Quadratic form ``v^T A v``."""
    x = v.vector() if isinstance(v, GridFunction) else np.asarray(v)
    return float(x @ (A @ x))


def solve_static_fine(
    grid: GridPair,
    field: MediaField,
    f: GridFunction,
    method: str = "direct",
    rtol: float = RTOL,
) -> GridFunction:
    """Steady dual-continuum problem ``A_Q p = (f, .)`` on the whole domain."""
    A = assemble_aQ(grid, field)
    b = load_vector(grid, f)
    x = SPDSolver(A, method, rtol).solve(b)
    return GridFunction.from_vector(x)


Source = Union[GridFunction, Callable[[float], GridFunction]]


def _source_at(f: Source, t: float) -> GridFunction:
    return f(t) if callable(f) else f


def backward_euler(M, A, load: Callable[[float], np.ndarray], x0, dt: float, T: float, make_solver):
    """Integrate ``M x' + A x = load(t)`` with implicit Euler.

    ``make_solver(K)`` returns an object whose ``solve(b)`` applies ``K^-1``;
    it is called once. Returns ``(times, states)`` with ``states[n]`` the
    solution at ``times[n] = n * dt``; ``T`` must be a whole number of steps.
    """
    if not dt > 0:
        raise ValueError(f"time step must be positive, got {dt}")
    n_steps = int(round(T / dt))
    if n_steps < 1 or not np.isclose(n_steps * dt, T, rtol=1e-12, atol=0):
        raise ValueError(f"T = {T} is not a positive multiple of dt = {dt}")
    solver = make_solver(M / dt + A)
    states = [np.asarray(x0, dtype=float)]
    for n in range(n_steps):
        t = (n + 1) * dt
        rhs = M @ states[-1] / dt + load(t)
        states.append(solver.solve(rhs))
    return np.arange(n_steps + 1) * dt, states


def solve_transient_fine(
    grid: GridPair,
    field: MediaField,
    f: Source,
    p0: GridFunction | None,
    dt: float,
    T: float,
    method: str = "direct",
    rtol: float = RTOL,
) -> tuple[np.ndarray, list[GridFunction]]:
    A = assemble_aQ(grid, field)
    M = assemble_mass(grid, field)
    x0 = np.zeros(2 * grid.num_fine) if p0 is None else p0.vector()
    times, states = backward_euler(
        M, A, lambda t: load_vector(grid, _source_at(f, t)), x0, dt, T, lambda K: SPDSolver(K, method, rtol)
    )
    return times, [GridFunction.from_vector(x) for x in states]
