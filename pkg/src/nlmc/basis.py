"""Auxiliary sub-region indicators and constrained energy-minimizing bases.

A degree of freedom (DOF) is a triple ``(i, j, l)``: continuum ``i`` (1 or
2), coarse block ``j`` and block-local sub-region ``l``. DOFs are numbered
continuum-major, then block row-major, then sub-region ascending.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from nlmc.finescale import GridFunction, assemble_aQ
from nlmc.grid import GridPair, OversampleRegion, oversample
from nlmc.media import ContinuumPartition, MediaField, save_grid_field

logger = logging.getLogger(__name__)


class BasisError(RuntimeError):
    """Saddle-point solve failed or missed its residual tolerances."""


class AuxiliaryBasisSet:
    """Area-normalized indicators ``chi = 1/|K_l| * 1_{K_l}`` of every sub-region."""

    def __init__(self, grid: GridPair, partition: ContinuumPartition):
        self.grid = grid
        self.partition = partition
        keys = [
            (i, j, l)
            for i in (1, 2)
            for j in range(grid.num_coarse)
            for l in range(int(partition.counts[i - 1, j]))
        ]
        self.dofs: list[tuple[int, int, int]] = keys
        self.index = {key: a for a, key in enumerate(keys)}
        self.continuum = np.array([k[0] for k in keys])
        self.block = np.array([k[1] for k in keys])
        self.label = np.array([k[2] for k in keys])

        # global DOF owning each fine cell, per continuum
        self.cell_dof = np.empty((2, grid.num_fine), dtype=np.int64)
        offsets = np.zeros((2, grid.num_coarse), dtype=np.int64)
        for a, (i, j, l) in enumerate(keys):
            if l == 0:
                offsets[i - 1, j] = a
        for i in (1, 2):
            self.cell_dof[i - 1] = offsets[i - 1, grid.fine_to_coarse] + partition.labels[i - 1]

        cells_per_dof = np.zeros(len(keys), dtype=np.int64)
        for i in (1, 2):
            cells_per_dof += np.bincount(self.cell_dof[i - 1], minlength=len(keys))
        if np.any(cells_per_dof == 0):
            bad = [keys[a] for a in np.flatnonzero(cells_per_dof == 0)]
            raise ValueError(f"empty sub-regions for DOFs {bad[:5]}")
        self.area = cells_per_dof * grid.fine_area
        self.value = 1.0 / self.area
        self.block_dofs = [[] for _ in range(grid.num_coarse)]
        for a, j in enumerate(self.block):
            self.block_dofs[j].append(a)

    def __len__(self):
        return len(self.dofs)

    def resolve(self, dof: int | tuple[int, int, int]) -> int:
        if isinstance(dof, tuple):
            return self.index[dof]
        if not 0 <= dof < len(self):
            raise IndexError(f"DOF {dof} outside [0, {len(self)})")
        return int(dof)

    def support(self, dof) -> np.ndarray:
        a = self.resolve(dof)
        i = self.continuum[a]
        return np.flatnonzero(self.cell_dof[i - 1] == a)

    def dofs_in_region(self, region: OversampleRegion) -> np.ndarray:
        """Global indices of DOFs whose block lies in ``region``, ascending."""
        inside = np.zeros(self.grid.num_coarse, dtype=bool)
        inside[region.cells] = True
        return np.flatnonzero(inside[self.block])

    def pairing_matrix(self, region: OversampleRegion | None = None) -> sp.csr_matrix:
        """Rows ``alpha`` map a region function to ``(v . e_i, chi_alpha)``.

        Rows run over :meth:`dofs_in_region`, columns over the region
        unknowns in operator ordering.
        """
        region = self.grid.domain() if region is None else region
        rdofs = self.dofs_in_region(region)
        local = np.full(len(self), -1, dtype=np.int64)
        local[rdofs] = np.arange(rdofs.size)
        n = region.num_fine
        rows, cols, vals = [], [], []
        for i in (1, 2):
            owner = self.cell_dof[i - 1][region.fine_cells]
            rows.append(local[owner])
            cols.append(np.arange(n) + (i - 1) * n)
            vals.append(self.value[owner] * self.grid.fine_area)
        return sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(rdofs.size, 2 * n),
        )

    def function(self, coefficients: np.ndarray) -> GridFunction:
        """``sum_alpha coefficients[alpha] * chi_alpha`` on the whole domain."""
        coefficients = np.asarray(coefficients, dtype=float)
        vals = np.stack([coefficients[d] * self.value[d] for d in self.cell_dof])
        return GridFunction(vals)


def build_auxiliary(grid: GridPair, partition: ContinuumPartition) -> AuxiliaryBasisSet:
    return AuxiliaryBasisSet(grid, partition)


def project_pi(grid: GridPair, aux: AuxiliaryBasisSet, v: GridFunction) -> tuple[np.ndarray, GridFunction]:
    """Pairings ``(v_i, chi_alpha)`` and the function ``sum (v_i, chi_alpha) chi_alpha``.

    Note that ``project_pi(chi_alpha)`` is ``chi_alpha / |K_alpha|``; the map
    is a projection only after rescaling by the sub-region areas.
    """
    if v.num_cells != grid.num_fine:
        raise ValueError(f"expected a whole-domain function, got {v.num_cells} cells")
    coeffs = aux.pairing_matrix() @ v.vector()
    return coeffs, aux.function(coeffs)


# --- multiscale bases ------------------------------------------------------


@dataclass(frozen=True)
class SolverOptions:
    tol_constraint: float = 1e-9
    tol_stationarity: float = 1e-9
    refinement_steps: int = 3


@dataclass(eq=False)
class MultiscaleBasis:
    """Constrained energy minimizer for one DOF on its region.

    ``transfer[k]`` is the multiplier attached to ``region_dofs[k]``.
    """

    dof: int
    key: tuple[int, int, int]
    layers: int | None
    region: OversampleRegion
    psi: GridFunction
    region_dofs: np.ndarray
    transfer: np.ndarray
    constraint_residual: float
    stationarity_residual: float

    def transfer_row(self) -> dict[int, float]:
        return {int(b): float(t) for b, t in zip(self.region_dofs, self.transfer)}

    def extend(self, grid: GridPair) -> GridFunction:
        return self.psi.extend(grid)

    def dump(self, directory: str | Path) -> Path:
        """Write region metadata, psi grids and the transfer row."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        stem = f"basis_{self.dof:05d}"
        p1, p2 = self.psi.as_grids()
        save_grid_field(directory / f"{stem}_psi1.txt", p1)
        save_grid_field(directory / f"{stem}_psi2.txt", p2)
        i, j, l = self.key
        lines = [
            f"dof {self.dof} continuum {i} block {j} subregion {l} layers {self.layers}",
            self.region.to_text().splitlines()[0],
            f"constraint_residual {self.constraint_residual!r}",
            "transfer",
        ]
        lines += [f"{b} {t!r}" for b, t in self.transfer_row().items()]
        meta = directory / f"{stem}.txt"
        meta.write_text("\n".join(lines) + "\n")
        return meta


def _solve_region(
    grid: GridPair,
    field: MediaField,
    aux: AuxiliaryBasisSet,
    region: OversampleRegion,
    targets: Sequence[int],
    layers: int | None,
    opts: SolverOptions,
) -> list[MultiscaleBasis]:
    """Solve ``[A B^T; B 0] [psi; T] = [0; e_target]`` for several targets at once."""
    A = assemble_aQ(grid, field, region)
    B = aux.pairing_matrix(region)
    rdofs = aux.dofs_in_region(region)
    n, nc = A.shape[0], B.shape[0]
    K = sp.bmat([[A, B.T], [B, None]], format="csc")
    pos = np.searchsorted(rdofs, targets)
    if np.any(rdofs[np.minimum(pos, nc - 1)] != np.asarray(targets)):
        raise BasisError(f"target DOFs {list(targets)} not inside the region")
    rhs = np.zeros((n + nc, len(targets)))
    rhs[n + pos, np.arange(len(targets))] = 1.0
    try:
        lu = spla.splu(K)
    except RuntimeError as exc:
        raise BasisError(f"singular saddle-point system on region {region}: {exc}") from exc
    X = lu.solve(rhs)
    for _ in range(opts.refinement_steps):
        R = rhs - K @ X
        if np.abs(R[n:]).max() <= 0.1 * opts.tol_constraint:
            break
        X += lu.solve(R)

    out = []
    for col, a in enumerate(targets):
        psi, T = X[:n, col], X[n:, col]
        e = rhs[n:, col]
        c_res = float(np.abs(B @ psi - e).max())
        BtT = B.T @ T
        scale = max(np.abs(BtT).max(), np.abs(A @ psi).max(), np.finfo(float).tiny)
        s_res = float(np.abs(A @ psi + BtT).max() / scale)
        if c_res > opts.tol_constraint or s_res > opts.tol_stationarity:
            raise BasisError(
                f"DOF {aux.dofs[a]}: constraint residual {c_res:.2e}, "
                f"stationarity residual {s_res:.2e}"
            )
        out.append(
            MultiscaleBasis(
                int(a), aux.dofs[a], layers, region, GridFunction.from_vector(psi, region),
                rdofs, T.copy(), c_res, s_res,
            )
        )
    return out


def build_block_bases(grid, field, aux, j: int, m: int | None, opts: SolverOptions = SolverOptions()):
    """Bases of all DOFs of block ``j`` (``m=None`` for the whole domain)."""
    region = grid.domain() if m is None else oversample(grid, j, m)
    return _solve_region(grid, field, aux, region, aux.block_dofs[j], m, opts)


def build_ms_basis(grid, field, aux, dof, m: int, opts: SolverOptions = SolverOptions()) -> MultiscaleBasis:
    if m < 0:
        raise ValueError(f"layers must be >= 0, got {m}")
    a = aux.resolve(dof)
    region = oversample(grid, int(aux.block[a]), m)
    return _solve_region(grid, field, aux, region, [a], m, opts)[0]


def build_global_basis(grid, field, aux, dof, opts: SolverOptions = SolverOptions()) -> MultiscaleBasis:
    a = aux.resolve(dof)
    return _solve_region(grid, field, aux, grid.domain(), [a], None, opts)[0]


def build_all_global_bases(grid, field, aux, opts: SolverOptions = SolverOptions()) -> list[MultiscaleBasis]:
    """Every global basis from a single factorization."""
    return _solve_region(grid, field, aux, grid.domain(), list(range(len(aux))), None, opts)


@dataclass
class BasisCollection:
    """One basis per DOF, indexed by global DOF number."""

    aux: AuxiliaryBasisSet
    layers: int | None
    bases: list[MultiscaleBasis] = field(default_factory=list)

    def __len__(self):
        return len(self.bases)

    def __getitem__(self, a):
        return self.bases[a]

    def __iter__(self):
        return iter(self.bases)

    def max_constraint_residual(self) -> float:
        return max(b.constraint_residual for b in self.bases)

    def prolongation(self) -> sp.csc_matrix:
        """Matrix whose column ``alpha`` is the zero-extended ``psi_alpha``."""
        grid = self.aux.grid
        N = grid.num_fine
        rows, cols, vals = [], [], []
        for b in self.bases:
            cells = b.region.fine_cells
            rows.append(np.concatenate([cells, cells + N]))
            cols.append(np.full(2 * cells.size, b.dof))
            vals.append(b.psi.vector())
        return sp.csc_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(2 * N, len(self.bases)),
        )


class BasisBuildError(BasisError):
    def __init__(self, failures: dict[tuple[int, int, int], Exception]):
        self.failures = failures
        listed = "; ".join(f"{k}: {v}" for k, v in list(failures.items())[:10])
        super().__init__(f"{len(failures)} basis builds failed: {listed}")


def build_all_ms_bases(
    grid: GridPair,
    field: MediaField,
    aux: AuxiliaryBasisSet,
    m: int | None,
    workers: int = 1,
    opts: SolverOptions = SolverOptions(),
) -> BasisCollection:
    """Localized bases for every DOF, one saddle-point factorization per block.

    ``m=None`` builds global bases. With ``workers > 1`` blocks are solved on
    a thread pool; results are placed by DOF so the order of completion does
    not matter.
    """
    if m is None:
        return BasisCollection(aux, None, build_all_global_bases(grid, field, aux, opts))

    def task(j):
        try:
            return j, build_block_bases(grid, field, aux, j, m, opts), None
        except (BasisError, RuntimeError, ValueError) as exc:
            return j, None, exc

    blocks: Iterable[int] = range(grid.num_coarse)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(task, blocks))
    else:
        results = [task(j) for j in blocks]

    slots: list[MultiscaleBasis | None] = [None] * len(aux)
    failures = {}
    for j, bases, exc in results:
        if exc is not None:
            for a in aux.block_dofs[j]:
                failures[aux.dofs[a]] = exc
            continue
        for b in bases:
            slots[b.dof] = b
    if failures:
        raise BasisBuildError(failures)
    logger.debug("built %d bases with m=%s", len(slots), m)
    return BasisCollection(aux, m, slots)
