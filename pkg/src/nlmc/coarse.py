"""Coarse Galerkin system spanned by the multiscale bases."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from nlmc.basis import AuxiliaryBasisSet, BasisCollection
from nlmc.finescale import GridFunction, Source, _source_at, assemble_aQ, assemble_mass, backward_euler, load_vector
from nlmc.grid import GridPair
from nlmc.linalg import RTOL, SolverError, SPDSolver, relative_residual
from nlmc.media import MediaField

DENSE_LIMIT = 10_000


class _DenseCholesky:
    def __init__(self, K, rtol=RTOL):
        self.K = K.toarray() if sp.issparse(K) else np.asarray(K)
        try:
            self._factor = sla.cho_factor(self.K)
        except np.linalg.LinAlgError as exc:
            raise SolverError(f"coarse matrix is not positive definite: {exc}") from exc
        self.rtol = rtol
        self.scale = 1.0 / np.sqrt(np.diag(self.K))

    def solve(self, b):
        x = sla.cho_solve(self._factor, b)
        res = relative_residual(self.K, x, b, self.scale)
        if res > self.rtol:
            x = x + sla.cho_solve(self._factor, b - self.K @ x)
            res = relative_residual(self.K, x, b, self.scale)
        if res > self.rtol:
            raise SolverError(f"coarse solve residual {res:.3e} exceeds {self.rtol:.1e}", res)
        return x


def coarse_solver(K, rtol: float = RTOL):
    """Dense Cholesky below ``DENSE_LIMIT`` unknowns, sparse direct above."""
    if K.shape[0] < DENSE_LIMIT:
        return _DenseCholesky(K, rtol)
    return SPDSolver(sp.csc_matrix(K), "direct", rtol)


@dataclass(eq=False)
class CoarseSystem:
    grid: GridPair
    aux: AuxiliaryBasisSet
    A: sp.csr_matrix
    M: sp.csr_matrix
    prolongation: sp.csc_matrix
    lumped: bool = False

    def rhs(self, f: GridFunction) -> np.ndarray:
        """``F_beta = (f, psi_beta)``."""
        return self.prolongation.T @ load_vector(self.grid, f)

    def __len__(self):
        return self.A.shape[0]


def assemble_coarse(grid: GridPair, field: MediaField, bases: BasisCollection, lumped: bool = False) -> CoarseSystem:
    """Galerkin matrices ``a_Q(psi_a, psi_b)`` and ``c(psi_a, psi_b)``.

    The bases are zero-extended to the whole domain and paired through the
    global fine operators. ``lumped=True`` replaces the mass matrix with the
    diagonal ``c_i |K_alpha|`` (sub-region averages of c).
    """
    aux = bases.aux
    if len(bases) != len(aux):
        raise ValueError(f"{len(bases)} bases for {len(aux)} DOFs")
    missing = [aux.dofs[a] for a, b in enumerate(bases) if b is None or b.dof != a]
    if missing:
        raise ValueError(f"missing or misplaced bases for DOFs {missing[:5]}")
    P = bases.prolongation()
    A_fine = assemble_aQ(grid, field)
    A = (P.T @ (A_fine @ P)).tocsr()
    A = ((A + A.T) * 0.5).tocsr()
    if lumped:
        c = np.zeros(len(aux))
        for a in range(len(aux)):
            i = aux.continuum[a]
            c[a] = field.compressibility(i)[aux.support(a)].sum() * grid.fine_area
        M = sp.diags(c, format="csr")
    else:
        M_fine = assemble_mass(grid, field)
        M = (P.T @ (M_fine @ P)).tocsr()
        M = ((M + M.T) * 0.5).tocsr()
    A.eliminate_zeros()
    return CoarseSystem(grid, aux, A, M, P, lumped)


@dataclass(eq=False)
class CoarseSolution:
    """Coefficients over DOFs; ``coefficients[n]`` belongs to ``times[n]`` when transient."""

    coefficients: np.ndarray
    aux: AuxiliaryBasisSet
    times: np.ndarray | None = None

    @property
    def final(self) -> np.ndarray:
        return self.coefficients if self.times is None else self.coefficients[-1]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        header = ["continuum", "block_row", "block_col", "sub_region", "coefficient"]
        nc = self.aux.grid.n_coarse
        if self.times is None:
            writer.writerow(header)
            for (i, j, l), u in zip(self.aux.dofs, self.coefficients):
                writer.writerow([i, j // nc, j % nc, l, repr(float(u))])
        else:
            writer.writerow(header + ["time"])
            for t, row in zip(self.times, self.coefficients):
                for (i, j, l), u in zip(self.aux.dofs, row):
                    writer.writerow([i, j // nc, j % nc, l, repr(float(u)), repr(float(t))])
        return buf.getvalue()


def solve_coarse_static(system: CoarseSystem, f: GridFunction, rtol: float = RTOL) -> CoarseSolution:
    F = system.rhs(f)
    if not np.any(F):
        return CoarseSolution(np.zeros(len(system)), system.aux)
    u = coarse_solver(system.A, rtol).solve(F)
    return CoarseSolution(u, system.aux)


def solve_coarse_transient(
    system: CoarseSystem,
    f: Source,
    dt: float,
    T: float,
    u0: np.ndarray | None = None,
    p0: GridFunction | None = None,
    rtol: float = RTOL,
) -> CoarseSolution:
    """Backward Euler on ``M u' + A u = F(f(t))``.

    The initial coefficients are ``u0`` if given, else the pairings of ``p0``
    with the auxiliary indicators, else zero.
    """
    if u0 is None:
        if p0 is not None:
            u0 = system.aux.pairing_matrix() @ p0.vector()
        else:
            u0 = np.zeros(len(system))
    M = system.M.toarray() if len(system) < DENSE_LIMIT else system.M
    A = system.A.toarray() if len(system) < DENSE_LIMIT else system.A
    times, states = backward_euler(
        M, A, lambda t: system.rhs(_source_at(f, t)), u0, dt, T, lambda K: coarse_solver(K, rtol)
    )
    return CoarseSolution(np.array(states), system.aux, times)


def downscale(system_or_bases: CoarseSystem | BasisCollection, coefficients) -> GridFunction:
    """Fine-grid expansion ``sum_alpha u_alpha psi_alpha``."""
    if isinstance(coefficients, CoarseSolution):
        coefficients = coefficients.final
    P = (
        system_or_bases.prolongation
        if isinstance(system_or_bases, CoarseSystem)
        else system_or_bases.prolongation()
    )
    coefficients = np.asarray(coefficients, dtype=float)
    if coefficients.shape != (P.shape[1],):
        raise ValueError(f"expected {P.shape[1]} coefficients, got shape {coefficients.shape}")
    return GridFunction.from_vector(P @ coefficients)
