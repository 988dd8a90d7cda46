"""Coarse-cell averages, relative errors and localized energy norms."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from nlmc.finescale import GridFunction
from nlmc.grid import GridPair, OversampleRegion, face_list
from nlmc.media import MediaField


class UndefinedRelativeError(ValueError):
    """Reference averages vanish while the approximation does not."""


def coarse_average(grid: GridPair, v: GridFunction) -> np.ndarray:
    """Block means, shape ``(2, num_coarse)``."""
    if v.num_cells != grid.num_fine:
        raise ValueError(f"expected {grid.num_fine} cells, got {v.num_cells}")
    sums = np.stack([np.bincount(grid.fine_to_coarse, vi, grid.num_coarse) for vi in v.values])
    return sums / grid.refine**2


def relative_l2_error(avg_f: np.ndarray, avg_ms: np.ndarray) -> tuple[float, float]:
    """Per-continuum ``||avg_f - avg_ms|| / ||avg_f||`` over coarse blocks.

    Identical inputs give 0 even when both vanish; a vanishing reference with
    a nonzero approximation raises :class:`UndefinedRelativeError`.
    """
    avg_f, avg_ms = np.asarray(avg_f, float), np.asarray(avg_ms, float)
    if avg_f.shape != avg_ms.shape or avg_f.shape[0] != 2:
        raise ValueError(f"shape mismatch {avg_f.shape} vs {avg_ms.shape}")
    out = []
    for i in range(2):
        num = np.sum((avg_f[i] - avg_ms[i]) ** 2)
        den = np.sum(avg_f[i] ** 2)
        if num == 0:
            out.append(0.0)
        elif den == 0:
            raise UndefinedRelativeError(f"continuum {i + 1}: reference averages are all zero")
        else:
            out.append(float(np.sqrt(num / den)))
    return out[0], out[1]


def cell_energy(grid: GridPair, field: MediaField, v: GridFunction) -> np.ndarray:
    """Per-fine-cell share of ``a_Q(v, v)`` on the whole domain.

    Interior face terms are split evenly between the two adjacent cells;
    boundary and exchange terms belong to their cell. Summing over all cells
    gives the full quadratic form.
    """
    faces = face_list(grid)
    n = grid.num_fine
    out = np.zeros(n)
    a, b = faces.interior[:, 0], faces.interior[:, 1]
    for i in (1, 2):
        kappa = field.kappa(i)
        p = v.values[i - 1]
        t = 2.0 * kappa[a] * kappa[b] / (kappa[a] + kappa[b])
        flux = 0.5 * t * (p[a] - p[b]) ** 2
        out += np.bincount(a, flux, n) + np.bincount(b, flux, n)
        bc = faces.boundary_cell
        out += np.bincount(bc, 2.0 * kappa[bc] * p[bc] ** 2, n)
    out += field.sigma.ravel() * grid.fine_area * (v.values[0] - v.values[1]) ** 2
    return out


def energy_tail(grid: GridPair, field: MediaField, v: GridFunction, excluded: OversampleRegion | None) -> float:
    """``||v||^2_{a_Q(D)}`` with ``D`` the blocks outside ``excluded``."""
    if v.num_cells != grid.num_fine:
        v = v.extend(grid)
    e = cell_energy(grid, field, v)
    if excluded is None:
        return float(e.sum())
    mask = np.ones(grid.num_fine, dtype=bool)
    mask[excluded.fine_cells] = False
    return float(e[mask].sum())


def _fmt_H(H) -> str:
    H = Fraction(H).limit_denominator(10**6)
    return f"{H.numerator}/{H.denominator}" if H.denominator != 1 else str(H.numerator)


@dataclass
class ErrorReport:
    H: Fraction
    m: int | None
    e1: float
    e2: float
    area_ratio: float | None = None
    series: list[tuple[float, float, float]] = field(default_factory=list)
    media_hash: str = ""
    config_hash: str = ""

    def row(self, with_area: bool = False) -> list[str]:
        cells = [_fmt_H(self.H), "global" if self.m is None else str(self.m)]
        if with_area:
            cells.append(f"{100 * self.area_ratio:.2f}")
        cells += [f"{100 * self.e1:.4f}", f"{100 * self.e2:.4f}"]
        return cells


def reports_to_csv(reports: list[ErrorReport], with_area: bool | None = None) -> str:
    """Table layout ``H, m[, area_ratio_pct], e1_pct, e2_pct``.

    The area-ratio column appears by default when every row shares one H
    (an m-sweep).
    """
    if with_area is None:
        with_area = len({r.H for r in reports}) == 1 and all(r.area_ratio is not None for r in reports)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    header = ["H", "m"] + (["area_ratio_pct"] if with_area else []) + ["e1_pct", "e2_pct"]
    writer.writerow(header)
    for r in reports:
        writer.writerow(r.row(with_area))
    return buf.getvalue()


def series_to_csv(report: ErrorReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["time", "e1_pct", "e2_pct"])
    for t, e1, e2 in report.series:
        writer.writerow([repr(float(t)), f"{100 * e1:.4f}", f"{100 * e2:.4f}"])
    return buf.getvalue()
