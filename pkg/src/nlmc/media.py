"""Coefficient fields of the dual-continuum model and their sub-region partition.

All fields are stored as ``(n_fine, n_fine)`` arrays indexed ``[row, col]``
with row 0 at the bottom, so ``field.ravel()`` follows the global fine-cell
numbering of :mod:`nlmc.grid`.
"""

from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import ndimage

from nlmc.grid import GridPair

FIELD_NAMES = ("kappa1", "kappa2", "sigma", "c1", "c2")


class MediaError(ValueError):
    """Invalid coefficient data (bad file, shape or sign)."""


@dataclass(frozen=True, eq=False)
class MediaField:
    kappa1: np.ndarray
    kappa2: np.ndarray
    sigma: np.ndarray
    c1: np.ndarray
    c2: np.ndarray

    def __post_init__(self):
        shape = np.shape(self.kappa1)
        for name in FIELD_NAMES:
            arr = np.array(getattr(self, name), dtype=float)
            if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
                raise MediaError(f"{name} must be a square 2-D array, got shape {arr.shape}")
            if arr.shape != shape:
                raise MediaError(f"{name} has shape {arr.shape}, expected {shape}")
            if not np.all(np.isfinite(arr)):
                raise MediaError(f"{name} contains non-finite values")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        for name in ("kappa1", "kappa2", "c1", "c2"):
            if np.any(getattr(self, name) <= 0):
                raise MediaError(f"{name} must be positive everywhere")
        if np.any(self.sigma < 0):
            raise MediaError("sigma must be nonnegative everywhere")

    @property
    def n_fine(self) -> int:
        return self.kappa1.shape[0]

    def kappa(self, i: int) -> np.ndarray:
        """Permeability of continuum ``i`` (1 or 2), flattened."""
        return (self.kappa1, self.kappa2)[i - 1].ravel()

    def compressibility(self, i: int) -> np.ndarray:
        return (self.c1, self.c2)[i - 1].ravel()

    def contrast(self, i: int) -> float:
        k = self.kappa(i)
        return float(k.max() / k.min())

    def with_sigma(self, sigma: float | np.ndarray) -> MediaField:
        return MediaField(
            self.kappa1, self.kappa2, np.broadcast_to(sigma, self.kappa1.shape), self.c1, self.c2
        )

    def check_grid(self, grid: GridPair):
        if self.n_fine != grid.n_fine:
            raise MediaError(
                f"media has {self.n_fine}x{self.n_fine} cells, grid has "
                f"{grid.n_fine}x{grid.n_fine}"
            )

    def digest(self) -> str:
        """Short content hash used to tag run reports."""
        h = hashlib.sha256()
        for name in FIELD_NAMES:
            h.update(np.ascontiguousarray(getattr(self, name)).tobytes())
        return h.hexdigest()[:16]


def uniform_media(grid: GridPair, kappa1=1.0, kappa2=1.0, sigma=1.0, c1=1.0, c2=1.0) -> MediaField:
    shape = (grid.n_fine, grid.n_fine)
    return MediaField(*(np.full(shape, float(v)) for v in (kappa1, kappa2, sigma, c1, c2)))


# --- channel layouts -------------------------------------------------------


@dataclass(frozen=True)
class Rect:
    """Fine cells ``[row0, row1) x [col0, col1)``."""

    row0: int
    col0: int
    row1: int
    col1: int


@dataclass(frozen=True)
class Polyline:
    """One-cell-wide path through fine-cell ``(row, col)`` vertices."""

    points: tuple[tuple[int, int], ...]


def rasterize(shapes: Sequence[Rect | Polyline], n: int) -> np.ndarray:
    """Boolean ``(n, n)`` mask of the cells covered by ``shapes``."""
    mask = np.zeros((n, n), dtype=bool)
    for shape in shapes:
        if isinstance(shape, Rect):
            r0, r1 = max(shape.row0, 0), min(shape.row1, n)
            c0, c1 = max(shape.col0, 0), min(shape.col1, n)
            if r0 < r1 and c0 < c1:
                mask[r0:r1, c0:c1] = True
        elif isinstance(shape, Polyline):
            pts = list(shape.points)
            if len(pts) == 1:
                pts = pts * 2
            for (ra, ca), (rb, cb) in zip(pts[:-1], pts[1:]):
                rr, cc = _segment_cells(ra, ca, rb, cb)
                keep = (rr >= 0) & (rr < n) & (cc >= 0) & (cc < n)
                mask[rr[keep], cc[keep]] = True
        else:
            raise TypeError(f"unknown channel shape {shape!r}")
    return mask


def _segment_cells(ra, ca, rb, cb):
    # Step one cell at a time along the dominant axis, then fill the diagonal
    # jumps so the path stays 4-connected.
    steps = max(abs(rb - ra), abs(cb - ca))
    t = np.linspace(0.0, 1.0, steps + 1)
    rr = np.rint(ra + t * (rb - ra)).astype(int)
    cc = np.rint(ca + t * (cb - ca)).astype(int)
    out_r, out_c = [rr[0]], [cc[0]]
    for r, c in zip(rr[1:], cc[1:]):
        if r != out_r[-1] and c != out_c[-1]:
            out_r.append(out_r[-1])
            out_c.append(c)
        out_r.append(r)
        out_c.append(c)
    return np.array(out_r), np.array(out_c)


def random_channels(n: int, rng: np.random.Generator, n_channels: int = 6, n_inclusions: int = 8):
    """Draw a channel layout in unit-square coordinates and rasterize it on an
    ``n x n`` grid.

    Long channels run roughly horizontally or vertically across most of the
    domain with a few kinks; short rectangular inclusions are scattered on top.
    Widths scale with the grid so the layout is resolution independent.
    """
    shapes: list[Rect | Polyline] = []
    width = max(1, int(round(n / 128)))
    for c in range(n_channels):
        horizontal = c % 2 == 0
        start, stop = rng.uniform(0.0, 0.15), rng.uniform(0.85, 1.0)
        n_kinks = int(rng.integers(2, 5))
        along = np.linspace(start, stop, n_kinks + 1)
        base = rng.uniform(0.08, 0.92)
        across = np.clip(base + np.cumsum(rng.normal(0.0, 0.04, n_kinks + 1)), 0.02, 0.98)
        for w in range(width):
            pts = []
            for a, b in zip(along, across):
                ia, ib = int(a * (n - 1)), int(b * (n - 1)) + w
                pts.append((ib, ia) if horizontal else (ia, ib))
            shapes.append(Polyline(tuple(pts)))
    for _ in range(n_inclusions):
        x, y = rng.uniform(0.05, 0.95, 2)
        w, hgt = rng.uniform(0.01, 0.05, 2)
        shapes.append(
            Rect(int(y * n), int(x * n), int(y * n) + max(1, int(hgt * n)), int(x * n) + max(1, int(w * n)))
        )
    return shapes


def generate_channelized(
    grid: GridPair,
    contrast: float,
    seed: int = 0,
    channels_spec: dict[str, Sequence[Rect | Polyline]] | None = None,
    sigma: float = 1.0,
    c1: float = 1.0,
    c2: float = 1.0,
) -> MediaField:
    """Two-valued high-contrast media: background 1, channels ``contrast``.

    ``channels_spec`` maps ``"kappa1"`` / ``"kappa2"`` to explicit shape
    lists; a missing entry is drawn at random from an independent stream of
    ``seed``.
    """
    if not contrast >= 1:
        raise MediaError(f"contrast must be >= 1, got {contrast}")
    n = grid.n_fine
    streams = np.random.SeedSequence(seed).spawn(2)
    kappas = []
    for name, stream in zip(("kappa1", "kappa2"), streams):
        if channels_spec is not None and name in channels_spec:
            mask = rasterize(channels_spec[name], n)
        else:
            mask = rasterize(random_channels(n, np.random.default_rng(stream)), n)
        if mask.all():
            raise MediaError(f"{name} channels cover the whole domain; no background left")
        kappa = np.ones((n, n))
        kappa[mask] = float(contrast)
        kappas.append(kappa)
    shape = (n, n)
    return MediaField(
        kappas[0], kappas[1], np.full(shape, float(sigma)), np.full(shape, float(c1)), np.full(shape, float(c2))
    )


# --- file IO ---------------------------------------------------------------


def save_grid_field(path: str | os.PathLike, values: np.ndarray):
    """Write ``values[row, col]`` as ASCII, header ``"nrows ncols"``, bottom row first."""
    values = np.asarray(values, dtype=float)
    if values.ndim != 2:
        raise MediaError(f"expected a 2-D array, got shape {values.shape}")
    lines = [f"{values.shape[0]} {values.shape[1]}"]
    # repr() gives the shortest string that round-trips exactly
    lines.extend(" ".join(repr(float(v)) for v in row) for row in values)
    Path(path).write_text("\n".join(lines) + "\n")


def load_grid_field(path: str | os.PathLike) -> np.ndarray:
    path = Path(path)
    if not path.is_file():
        raise MediaError(f"no such field file: {path}")
    lines = [ln for ln in path.read_text().splitlines() if ln.strip()]
    if not lines:
        raise MediaError(f"{path}: empty file")
    try:
        nrows, ncols = (int(t) for t in lines[0].split())
    except ValueError:
        raise MediaError(f"{path}: malformed header {lines[0]!r}, expected 'nrows ncols'") from None
    body = lines[1:]
    if len(body) != nrows:
        raise MediaError(f"{path}: header says {nrows} rows, found {len(body)}")
    out = np.empty((nrows, ncols))
    for r, line in enumerate(body):
        tokens = line.split()
        if len(tokens) != ncols:
            raise MediaError(f"{path}: row {r} has {len(tokens)} values, expected {ncols}")
        try:
            out[r] = [float(t) for t in tokens]
        except ValueError:
            raise MediaError(f"{path}: row {r} has a non-numeric value") from None
    return out


def save_media(field: MediaField, path: str | os.PathLike) -> dict[str, Path]:
    """Write the five field files next to a manifest at ``path``.

    The manifest holds one ``"name filename"`` pair per line with filenames
    relative to the manifest directory.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    stem = path.stem
    written = {}
    lines = []
    for name in FIELD_NAMES:
        target = path.parent / f"{stem}_{name}.txt"
        save_grid_field(target, getattr(field, name))
        written[name] = target
        lines.append(f"{name} {target.name}")
    path.write_text("\n".join(lines) + "\n")
    return written


def load_media(path: str | os.PathLike, grid: GridPair | None = None) -> MediaField:
    path = Path(path)
    if not path.is_file():
        raise MediaError(f"no such media manifest: {path}")
    entries = {}
    for line in path.read_text().splitlines():
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = line.split(maxsplit=1)
        if len(parts) != 2 or parts[0] not in FIELD_NAMES:
            raise MediaError(f"{path}: malformed manifest line {line!r}")
        entries[parts[0]] = (path.parent / parts[1].strip()).resolve()
    missing = [n for n in FIELD_NAMES if n not in entries]
    if missing:
        raise MediaError(f"{path}: manifest lacks {', '.join(missing)}")
    arrays = {name: load_grid_field(p) for name, p in entries.items()}
    if grid is not None:
        for name, arr in arrays.items():
            if arr.shape != (grid.n_fine, grid.n_fine):
                raise MediaError(
                    f"{entries[name]}: {name} has shape {arr.shape}, grid needs "
                    f"({grid.n_fine}, {grid.n_fine})"
                )
    return MediaField(**arrays)


# --- continuum partition ---------------------------------------------------


@dataclass(frozen=True, eq=False)
class ContinuumPartition:
    """Sub-region labels per coarse block and continuum.

    ``labels[i - 1]`` is a flat array over fine cells holding the block-local
    sub-region label ``l`` (0-based) of each cell for continuum ``i``;
    ``counts[i - 1, j]`` is the number of sub-regions of block ``j``.
    Channelized partitions put the matrix first (label 0, when nonempty)
    followed by channel components in raster-scan order of their first cell.
    """

    grid: GridPair
    labels: np.ndarray
    counts: np.ndarray

    def cells(self, i: int, j: int, l: int) -> np.ndarray:
        """Fine cells of sub-region ``l`` of block ``j`` in continuum ``i``."""
        block = self.grid.coarse_fine_cells(j)
        return block[self.labels[i - 1][block] == l]

    def areas(self, i: int, j: int) -> np.ndarray:
        block = self.grid.coarse_fine_cells(j)
        counts = np.bincount(self.labels[i - 1][block], minlength=self.counts[i - 1, j])
        return counts * self.grid.fine_area


_FOUR_CONNECTED = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]])


def default_threshold(kappa: np.ndarray) -> float:
    """Geometric mean of the extreme values."""
    return float(np.sqrt(kappa.min() * kappa.max()))


def partition_continua(
    grid: GridPair,
    field: MediaField,
    mode: str = "single",
    threshold: float | Sequence[float] | None = None,
) -> ContinuumPartition:
    """Split each coarse block into sub-regions per continuum.

    ``single``: the block is one sub-region. ``channelized``: cells with
    ``kappa_i >= threshold`` form one sub-region per 4-connected component
    inside the block, the remaining cells one matrix sub-region.
    """
    field.check_grid(grid)
    if mode not in ("single", "channelized"):
        raise ValueError(f"unknown partition mode {mode!r}")
    nc, r = grid.n_coarse, grid.refine
    labels = np.zeros((2, grid.num_fine), dtype=np.int64)
    counts = np.ones((2, grid.num_coarse), dtype=np.int64)
    if mode == "single":
        return ContinuumPartition(grid, labels, counts)

    if threshold is None or np.isscalar(threshold):
        thresholds = [threshold, threshold]
    else:
        thresholds = list(threshold)
    for i in (1, 2):
        kappa = (field.kappa1, field.kappa2)[i - 1]
        t = default_threshold(kappa) if thresholds[i - 1] is None else float(thresholds[i - 1])
        if not t > 0:
            raise ValueError(f"threshold must be positive, got {t}")
        channel = kappa >= t
        lab2d = np.zeros_like(kappa, dtype=np.int64)
        for R in range(nc):
            for C in range(nc):
                sl = (slice(R * r, (R + 1) * r), slice(C * r, (C + 1) * r))
                comp, ncomp = ndimage.label(channel[sl], structure=_FOUR_CONNECTED)
                has_matrix = ncomp == 0 or not channel[sl].all()
                # matrix -> 0, components -> 1..ncomp (or 0..ncomp-1 without matrix)
                lab2d[sl] = comp if has_matrix else comp - 1
                counts[i - 1, R * nc + C] = ncomp + (1 if has_matrix else 0) if ncomp else 1
        labels[i - 1] = lab2d.ravel()
    return ContinuumPartition(grid, labels, counts)
