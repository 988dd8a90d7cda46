"""Experiment drivers: static and transient runs, sweeps and the decay study."""

from __future__ import annotations

import contextlib
import logging
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from nlmc.basis import BasisCollection, SolverOptions, build_all_ms_bases, build_auxiliary, build_global_basis, build_ms_basis
from nlmc.coarse import CoarseSolution, CoarseSystem, assemble_coarse, downscale, solve_coarse_static, solve_coarse_transient
from nlmc.finescale import GridFunction, assemble_aQ, energy, solve_static_fine, solve_transient_fine
from nlmc.grid import GridPair, build_grid, oversample
from nlmc.media import MediaError, MediaField, generate_channelized, load_grid_field, load_media, partition_continua, save_grid_field, save_media
from nlmc.metrics import ErrorReport, coarse_average, energy_tail, relative_l2_error, reports_to_csv, series_to_csv
from nlmc.runner.config import ConfigError, ExperimentConfig

logger = logging.getLogger(__name__)


class ExperimentLimitError(ConfigError):
    """The requested run exceeds a configured size limit."""


@contextlib.contextmanager
def stage(name: str, timings: dict[str, float]):
    start = time.perf_counter()
    try:
        yield
    except Exception as exc:
        if not hasattr(exc, "stage"):
            exc.stage = name
        raise
    finally:
        timings[name] = timings.get(name, 0.0) + time.perf_counter() - start


# --- inputs ------------------------------------------------------------------


def source_grid(spec: str, n: int, base_dir: Path = Path(".")) -> np.ndarray:
    """Source values on an ``n x n`` fine grid from a source spec string.

    ``static_default`` is +1 on a 16x16-cell square centered in the lower-left
    quadrant and -1 on one centered in the upper-right quadrant.
    ``five_spot`` is +1 on an 8x8-cell square at the center and -1/4 on 8x8
    squares in the four corners. Squares shrink on grids too small to hold them.
    """
    kind, _, arg = spec.partition(":")
    out = np.zeros((n, n))
    if kind == "zero":
        pass
    elif kind == "constant":
        out[:] = float(arg)
    elif kind == "static_default":
        s = min(16, n // 2)
        for center, value in ((n // 4, 1.0), ((3 * n) // 4, -1.0)):
            lo = max(center - s // 2, 0)
            out[lo : lo + s, lo : lo + s] = value
    elif kind == "five_spot":
        s = max(1, min(8, n // 3))
        lo = n // 2 - s // 2
        out[lo : lo + s, lo : lo + s] = 1.0
        for rows in (slice(0, s), slice(n - s, n)):
            for cols in (slice(0, s), slice(n - s, n)):
                out[rows, cols] = -0.25
    elif kind == "sine":
        c = (np.arange(n) + 0.5) / n
        out[:] = 2 * np.pi**2 * np.outer(np.sin(np.pi * c), np.sin(np.pi * c))
    elif kind == "file":
        path = Path(arg)
        out = load_grid_field(path if path.is_absolute() else base_dir / path)
        if out.shape != (n, n):
            raise MediaError(f"source file {arg} has shape {out.shape}, grid needs ({n}, {n})")
    else:
        raise ConfigError(f"unknown source kind {kind!r}")
    return out


def build_source(cfg: ExperimentConfig) -> GridFunction:
    f1 = source_grid(cfg.f1, cfg.n_fine, cfg.base_dir)
    f2 = source_grid(cfg.f2, cfg.n_fine, cfg.base_dir)
    return GridFunction(np.stack([f1.ravel(), f2.ravel()]))


def build_media(cfg: ExperimentConfig, grid: GridPair) -> MediaField:
    if cfg.media_source == "files":
        field_ = load_media(cfg.resolve(cfg.manifest), grid)
    else:
        field_ = generate_channelized(grid, cfg.contrast, cfg.seed)
    if cfg.sigma is not None:
        field_ = field_.with_sigma(cfg.sigma)
    return field_


def center_block(grid: GridPair) -> int:
    n = grid.n_coarse
    return (n // 2) * n + n // 2


# --- output ------------------------------------------------------------------


class ArtifactWriter:
    """Writes files under one directory and keeps the ``role path`` index."""

    def __init__(self, directory: Path | None):
        self.directory = directory
        self.index: dict[str, Path] = {}
        if directory is not None:
            directory.mkdir(parents=True, exist_ok=True)

    def grid(self, role: str, values: np.ndarray):
        if self.directory is not None:
            path = self.directory / f"{role}.txt"
            save_grid_field(path, values)
            self.index[role] = path

    def text(self, role: str, filename: str, content: str):
        if self.directory is not None:
            path = self.directory / filename
            path.write_text(content)
            self.index[role] = path

    def finish(self, timings: dict[str, float]):
        if self.directory is None:
            return
        lines = [f"{k} {v:.3f}" for k, v in timings.items()]
        (self.directory / "timings.txt").write_text("\n".join(lines) + "\n")
        self.index["timings"] = self.directory / "timings.txt"
        manifest = [f"{role} {path.relative_to(self.directory)}" for role, path in self.index.items()]
        (self.directory / "artifacts.txt").write_text("\n".join(manifest) + "\n")


def _coarse_grid(values: np.ndarray, grid: GridPair) -> np.ndarray:
    return values.reshape(grid.n_coarse, grid.n_coarse)


def _write_triple(out: ArtifactWriter, grid: GridPair, p_f: GridFunction, p_ms: GridFunction, suffix: str = ""):
    avg_f, avg_ms = coarse_average(grid, p_f), coarse_average(grid, p_ms)
    n = grid.n_fine
    for i in (1, 2):
        out.grid(f"fine_p{i}{suffix}", p_f.values[i - 1].reshape(n, n))
        out.grid(f"fine_average_p{i}{suffix}", _coarse_grid(avg_f[i - 1], grid))
        out.grid(f"nlmc_p{i}{suffix}", _coarse_grid(avg_ms[i - 1], grid))


# --- results -----------------------------------------------------------------


@dataclass(eq=False)
class RunResult:
    report: ErrorReport
    grid: GridPair
    media: MediaField
    bases: BasisCollection
    system: CoarseSystem
    solution: CoarseSolution
    fine: GridFunction
    nlmc: GridFunction
    artifacts: dict[str, Path] = field(default_factory=dict)
    timings: dict[str, float] = field(default_factory=dict)
    fine_series: list[GridFunction] | None = None


def _output_dir(cfg: ExperimentConfig, output: Path | str | None) -> Path | None:
    if output is False:
        return None
    return Path(output) if output is not None else cfg.resolve(cfg.output)


def _coarse_setup(cfg, nc, m, media, timings):
    grid = build_grid(nc, cfg.n_fine // nc)
    opts = SolverOptions(tol_constraint=cfg.tol_constraint)
    with stage("partition", timings):
        part = partition_continua(grid, media, cfg.partition_mode, cfg.threshold)
        aux = build_auxiliary(grid, part)
    with stage("basis", timings):
        bases = build_all_ms_bases(grid, media, aux, m, cfg.workers, opts)
    with stage("coarse_assembly", timings):
        system = assemble_coarse(grid, media, bases, lumped=cfg.mass == "lumped")
    return grid, bases, system


def run_static_experiment(
    cfg: ExperimentConfig,
    output: Path | str | None = None,
    entry: tuple[int, int] | None = None,
    fine: GridFunction | None = None,
) -> RunResult:
    """One static run at ``entry = (n_coarse, m)`` (default: the config's pair).

    ``output=False`` skips writing artifacts. A precomputed fine solution on
    the same fine grid may be passed in to skip the reference solve.
    """
    cfg.validate()
    nc, m = entry or (cfg.n_coarse, cfg.layers)
    timings: dict[str, float] = {}
    out = ArtifactWriter(_output_dir(cfg, output))
    fine_grid = build_grid(1, cfg.n_fine)
    with stage("media", timings):
        media = build_media(cfg, fine_grid)
        f = build_source(cfg)
    if fine is None:
        with stage("fine_solve", timings):
            fine = solve_static_fine(fine_grid, media, f, cfg.solver_method, cfg.rtol)
    grid, bases, system = _coarse_setup(cfg, nc, m, media, timings)
    with stage("coarse_solve", timings):
        solution = solve_coarse_static(system, f, cfg.rtol)
        p_ms = downscale(system, solution)
    e1, e2 = relative_l2_error(coarse_average(grid, fine), coarse_average(grid, p_ms))
    report = ErrorReport(
        Fraction(1, nc), m, e1, e2, oversample(grid, center_block(grid), m).area_ratio,
        media_hash=media.digest(), config_hash=cfg.digest(),
    )
    _write_triple(out, grid, fine, p_ms)
    out.text("coarse_solution", "coarse_solution.csv", solution.to_csv())
    out.text("errors", "errors.csv", reports_to_csv([report], with_area=True))
    out.finish(timings)
    logger.info("static H=1/%d m=%d: e1=%.4f%% e2=%.4f%%", nc, m, 100 * e1, 100 * e2)
    return RunResult(report, grid, media, bases, system, solution, fine, p_ms, out.index, timings)


def run_sweep(cfg: ExperimentConfig, output: Path | str | None = None) -> tuple[list[RunResult], str]:
    """Static runs over ``cfg.entries()`` sharing one fine reference solve."""
    cfg.validate()
    root = _output_dir(cfg, output)
    results = []
    fine = None
    for nc, m in cfg.entries():
        sub = False if root is None else root / f"H{nc}_m{m}"
        res = run_static_experiment(cfg, sub, (nc, m), fine)
        fine = res.fine
        results.append(res)
    table = reports_to_csv([r.report for r in results])
    if root is not None:
        (root / "sweep.csv").write_text(table)
    return results, table


def snapshot_steps(n_steps: int) -> list[int]:
    """Steps at a quarter, half and the full horizon."""
    return sorted({max(1, round(n_steps / 4)), max(1, round(n_steps / 2)), n_steps})


def run_transient_experiment(
    cfg: ExperimentConfig,
    output: Path | str | None = None,
    entry: tuple[int, int] | None = None,
) -> RunResult:
    cfg.validate()
    nc, m = entry or (cfg.n_coarse, cfg.layers)
    timings: dict[str, float] = {}
    out = ArtifactWriter(_output_dir(cfg, output))
    fine_grid = build_grid(1, cfg.n_fine)
    with stage("media", timings):
        media = build_media(cfg, fine_grid)
        f = build_source(cfg)
        p0 = None
        if cfg.p0 != "zero":
            p0 = GridFunction(np.stack([load_grid_field(cfg.resolve(cfg.p0)).ravel()] * 2))
    with stage("fine_solve", timings):
        times, fine_states = solve_transient_fine(fine_grid, media, f, p0, cfg.dt, cfg.T, cfg.solver_method, cfg.rtol)
    grid, bases, system = _coarse_setup(cfg, nc, m, media, timings)
    with stage("coarse_solve", timings):
        solution = solve_coarse_transient(system, f, cfg.dt, cfg.T, p0=p0, rtol=cfg.rtol)
    series = []
    nlmc_states = []
    for n, t in enumerate(times):
        p_ms = downscale(system, solution.coefficients[n])
        nlmc_states.append(p_ms)
        if n == 0:
            continue
        e1, e2 = relative_l2_error(coarse_average(grid, fine_states[n]), coarse_average(grid, p_ms))
        series.append((float(t), e1, e2))
    _, e1, e2 = series[-1]
    report = ErrorReport(
        Fraction(1, nc), m, e1, e2, oversample(grid, center_block(grid), m).area_ratio, series,
        media_hash=media.digest(), config_hash=cfg.digest(),
    )
    for step in snapshot_steps(len(times) - 1):
        _write_triple(out, grid, fine_states[step], nlmc_states[step], suffix=f"_step{step}")
    out.text("coarse_solution", "coarse_solution.csv", solution.to_csv())
    out.text("error_series", "error_series.csv", series_to_csv(report))
    out.text("errors", "errors.csv", reports_to_csv([report], with_area=True))
    out.finish(timings)
    logger.info("transient H=1/%d m=%d: final e1=%.4f%% e2=%.4f%%", nc, m, 100 * e1, 100 * e2)
    return RunResult(
        report, grid, media, bases, system, solution, fine_states[-1], nlmc_states[-1],
        out.index, timings, fine_states,
    )


@dataclass
class DecayRow:
    m: int
    area_ratio: float
    difference: float
    tail: float


def run_decay_study(cfg: ExperimentConfig, output: Path | str | None = None) -> tuple[list[DecayRow], str]:
    """``||phi - psi(m)||_{a_Q}`` and the global basis energy outside ``K_{j,m}``."""
    cfg.validate()
    timings: dict[str, float] = {}
    out = ArtifactWriter(_output_dir(cfg, output))
    grid = build_grid(cfg.n_coarse, cfg.refine)
    with stage("media", timings):
        media = build_media(cfg, grid)
        part = partition_continua(grid, media, cfg.partition_mode, cfg.threshold)
        aux = build_auxiliary(grid, part)
    unknowns = 2 * grid.num_fine + len(aux)
    if unknowns > cfg.max_global_unknowns:
        raise ExperimentLimitError(
            f"global basis system has {unknowns} unknowns, above max_global_unknowns={cfg.max_global_unknowns}"
        )
    dof = (1, center_block(grid), 0) if cfg.decay_dof == "center" else tuple(int(t) for t in cfg.decay_dof.split(","))
    if dof not in aux.index:
        raise ConfigError(f"decay dof {dof} does not exist for this partition")
    opts = SolverOptions(tol_constraint=cfg.tol_constraint)
    A = assemble_aQ(grid, media)
    with stage("global_basis", timings):
        phi = build_global_basis(grid, media, aux, dof, opts).extend(grid)
    rows = []
    with stage("local_bases", timings):
        for m in cfg.decay_layers:
            psi = build_ms_basis(grid, media, aux, dof, m, opts)
            diff = np.sqrt(max(energy(A, phi - psi.extend(grid)), 0.0))
            tail = energy_tail(grid, media, phi, psi.region)
            rows.append(DecayRow(m, psi.region.area_ratio, diff, tail))
    lines = ["m,area_ratio_pct,difference_aQ,tail_energy"]
    lines += [f"{r.m},{100 * r.area_ratio:.2f},{r.difference:.6e},{r.tail:.6e}" for r in rows]
    table = "\n".join(lines) + "\n"
    out.text("decay", "decay.csv", table)
    out.finish(timings)
    return rows, table


def generate_media(cfg: ExperimentConfig, output: Path | str | None = None) -> Path:
    """Write the configured media under ``output`` and return the manifest path."""
    cfg.validate()
    grid = build_grid(1, cfg.n_fine)
    media = build_media(cfg, grid)
    directory = _output_dir(cfg, output)
    manifest = directory / "media.txt"
    save_media(media, manifest)
    return manifest
