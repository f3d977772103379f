"""Experiment reproductions: mass-unit sweeps, convergence fits, event maps.

An ExperimentSpec pins one physical setup (grid, fields, initial state,
final time) plus a geometric ladder of mass units. run_sweep executes every
(scheme, mass unit) pair against a cached reference solution, records the
scaled-L2 error and event statistics, and fits the observed orders over the
small-mass-unit regime.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .grid import (FieldSpec, Grid, PointSource, SineLine, build_cartesian,
                   apply_initial_condition, fracture_random_walk)
from .reference import ReferenceSolution, cached_reference
from .schemes import ReactionTerm, RunMetrics, SchemeConfig, langmuir, run

__all__ = [
    "ExperimentSpec",
    "SweepRow",
    "SweepResult",
    "discrete_l2_error",
    "experiment_fracture",
    "experiment_uniform3d",
    "experiment_reaction",
    "materialize",
    "run_sweep",
    "fit_loglog",
    "regime_suffix",
    "event_map",
    "fracture_distance",
    "write_sweep_csv",
    "summary_text",
]

logger = logging.getLogger(__name__)

DEFAULT_SCHEMES = ("bas", "bast", "bas-casc")


def discrete_l2_error(c: np.ndarray, c_ref: np.ndarray) -> float:
    """Euclidean norm of c - c_ref scaled by 1/sqrt(J)."""
    c = np.asarray(c, dtype=np.float64)
    c_ref = np.asarray(c_ref, dtype=np.float64)
    if c.shape != c_ref.shape:
        raise ValueError(f"length mismatch: {c.shape} vs {c_ref.shape}")
    return float(np.linalg.norm(c - c_ref) / np.sqrt(c.size))


@dataclass(frozen=True)
class ExperimentSpec:
    """One experiment: geometry, fields, schemes and the mass-unit ladder."""

    name: str
    dims: tuple[int, int, int]
    extent: tuple[float, float, float]
    diffusivity: object
    velocity: tuple[float, float, float]
    initial_condition: object
    delta_m_ladder: tuple[float, ...]
    final_time: float
    schemes: tuple[str, ...] = DEFAULT_SCHEMES
    reference_tol: float = 1e-10
    seed: int = 42
    fracture: tuple[float, float] | None = None   # (D_inside, D_outside)
    fracture_bias: dict | None = None
    fracture_start: tuple[int, int] | None = None
    reaction: ReactionTerm | None = None
    max_events: int = 2_000_000_000

    def __post_init__(self):
        ladder = self.delta_m_ladder
        if len(ladder) < 3:
            raise ValueError("ladder needs >= 3 points for order estimation")
        if any(b >= a for a, b in zip(ladder, ladder[1:])):
            raise ValueError("ladder must be strictly decreasing")


def experiment_fracture(scale: str = "full") -> ExperimentSpec:
    """Fracture system: point source advected over a high-D random walk."""
    if scale == "full":
        dims, ladder = (100, 100, 1), (1e-5, 1e-6, 1e-7, 1e-8, 1e-9)
    elif scale == "desk":
        dims, ladder = (50, 50, 1), (1e-4, 1e-5, 1e-6, 1e-7)
    else:
        raise ValueError(f"unknown scale {scale!r}")
    return ExperimentSpec(
        name="fracture",
        dims=dims,
        extent=(10.0, 10.0, 10.0),
        diffusivity=0.1,
        velocity=(1.0, 0.0, 0.0),
        initial_condition=PointSource((4.95, 9.95)),
        delta_m_ladder=ladder,
        final_time=2.4,
        fracture=(100.0, 0.1),
        seed=42)


def experiment_uniform3d(scale: str = "full") -> ExperimentSpec:
    """3D uniform-diffusivity system with a sinusoidal line source."""
    if scale == "full":
        dims = (40, 40, 32)
        ladder = (1.953e-6, 1.953e-7, 1.953e-8, 1.953e-9, 1.953e-10)
    elif scale == "desk":
        dims = (10, 10, 8)
        ladder = (1.953e-4, 1.953e-5, 1.953e-6)
    else:
        raise ValueError(f"unknown scale {scale!r}")
    return ExperimentSpec(
        name="uniform3d",
        dims=dims,
        extent=(10.0, 10.0, 10.0),
        diffusivity=2.0,
        velocity=(0.1, 1.1, 0.0),
        initial_condition=SineLine(),
        delta_m_ladder=ladder,
        final_time=2.4)


def experiment_reaction(scale: str = "full") -> ExperimentSpec:
    """Diffusion of a central point source with a Langmuir adsorption sink."""
    if scale == "full":
        dims, ladder = (100, 100, 1), (1e-5, 1e-6, 1e-7, 1e-8, 1e-9)
    elif scale == "desk":
        dims, ladder = (50, 50, 1), (1e-4, 1e-5, 1e-6, 1e-7)
    else:
        raise ValueError(f"unknown scale {scale!r}")
    return ExperimentSpec(
        name="reaction",
        dims=dims,
        extent=(10.0, 10.0, 10.0),
        diffusivity=2.0,
        velocity=(0.0, 0.0, 0.0),
        initial_condition=PointSource((4.95, 5.05)),
        delta_m_ladder=ladder,
        final_time=1.0,
        reaction=langmuir())


def materialize(spec: ExperimentSpec) -> tuple[Grid, np.ndarray, list[int]]:
    """Build the grid (running the fracture walk if any) and initial mass."""
    fracture_cells: list[int] = []
    if spec.fracture is not None:
        d_in, d_out = spec.fracture
        probe = build_cartesian(spec.dims, spec.extent,
                                FieldSpec(diffusivity=d_out,
                                          velocity=spec.velocity))
        fracture_cells = fracture_random_walk(
            probe, spec.seed, bias=spec.fracture_bias,
            start=spec.fracture_start)
        diffusivity = (fracture_cells, d_in, d_out)
    else:
        diffusivity = spec.diffusivity
    grid = build_cartesian(spec.dims, spec.extent,
                           FieldSpec(diffusivity=diffusivity,
                                     velocity=spec.velocity))
    m0 = apply_initial_condition(grid, spec.initial_condition)
    return grid, m0, fracture_cells


@dataclass
class SweepRow:
    scheme: str
    delta_m: float
    error: float
    n_events: int
    dt_avg: float
    wall_s: float
    metrics: RunMetrics | None = None
    failed: str | None = None


@dataclass
class SweepResult:
    spec: ExperimentSpec
    rows: list[SweepRow]
    error_orders: dict[str, tuple[float, int]]    # scheme -> (slope, points)
    event_orders: dict[str, tuple[float, int]]
    reference: ReferenceSolution
    fracture_cells: list[int]
    grid: Grid
    wall: float = 0.0

    def rows_for(self, scheme: str) -> list[SweepRow]:
        return [r for r in self.rows if r.scheme == scheme and r.failed is None]


def fit_loglog(x, y) -> float:
    """Least-squares slope of log10(y) against log10(x)."""
    lx = np.log10(np.asarray(x, dtype=np.float64))
    ly = np.log10(np.asarray(y, dtype=np.float64))
    slope, _ = np.polyfit(lx, ly, 1)
    return float(slope)


def regime_suffix(x, y, rel_window: float = 0.3, min_points: int = 3) -> int:
    """Start index of the asymptotic-regime suffix of a descending ladder.

    The regime is the largest contiguous suffix whose local log-log slopes
    agree within rel_window of their median magnitude; falls back to the
    final min_points points when no longer suffix qualifies.
    """
    lx = np.log10(np.asarray(x, dtype=np.float64))
    ly = np.log10(np.asarray(y, dtype=np.float64))
    n = lx.size
    if n < min_points:
        return 0
    slopes = np.diff(ly) / np.diff(lx)
    for start in range(0, n - min_points + 1):
        s = slopes[start:]
        scale = max(abs(np.median(s)), 1e-12)
        if s.max() - s.min() <= rel_window * scale:
            return start
    return n - min_points


def _fit_regime(x, y) -> tuple[float, int]:
    start = regime_suffix(x, y)
    return fit_loglog(x[start:], y[start:]), int(len(x) - start)


def run_sweep(spec: ExperimentSpec, cache_dir=None, jobs: int = 1,
              progress: bool = True) -> SweepResult:
    """Run every (scheme, mass unit) pair and fit the observed orders.

    Individual run failures are recorded on their row and the sweep
    continues. Deterministic for a fixed spec (seed included).
    """
    grid, m0, fracture_cells = materialize(spec)
    ref = cached_reference(grid, m0, spec.final_time, reaction=spec.reaction,
                           tol=spec.reference_tol, cache_dir=cache_dir)

    jobs_list = [(scheme, dm) for scheme in spec.schemes
                 for dm in spec.delta_m_ladder]

    def one(job):
        scheme, dm = job
        cfg = SchemeConfig(delta_m=dm, final_time=spec.final_time,
                           variant=scheme, reaction=spec.reaction,
                           max_events=spec.max_events)
        try:
            state, metrics = run(grid, m0, cfg)
        except Exception as exc:  # recorded per-row, sweep continues
            logger.warning("%s run failed at delta_m=%g: %s", scheme, dm, exc)
            return SweepRow(scheme=scheme, delta_m=dm, error=float("nan"),
                            n_events=0, dt_avg=float("nan"),
                            wall_s=float("nan"), failed=str(exc))
        err = discrete_l2_error(state.mass / grid.cell_volumes,
                                ref.concentration)
        metrics.error = err
        if progress:
            logger.info("%s delta_m=%.3g: error=%.3e N=%d wall=%.2fs",
                        scheme, dm, err, metrics.total_events,
                        metrics.wall_time)
        return SweepRow(scheme=scheme, delta_m=dm, error=err,
                        n_events=metrics.total_events,
                        dt_avg=metrics.dt_avg, wall_s=metrics.wall_time,
                        metrics=metrics)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(one, jobs_list))
    else:
        rows = [one(job) for job in jobs_list]

    error_orders: dict[str, tuple[float, int]] = {}
    event_orders: dict[str, tuple[float, int]] = {}
    for scheme in spec.schemes:
        ok = [r for r in rows if r.scheme == scheme and r.failed is None
              and np.isfinite(r.error) and r.error > 0.0]
        if len(ok) >= 3:
            dms = np.array([r.delta_m for r in ok])
            errs = np.array([r.error for r in ok])
            ns = np.array([r.n_events for r in ok], dtype=np.float64)
            error_orders[scheme] = _fit_regime(dms, errs)
            event_orders[scheme] = _fit_regime(dms, ns)
    return SweepResult(spec=spec, rows=rows, error_orders=error_orders,
                       event_orders=event_orders, reference=ref,
                       fracture_cells=fracture_cells, grid=grid)


def event_map(grid: Grid, per_cell_events: np.ndarray) -> np.ndarray:
    """Per-cell log10(1 + event count)."""
    return np.log10(1.0 + np.asarray(per_cell_events, dtype=np.float64))


def fracture_distance(grid: Grid, fracture_cells) -> np.ndarray:
    """Chebyshev index distance from each cell to the fracture set (2D)."""
    nx, ny, _ = grid.dims
    cells = np.asarray(list(fracture_cells), dtype=np.int64)
    fx, fy = cells % nx, (cells // nx) % ny
    j = np.arange(grid.num_cells)
    jx, jy = j % nx, (j // nx) % ny
    dx = np.abs(jx[:, None] - fx[None, :])
    dy = np.abs(jy[:, None] - fy[None, :])
    return np.minimum.reduce(np.maximum(dx, dy), axis=1)


def write_sweep_csv(result: SweepResult, path, comment: str | None = None) -> None:
    with open(path, "w") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        fh.write("scheme,delta_m,error,n_events,dt_avg,wall_s\n")
        for r in result.rows:
            fh.write(f"{r.scheme},{float(r.delta_m)!r},{float(r.error)!r},"
                     f"{int(r.n_events)},{float(r.dt_avg)!r},"
                     f"{float(r.wall_s)!r}\n")


def summary_text(result: SweepResult) -> str:
    lines = [f"experiment: {result.spec.name}",
             f"grid: {result.spec.dims} over {result.spec.extent} m "
             f"(J={result.grid.num_cells}, K={result.grid.num_faces})",
             f"reference: {result.reference.method} "
             f"(accuracy {result.reference.accuracy:.2e})"]
    for scheme in result.spec.schemes:
        if scheme in result.error_orders:
            p, np_ = result.error_orders[scheme]
            q, nq = result.event_orders[scheme]
            lines.append(f"{scheme}: error order p={p:.3f} ({np_} pts), "
                         f"N slope q={q:.3f} ({nq} pts)")
        else:
            lines.append(f"{scheme}: insufficient successful points for a fit")
        for r in result.rows_for(scheme):
            lines.append(f"  delta_m={r.delta_m:.4g} error={r.error:.6e} "
                         f"N={r.n_events} dt_avg={r.dt_avg:.6e}")
    failed = [r for r in result.rows if r.failed]
    for r in failed:
        lines.append(f"FAILED {r.scheme} delta_m={r.delta_m:.4g}: {r.failed}")
    return "\n".join(lines) + "\n"


def export_event_map_csv(grid: Grid, values: np.ndarray, path,
                         comment: str | None = None) -> None:
    """CSV event map: one row per y index for single-layer grids, else
    flat (cell_id, value) rows."""
    nx, ny, nz = grid.dims
    with open(path, "w") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        if nz == 1:
            for iy in range(ny):
                row = values[iy * nx:(iy + 1) * nx]
                fh.write(",".join(repr(float(v)) for v in row) + "\n")
        else:
            fh.write("cell_id,value\n")
            for j, v in enumerate(values):
                fh.write(f"{j},{float(v)!r}\n")
