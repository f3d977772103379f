"""Asynchronous event schemes: BAS, BAST and the cascading variant.

Each run advances every interior face from time 0 to the final time T by
discrete mass-transfer events. A face's projected update time is the
moment at which (at its cached flux) one mass unit will have passed; the
face with the smallest update time fires next. Positive flux moves mass
into cell_lo. After an event the fluxes and update times of the
associated faces are refreshed; everything else stays deliberately stale.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np
from numba import njit

from . import _engine
from .discretization import all_face_fluxes
from .event_queue import heap_build
from .grid import Grid

__all__ = [
    "SchemeConfig",
    "ReactionTerm",
    "langmuir",
    "SimState",
    "RunMetrics",
    "EventTrace",
    "RunawayError",
    "ReactionEvaluationError",
    "run",
    "run_bas",
    "run_bast",
    "run_bas_casc",
    "run_metrics",
    "projected_update_time",
    "event_mass",
    "cell_event_counts",
]

logger = logging.getLogger(__name__)

_VARIANT_CODES = {"bas": _engine.BAS, "bast": _engine.BAST,
                  "bas-casc": _engine.CASC}


class RunawayError(RuntimeError):
    """Event cap exceeded; carries the faces with the smallest timesteps."""


class ReactionEvaluationError(RuntimeError):
    """Reaction term returned a non-finite rate."""


@dataclass
class ReactionTerm:
    """Pointwise reaction rate r(c) [concentration/s].

    ``rate`` must be a deterministic scalar function compilable by numba
    in nopython mode (plain arithmetic on floats).
    """

    rate: Callable[[float], float]
    descriptor: str = ""

    def __post_init__(self):
        if self.descriptor == "":
            self.descriptor = getattr(self.rate, "__name__", "reaction")
        self._compiled = (self.rate if hasattr(self.rate, "targetoptions")
                          else njit(cache=False)(self.rate))

    def __call__(self, c):
        return self.rate(c)

    @property
    def compiled(self):
        return self._compiled


def langmuir(scale: float = 1.0) -> ReactionTerm:
    """Langmuir-type adsorption sink r(c) = -scale * c / (1 + c)."""
    a = float(scale)

    def rate(c):
        return -a * c / (1.0 + c)

    return ReactionTerm(rate, descriptor=f"langmuir(scale={a})")


@dataclass
class SchemeConfig:
    """Run parameters: mass unit, final time, variant and safety knobs."""

    delta_m: float
    final_time: float
    variant: str = "bas"
    reaction: ReactionTerm | None = None
    flux_floor: float = 1e-300
    cascade_threshold: float | None = None
    max_events: int = 1_000_000_000
    trace: bool = False
    trace_capacity: int = 1_000_000
    progress_every: int = 1_000_000

    def __post_init__(self):
        if self.delta_m <= 0.0:
            raise ValueError("delta_m must be > 0")
        if self.final_time <= 0.0:
            raise ValueError("final_time must be > 0")
        if self.flux_floor < 0.0:
            raise ValueError("flux_floor must be >= 0")
        if self.variant not in _VARIANT_CODES:
            raise ValueError(f"unknown variant {self.variant!r}; "
                             f"expect one of {sorted(_VARIANT_CODES)}")
        if self.cascade_threshold is not None and self.cascade_threshold <= 0.0:
            raise ValueError("cascade_threshold must be > 0")
        if self.max_events <= 0:
            raise ValueError("max_events must be > 0")


@dataclass
class EventTrace:
    """Per-event record (small runs only): face id, event time, |dm|."""

    face: np.ndarray
    time: np.ndarray
    dm: np.ndarray
    triggered: np.ndarray
    truncated: bool


@dataclass
class SimState:
    """Dynamic per-run state after (or during) a run."""

    mass: np.ndarray
    cell_time: np.ndarray
    face_time: np.ndarray
    update_time: np.ndarray
    face_flux: np.ndarray
    mass_passed: np.ndarray
    event_count: np.ndarray
    signed_event_count: np.ndarray
    reversal: np.ndarray
    system_time: float
    initial_mass: np.ndarray


@dataclass
class RunMetrics:
    """Aggregate statistics of one completed run."""

    total_events: int
    per_face_events: np.ndarray
    per_cell_events: np.ndarray
    dt_avg: float
    wall_time: float
    mass_drift_rel: float
    all_faces_at_T: bool
    max_clock_skew: float
    bast_time_violations: int
    variant: str
    delta_m: float
    final_time: float
    error: float | None = None
    trace: EventTrace | None = None


def cell_event_counts(grid: Grid, per_face_events: np.ndarray) -> np.ndarray:
    """Per-cell totals: each face's events count toward both adjacent cells."""
    counts = np.zeros(grid.num_cells, dtype=np.int64)
    np.add.at(counts, grid.face_lo, per_face_events)
    np.add.at(counts, grid.face_hi, per_face_events)
    return counts


def projected_update_time(grid: Grid, state: SimState, cfg: SchemeConfig,
                          k: int) -> float:
    """Update time t_hat for face k from its cached flux and clock."""
    denom = abs(state.face_flux[k]) * grid.face_area[k]
    T = cfg.final_time
    if denom <= cfg.flux_floor:
        return T
    numer = cfg.delta_m
    if cfg.variant == "bast":
        numer = max(cfg.delta_m - abs(state.mass_passed[k]), 0.0)
    return min(state.face_time[k] + numer / denom, T)


def event_mass(grid: Grid, state: SimState, cfg: SchemeConfig, k: int) -> float:
    """Mass transferred by the next event on face k (always >= 0)."""
    denom = abs(state.face_flux[k]) * grid.face_area[k]
    T = cfg.final_time
    if denom <= cfg.flux_floor:
        return denom * (T - state.face_time[k])
    numer = cfg.delta_m
    if cfg.variant == "bast":
        numer = max(cfg.delta_m - abs(state.mass_passed[k]), 0.0)
    if state.face_time[k] + numer / denom <= T:
        return cfg.delta_m
    return denom * (T - state.face_time[k])


def run(grid: Grid, m0: np.ndarray, cfg: SchemeConfig) -> tuple[SimState, RunMetrics]:
    """Run one asynchronous solve to completion. Deterministic.

    Returns the final state (all face clocks exactly at T) and run metrics.
    Raises RunawayError if cfg.max_events is exceeded and
    ReactionEvaluationError if the reaction term goes non-finite.
    """
    m0 = np.ascontiguousarray(m0, dtype=np.float64)
    J, K = grid.num_cells, grid.num_faces
    if m0.shape != (J,):
        raise ValueError(f"m0 must have shape ({J},)")
    variant = _VARIANT_CODES[cfg.variant]
    T = float(cfg.final_time)
    delta_m = float(cfg.delta_m)
    thr = float(cfg.cascade_threshold if cfg.cascade_threshold is not None
                else delta_m)

    lo = np.ascontiguousarray(grid.face_lo)
    hi = np.ascontiguousarray(grid.face_hi)
    area = np.ascontiguousarray(grid.face_area)
    gdif = np.ascontiguousarray(grid.face_dbar / grid.face_dx)
    vn = np.ascontiguousarray(grid.face_vnormal)
    aptr = np.ascontiguousarray(grid.assoc_ptr)
    aidx = np.ascontiguousarray(grid.assoc_idx)
    V = np.ascontiguousarray(grid.cell_volumes)
    invV = np.ascontiguousarray(1.0 / V)

    m = m0.copy()
    mcomp = np.zeros(J)
    tf = np.zeros(K)
    flux = np.ascontiguousarray(all_face_fluxes(grid, m))
    mp = np.zeros(K)
    tacc = np.zeros(K)
    nk = np.zeros(K, dtype=np.int64)
    s = np.zeros(K)
    cellt = np.zeros(J)
    lastsign = np.zeros(K, dtype=np.int8)
    reversal = np.zeros(K, dtype=np.bool_)

    denom = np.abs(flux) * area
    with np.errstate(divide="ignore"):
        that = np.where(denom <= cfg.flux_floor, T,
                        np.minimum(delta_m / denom, T))
    that = np.ascontiguousarray(that)
    heap, pos = heap_build(that)
    stack = np.empty(max(8 * K, 64), dtype=np.int64)

    istate = np.zeros(8, dtype=np.int64)
    istate[_engine.I_SIZE] = K
    fstate = np.zeros(8)

    cap = cfg.trace_capacity if cfg.trace else 0
    tr_face = np.empty(cap, dtype=np.int64)
    tr_t = np.empty(cap)
    tr_dm = np.empty(cap)
    tr_trig = np.zeros(cap, dtype=np.int8)

    use_reaction = cfg.reaction is not None
    rfun = cfg.reaction.compiled if use_reaction else _engine.zero_rate

    t0 = time.perf_counter()
    while True:
        status = _engine.run_chunk(
            lo, hi, area, gdif, vn, aptr, aidx, V, invV,
            m, mcomp, tf, that, flux, mp, tacc, nk, s, cellt, lastsign, reversal,
            heap, pos, stack, istate, fstate,
            tr_face, tr_t, tr_dm, tr_trig,
            delta_m, T, float(cfg.flux_floor), thr, variant, use_reaction, rfun,
            int(cfg.progress_every), int(cfg.max_events))
        if status == _engine.BUDGET:
            logger.info("%s run: %d events so far (t=%.6g)",
                        cfg.variant, istate[_engine.I_TOTAL],
                        fstate[_engine.F_SYS])
            continue
        if status == _engine.FINISHED:
            break
        if status == _engine.RUNAWAY:
            active = np.flatnonzero(pos >= 0)
            dt = that[active] - tf[active]
            worst = active[np.argsort(dt)][:5]
            raise RunawayError(
                f"exceeded max_events={cfg.max_events}; smallest-timestep "
                f"faces: " + ", ".join(
                    f"face {int(f)} (dt={that[f] - tf[f]:.3e})" for f in worst))
        if status == _engine.REACTION_ERR:
            j = int(istate[_engine.I_ERRCELL])
            c = float(fstate[_engine.F_ERRC])
            raise ReactionEvaluationError(
                f"reaction rate non-finite in cell {j} at concentration {c!r}")
        if status == _engine.STACK_OVERFLOW:
            raise RunawayError("cascade work stack overflow; "
                               "configuration is pathological")
        raise RuntimeError(f"engine returned unknown status {status}")
    wall = time.perf_counter() - t0
    m += mcomp  # fold compensation into the reported masses

    total = int(istate[_engine.I_TOTAL])
    state = SimState(mass=m, cell_time=cellt, face_time=tf, update_time=that,
                     face_flux=flux, mass_passed=mp, event_count=nk,
                     signed_event_count=s, reversal=reversal,
                     system_time=float(fstate[_engine.F_SYS]),
                     initial_mass=m0)

    trace = None
    if cfg.trace:
        n = min(int(istate[_engine.I_TRACE]), cap)
        trace = EventTrace(face=tr_face[:n].copy(), time=tr_t[:n].copy(),
                           dm=tr_dm[:n].copy(), triggered=tr_trig[:n].copy(),
                           truncated=istate[_engine.I_TRACE] > cap)

    m0_tot = float(np.sum(m0))
    drift = abs(float(np.sum(m)) - m0_tot) / max(abs(m0_tot), 1e-300)
    if cfg.variant == "bast":
        dt_avg = float(fstate[_engine.F_DTSUM]) / total if total else 0.0
    else:
        dt_avg = T * K / total if total else 0.0
    metrics = RunMetrics(
        total_events=total,
        per_face_events=nk,
        per_cell_events=cell_event_counts(grid, nk),
        dt_avg=dt_avg,
        wall_time=wall,
        mass_drift_rel=drift,
        all_faces_at_T=bool(np.all(tf == T)),
        max_clock_skew=float(fstate[_engine.F_SKEW]),
        bast_time_violations=int(istate[_engine.I_TIME_VIOL]),
        variant=cfg.variant,
        delta_m=delta_m,
        final_time=T,
        trace=trace)
    return state, metrics


def _run_variant(grid, m0, cfg, expected):
    if cfg.variant != expected:
        raise ValueError(f"config variant is {cfg.variant!r}, expected {expected!r}")
    return run(grid, m0, cfg)


def run_bas(grid: Grid, m0: np.ndarray, cfg: SchemeConfig):
    return _run_variant(grid, m0, cfg, "bas")


def run_bast(grid: Grid, m0: np.ndarray, cfg: SchemeConfig):
    return _run_variant(grid, m0, cfg, "bast")


def run_bas_casc(grid: Grid, m0: np.ndarray, cfg: SchemeConfig):
    return _run_variant(grid, m0, cfg, "bas-casc")


def run_metrics(grid: Grid, state: SimState, cfg: SchemeConfig,
                dt_sum: float | None = None) -> RunMetrics:
    """Recompute aggregate metrics from a finished state.

    For BAS and BAS-casc the average timestep is the algebraic T*K/N; for
    BAST it is the accumulated per-event timestep sum divided by N, which
    the caller must supply (run() records it automatically).
    """
    total = int(state.event_count.sum())
    K = grid.num_faces
    if cfg.variant == "bast":
        if dt_sum is None:
            raise ValueError("BAST metrics need the accumulated dt_sum")
        dt_avg = dt_sum / total if total else 0.0
    else:
        dt_avg = cfg.final_time * K / total if total else 0.0
    m0_tot = float(np.sum(state.initial_mass))
    drift = abs(float(np.sum(state.mass)) - m0_tot) / max(abs(m0_tot), 1e-300)
    return RunMetrics(
        total_events=total,
        per_face_events=state.event_count,
        per_cell_events=cell_event_counts(grid, state.event_count),
        dt_avg=dt_avg,
        wall_time=0.0,
        mass_drift_rel=drift,
        all_faces_at_T=bool(np.all(state.face_time == cfg.final_time)),
        max_clock_skew=0.0,
        bast_time_violations=0,
        variant=cfg.variant,
        delta_m=cfg.delta_m,
        final_time=cfg.final_time)
