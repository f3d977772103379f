"""Cartesian finite-volume grids with per-cell diffusivity and face geometry.

Cells are indexed lexicographically with x fastest, then y, then z. Only
interior faces are stored; exterior boundaries are no-flow. Each interior
face joins cell_lo -> cell_hi along a positive coordinate axis, and the
face-normal velocity is the velocity component along that axis.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "Face",
    "Grid",
    "FieldSpec",
    "PointSource",
    "SineLine",
    "ExplicitConcentration",
    "build_cartesian",
    "fracture_random_walk",
    "apply_initial_condition",
    "export_cells_csv",
    "export_faces_csv",
    "write_cell_set",
    "read_cell_set",
]


@dataclass(frozen=True)
class Face:
    """One interior face: geometry plus the transport coefficients' inputs."""

    id: int
    cell_lo: int
    cell_hi: int
    area: float
    dx: float
    d_face: float
    v_normal: float


@dataclass(frozen=True)
class PointSource:
    """Concentration 1 in the cell whose centroid is nearest ``location``."""

    location: tuple[float, ...]
    concentration: float = 1.0


@dataclass(frozen=True)
class SineLine:
    """c = 0.5 * (1 + sin(2*pi*x / L_x)) on the cell line iy = iz = 0."""


@dataclass(frozen=True)
class ExplicitConcentration:
    """Per-cell concentration values, length J."""

    values: np.ndarray


@dataclass(frozen=True)
class FieldSpec:
    """Material and initial-condition description for a Cartesian grid.

    diffusivity: a uniform nonnegative value, a per-cell array, or a triple
        (cell_ids, d_inside, d_outside) marking a fracture set.
    velocity: constant velocity vector (vx, vy, vz) [m/s].
    initial_condition: PointSource | SineLine | ExplicitConcentration | None.
    """

    diffusivity: object = 1.0
    velocity: tuple[float, float, float] = (0.0, 0.0, 0.0)
    initial_condition: object = None


class Grid:
    """Immutable Cartesian grid: cells, interior faces, adjacency sets.

    Face data is stored as flat arrays (one entry per face); `face(k)`
    wraps a row as a `Face` for convenience. `cell_faces(j)` returns the
    face-index set of cell j, `associated_faces(k)` the union of the two
    adjacent cells' face sets (k included).
    """

    def __init__(self, dims, extent, cell_volumes, cell_centroids, diffusivity,
                 face_lo, face_hi, face_area, face_dx, face_dbar, face_vnormal,
                 velocity):
        self.dims = tuple(int(n) for n in dims)
        self.extent = tuple(float(e) for e in extent)
        self.cell_volumes = cell_volumes
        self.cell_centroids = cell_centroids
        self.diffusivity = diffusivity
        self.face_lo = face_lo
        self.face_hi = face_hi
        self.face_area = face_area
        self.face_dx = face_dx
        self.face_dbar = face_dbar
        self.face_vnormal = face_vnormal
        self.velocity = tuple(float(v) for v in velocity)
        self._build_adjacency()
        for arr in (cell_volumes, cell_centroids, diffusivity, face_lo, face_hi,
                    face_area, face_dx, face_dbar, face_vnormal,
                    self.cell_face_ptr, self.cell_face_idx,
                    self.assoc_ptr, self.assoc_idx):
            arr.setflags(write=False)

    def _build_adjacency(self) -> None:
        J, K = self.num_cells, self.num_faces
        counts = np.zeros(J, dtype=np.int64)
        np.add.at(counts, self.face_lo, 1)
        np.add.at(counts, self.face_hi, 1)
        ptr = np.zeros(J + 1, dtype=np.int64)
        np.cumsum(counts, out=ptr[1:])
        idx = np.empty(ptr[-1], dtype=np.int64)
        cursor = ptr[:-1].copy()
        for k in range(K):
            for j in (self.face_lo[k], self.face_hi[k]):
                idx[cursor[j]] = k
                cursor[j] += 1
        self.cell_face_ptr = ptr
        self.cell_face_idx = idx

        # associated faces: union of the two adjacent cells' face sets
        aptr = np.zeros(K + 1, dtype=np.int64)
        chunks = []
        for k in range(K):
            lo, hi = self.face_lo[k], self.face_hi[k]
            merged = np.union1d(idx[ptr[lo]:ptr[lo + 1]], idx[ptr[hi]:ptr[hi + 1]])
            chunks.append(merged)
            aptr[k + 1] = aptr[k] + merged.size
        self.assoc_ptr = aptr
        self.assoc_idx = (np.concatenate(chunks) if chunks
                          else np.empty(0, dtype=np.int64))

    @property
    def num_cells(self) -> int:
        return int(self.cell_volumes.size)

    @property
    def num_faces(self) -> int:
        return int(self.face_lo.size)

    def face(self, k: int) -> Face:
        return Face(int(k), int(self.face_lo[k]), int(self.face_hi[k]),
                    float(self.face_area[k]), float(self.face_dx[k]),
                    float(self.face_dbar[k]), float(self.face_vnormal[k]))

    @property
    def faces(self) -> list[Face]:
        return [self.face(k) for k in range(self.num_faces)]

    def cell_faces(self, j: int) -> np.ndarray:
        return self.cell_face_idx[self.cell_face_ptr[j]:self.cell_face_ptr[j + 1]]

    def associated_faces(self, k: int) -> np.ndarray:
        return self.assoc_idx[self.assoc_ptr[k]:self.assoc_ptr[k + 1]]

    def cell_index(self, ix: int, iy: int, iz: int = 0) -> int:
        nx, ny, nz = self.dims
        if not (0 <= ix < nx and 0 <= iy < ny and 0 <= iz < nz):
            raise ValueError(f"cell ({ix}, {iy}, {iz}) outside grid {self.dims}")
        return ix + nx * (iy + ny * iz)

    def cell_coords(self, j: int) -> tuple[int, int, int]:
        nx, ny, nz = self.dims
        return j % nx, (j // nx) % ny, j // (nx * ny)

    def nearest_cell(self, location: Sequence[float]) -> int:
        """Cell whose centroid is nearest to ``location`` (must lie inside)."""
        loc = tuple(float(x) for x in location) + (0.0,) * (3 - len(location))
        for x, L in zip(loc, self.extent):
            if x < 0.0 or x > L:
                raise ValueError(f"location {loc} outside domain {self.extent}")
        ids = []
        for x, L, n in zip(loc, self.extent, self.dims):
            h = L / n
            # centroid of cell i sits at (i + 0.5) h
            ids.append(int(np.clip(np.round(x / h - 0.5), 0, n - 1)))
        return self.cell_index(*ids)

    def geometry_key(self) -> bytes:
        """Canonical byte string of geometry + fields, for cache hashing."""
        parts = [np.asarray(self.dims, dtype=np.int64).tobytes(),
                 np.asarray(self.extent, dtype=np.float64).tobytes(),
                 self.diffusivity.tobytes(),
                 np.asarray(self.velocity, dtype=np.float64).tobytes()]
        return b"".join(parts)


def _resolve_diffusivity(spec, num_cells: int) -> np.ndarray:
    if isinstance(spec, (int, float)):
        d = np.full(num_cells, float(spec))
    elif isinstance(spec, np.ndarray):
        d = np.asarray(spec, dtype=np.float64).copy()
        if d.shape != (num_cells,):
            raise ValueError(f"diffusivity array must have shape ({num_cells},)")
    elif isinstance(spec, tuple) and len(spec) == 3:
        cells, d_in, d_out = spec
        d = np.full(num_cells, float(d_out))
        d[np.asarray(sorted(cells), dtype=np.int64)] = float(d_in)
    else:
        raise ValueError(f"unsupported diffusivity spec: {spec!r}")
    if np.any(d < 0.0):
        raise ValueError("diffusivity must be nonnegative everywhere")
    return d


def _harmonic(d1: np.ndarray, d2: np.ndarray) -> np.ndarray:
    out = np.zeros_like(d1)
    both = (d1 > 0.0) & (d2 > 0.0)
    out[both] = 2.0 * d1[both] * d2[both] / (d1[both] + d2[both])
    return out


def build_cartesian(dims: Sequence[int], extent: Sequence[float],
                    fields: FieldSpec | None = None) -> Grid:
    """Build an nx*ny*nz Cartesian grid with interior faces only.

    Parameters
    ----------
    dims : cell counts per axis, each >= 1.
    extent : physical domain lengths per axis [m], each > 0.
    fields : diffusivity/velocity description; defaults to D=1, v=0.

    Returns
    -------
    Grid with K = (nx-1)*ny*nz + nx*(ny-1)*nz + nx*ny*(nz-1) interior faces.
    """
    fields = fields or FieldSpec()
    dims = tuple(int(n) for n in dims) + (1,) * (3 - len(dims))
    extent = tuple(float(e) for e in extent) + (1.0,) * (3 - len(extent))
    nx, ny, nz = dims
    if min(dims) < 1:
        raise ValueError(f"cell counts must be >= 1, got {dims}")
    if min(extent) <= 0.0:
        raise ValueError(f"extents must be > 0, got {extent}")

    hx, hy, hz = (L / n for L, n in zip(extent, dims))
    J = nx * ny * nz
    vol = float(hx * hy * hz)
    cell_volumes = np.full(J, vol)

    iz, iy, ix = np.meshgrid(np.arange(nz), np.arange(ny), np.arange(nx),
                             indexing="ij")
    centroids = np.empty((J, 3))
    centroids[:, 0] = (ix.ravel() + 0.5) * hx
    centroids[:, 1] = (iy.ravel() + 0.5) * hy
    centroids[:, 2] = (iz.ravel() + 0.5) * hz

    diffusivity = _resolve_diffusivity(fields.diffusivity, J)
    vx, vy, vz = fields.velocity

    lo_list, hi_list, area_list, dx_list, vn_list = [], [], [], [], []

    def add_axis(axis: int, n_axis: int, h: float, face_area: float, v: float):
        if n_axis < 2:
            return
        for kz in range(nz):
            for ky in range(ny):
                for kx in range(nx):
                    c = [kx, ky, kz]
                    if c[axis] >= n_axis - 1:
                        continue
                    lo = kx + nx * (ky + ny * kz)
                    c[axis] += 1
                    hi = c[0] + nx * (c[1] + ny * c[2])
                    lo_list.append(lo)
                    hi_list.append(hi)
                    area_list.append(face_area)
                    dx_list.append(h)
                    vn_list.append(v)

    add_axis(0, nx, hx, hy * hz, vx)
    add_axis(1, ny, hy, hx * hz, vy)
    add_axis(2, nz, hz, hx * hy, vz)

    face_lo = np.asarray(lo_list, dtype=np.int64)
    face_hi = np.asarray(hi_list, dtype=np.int64)
    face_area = np.asarray(area_list, dtype=np.float64)
    face_dx = np.asarray(dx_list, dtype=np.float64)
    face_vnormal = np.asarray(vn_list, dtype=np.float64)
    face_dbar = _harmonic(diffusivity[face_lo], diffusivity[face_hi])

    return Grid(dims, extent, cell_volumes, centroids, diffusivity,
                face_lo, face_hi, face_area, face_dx, face_dbar, face_vnormal,
                fields.velocity)


_STEPS = {"+x": (1, 0), "-x": (-1, 0), "+y": (0, 1), "-y": (0, -1)}


def fracture_random_walk(grid: Grid, seed: int,
                         bias: dict[str, float] | None = None,
                         start: tuple[int, int] | None = None,
                         max_steps: int | None = None) -> list[int]:
    """Weighted random walk from the -y boundary to the +y boundary.

    Steps between face neighbours of a 2D grid (nz must be 1); the default
    bias {+y: 0.5, +x: 0.25, -x: 0.25} drives the walk across the domain so
    the returned cell path bisects it. Deterministic for a fixed seed.
    Steps that would leave the grid are redrawn.
    """
    nx, ny, nz = grid.dims
    if nz != 1:
        raise ValueError("fracture walk requires a 2D grid (nz == 1)")
    bias = dict(bias) if bias is not None else {"+y": 0.5, "+x": 0.25, "-x": 0.25}
    total = sum(bias.values())
    if not np.isclose(total, 1.0):
        raise ValueError(f"bias weights must sum to 1, got {total}")
    for key in bias:
        if key not in _STEPS:
            raise ValueError(f"unknown step direction {key!r}")
    if start is None:
        start = (nx // 2, 0)
    sx, sy = start
    if not (0 <= sx < nx and 0 <= sy < ny):
        raise ValueError(f"start cell {start} outside grid")
    if max_steps is None:
        max_steps = 100 * nx * ny

    rng = np.random.default_rng(seed)
    dirs = sorted(bias)
    weights = np.array([bias[d] for d in dirs])
    weights = weights / weights.sum()

    path = [grid.cell_index(sx, sy)]
    x, y = sx, sy
    for _ in range(max_steps):
        if y == ny - 1:
            return path
        step = _STEPS[dirs[rng.choice(len(dirs), p=weights)]]
        tx, ty = x + step[0], y + step[1]
        if not (0 <= tx < nx and 0 <= ty < ny):
            continue
        x, y = tx, ty
        path.append(grid.cell_index(x, y))
    raise RuntimeError(
        f"fracture walk did not reach the +y boundary in {max_steps} steps; "
        "bias is likely pathological")


def apply_initial_condition(grid: Grid, spec) -> np.ndarray:
    """Mass vector m with m_j = c_j * V_j for the given concentration spec."""
    J = grid.num_cells
    m = np.zeros(J)
    if spec is None:
        return m
    if isinstance(spec, PointSource):
        j = grid.nearest_cell(spec.location)
        m[j] = spec.concentration * grid.cell_volumes[j]
        return m
    if isinstance(spec, SineLine):
        nx, ny, nz = grid.dims
        Lx = grid.extent[0]
        for ix in range(nx):
            j = grid.cell_index(ix, 0, 0)
            x = grid.cell_centroids[j, 0]
            c = 0.5 * (1.0 + np.sin(2.0 * np.pi * x / Lx))
            m[j] = c * grid.cell_volumes[j]
        return m
    if isinstance(spec, ExplicitConcentration):
        c = np.asarray(spec.values, dtype=np.float64)
        if c.shape != (J,):
            raise ValueError(f"explicit concentration must have shape ({J},)")
        return c * grid.cell_volumes
    raise ValueError(f"unsupported initial-condition spec: {spec!r}")


def _write_csv(path, header_cols: str, rows: Iterable[str],
               comment: str | None = None) -> None:
    with open(path, "w") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        fh.write(header_cols + "\n")
        for row in rows:
            fh.write(row + "\n")


def export_cells_csv(grid: Grid, path, comment: str | None = None) -> None:
    rows = (f"{j},{float(grid.cell_centroids[j, 0])!r},"
            f"{float(grid.cell_centroids[j, 1])!r},"
            f"{float(grid.cell_centroids[j, 2])!r},"
            f"{float(grid.cell_volumes[j])!r},{float(grid.diffusivity[j])!r}"
            for j in range(grid.num_cells))
    _write_csv(path, "cell_id,x,y,z,volume,D", rows, comment)


def export_faces_csv(grid: Grid, path, comment: str | None = None) -> None:
    rows = (f"{k},{grid.face_lo[k]},{grid.face_hi[k]},"
            f"{float(grid.face_area[k])!r},{float(grid.face_dx[k])!r},"
            f"{float(grid.face_dbar[k])!r},{float(grid.face_vnormal[k])!r}"
            for k in range(grid.num_faces))
    _write_csv(path, "face_id,cell_lo,cell_hi,area,dx,d_face,v_normal", rows, comment)


def write_cell_set(cells: Iterable[int], path, comment: str | None = None) -> None:
    with open(path, "w") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        for j in cells:
            fh.write(f"{int(j)}\n")


def read_cell_set(path) -> list[int]:
    with open(path) as fh:
        return [int(line) for line in fh
                if line.strip() and not line.startswith("#")]
