# Desk-scale 3D run: a sinusoidal line source advected diagonally through
# a uniformly diffusive box. Demonstrates the schemes on a genuinely
# three-dimensional grid (three face orientations per cell).

import numpy as np

import asyncfv as afv
from asyncfv.harness import experiment_uniform3d, materialize
from asyncfv.reference import cached_reference

spec = experiment_uniform3d("desk")
grid, m0, _ = materialize(spec)
print(f"grid {spec.dims}: {grid.num_cells} cells, {grid.num_faces} faces")
print(f"velocity {spec.velocity}, diffusivity {spec.diffusivity}, "
      f"T={spec.final_time}")

reference = cached_reference(grid, m0, spec.final_time)

for dm in spec.delta_m_ladder:
    state, metrics = afv.run_bast(grid, m0, afv.SchemeConfig(
        delta_m=dm, final_time=spec.final_time, variant="bast"))
    conc = state.mass / grid.cell_volumes
    err = np.linalg.norm(conc - reference.concentration) \
        / np.sqrt(grid.num_cells)
    print(f"bast delta_m={dm:8.3e}: error {err:.4e}, "
          f"N={metrics.total_events}")

print("\nmass is conserved across the no-flow boundaries; events cluster "
      "along the advected line")
