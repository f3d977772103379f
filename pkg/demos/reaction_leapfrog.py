# Adding a reaction term: a Langmuir adsorption sink removes mass while
# diffusion spreads a central spike.
#
# Each event wraps the mass transfer between two leapfrog half-steps of
# the local reaction, using per-cell clocks. The reference solution is a
# Strang-split integration refined until self-consistent.

import numpy as np

import asyncfv as afv
from asyncfv.reference import cached_reference

grid = afv.build_cartesian((30, 30, 1), (10.0, 10.0, 10.0),
                           afv.FieldSpec(diffusivity=2.0))
m0 = np.zeros(900)
m0[grid.cell_index(15, 15)] = grid.cell_volumes[0]  # c = 1 in one cell
T = 1.0
sink = afv.langmuir()

reference = cached_reference(grid, m0, T, reaction=sink, tol=1e-10)
print(f"reference: {reference.method}, accuracy {reference.accuracy:.1e}")

print(f"{'delta_m':>9} {'error':>12} {'mass kept':>11} {'events':>9}")
for dm in (1e-4, 1e-5, 1e-6):
    state, metrics = afv.run(grid, m0, afv.SchemeConfig(
        delta_m=dm, final_time=T, reaction=sink))
    conc = state.mass / grid.cell_volumes
    err = np.linalg.norm(conc - reference.concentration) / 30.0
    kept = state.mass.sum() / m0.sum()
    print(f"{dm:9.0e} {err:12.4e} {kept:11.4f} {metrics.total_events:9d}")

print("\nthe adsorbed fraction is independent of the mass unit;"
      " the error is first order in it")
