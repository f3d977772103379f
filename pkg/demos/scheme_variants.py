# The three event schemes side by side on one transport problem.
#
# BAS recomputes only the active face's neighbourhood; BAST additionally
# tracks the mass its neighbours should have passed and raises their
# priority; the cascading variant lets overdue faces fire immediately,
# bypassing the queue. All three converge at first order and their event
# totals coincide for small mass units.

import numpy as np

import asyncfv as afv
from asyncfv.reference import cached_reference

rng = np.random.default_rng(5)
grid = afv.build_cartesian(
    (20, 20, 1), (10.0, 10.0, 1.0),
    afv.FieldSpec(diffusivity=rng.uniform(0.2, 2.0, 400),
                  velocity=(0.8, 0.2, 0.0)))
m0 = np.zeros(400)
m0[grid.cell_index(5, 14)] = 1.0
T = 1.0

reference = cached_reference(grid, m0, T)

print(f"{'scheme':>10} {'delta_m':>9} {'error':>12} {'events':>9} {'dt_avg':>11}")
for variant in ("bas", "bast", "bas-casc"):
    for dm in (1e-4, 1e-5, 1e-6):
        state, metrics = afv.run(grid, m0, afv.SchemeConfig(
            delta_m=dm, final_time=T, variant=variant))
        conc = state.mass / grid.cell_volumes
        err = np.linalg.norm(conc - reference.concentration) / 20.0
        print(f"{variant:>10} {dm:9.0e} {err:12.4e} "
              f"{metrics.total_events:9d} {metrics.dt_avg:11.4e}")

print("\nfor bas and bas-casc, dt_avg * N = T * K exactly by definition")
