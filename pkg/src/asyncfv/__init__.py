"""Face-based asynchronous discrete-event schemes on Cartesian FV grids."""

from .grid import (Grid, Face, FieldSpec, PointSource, SineLine,
                   ExplicitConcentration, build_cartesian,
                   fracture_random_walk, apply_initial_condition)
from .discretization import (ConnectionCoeffs, face_flux, all_face_fluxes,
                             connection_coeffs, assemble_operator,
                             to_concentration_form)
from .event_queue import IndexedMinQueue
from .schemes import (SchemeConfig, ReactionTerm, langmuir, SimState,
                      RunMetrics, run, run_bas, run_bast, run_bas_casc,
                      run_metrics, projected_update_time, event_mass,
                      RunawayError, ReactionEvaluationError)

__version__ = "0.1.0"
