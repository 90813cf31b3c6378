from .heuristics import (BeamAlignConfig, SigmaSource, beam_align, calibrate_sigma, load_sigma_table,
                         pooled_misalignment, snr_dynamic, snr_one)
from .instance import (Association, Instance, beam_occupancy, feasibility_violations, from_accepted,
                       p1_objective, user_capacities)
from .optimal import SolverConfig, SolverMode, export_lp, solve_optimal

SCHEMES = ("optimal", "beam_align", "snr_one", "snr_dynamic")

__all__ = [
    "Association", "BeamAlignConfig", "Instance", "SCHEMES", "SigmaSource", "SolverConfig", "SolverMode",
    "beam_align", "beam_occupancy", "calibrate_sigma", "export_lp", "feasibility_violations",
    "from_accepted", "load_sigma_table", "p1_objective", "pooled_misalignment", "snr_dynamic", "snr_one",
    "solve_optimal", "user_capacities",
]
