"""Viscous shock profiles, Evans-function stability and Hopf diagnostics."""

from .errors import *  # noqa: F401,F403
from .model import (EndstatePair, FullNSLagrangian, IsentropicEulerian, IsentropicLagrangian,
                    build_full_ns_lagrangian, build_isentropic_eulerian,
                    build_isentropic_lagrangian, check_structure, rankine_hugoniot)
from .profile import ShockProfile, decay_fit, profile_residual, solve_profile
from .evans import evans_eval, hopf_scan, root_polish, stability_check, winding_count
from .kernelsum import KernelConfig, direct_partial_sum, resolvent_sum
from .dynamics import (SimState, eulerian_counterexample, linearization_error_experiment,
                       periodic_probe)

__version__ = "0.1.0"
