"""Axisymmetric mean curvature flow with surgery and its level set limit."""
from .errors import McfError, NumericalError, ValidationError
from .profile import DomainSlice, Endpoint, ProfileCurve, curvature_profile, is_two_convex
from .initial_data import REFERENCE_DUMBBELL, CappedCylinder, Dumbbell, Sphere, build_initial
from .smooth_mcf import FlowSettings, FlowState, StopReason, evolve_until, step
from .surgery import SurgeryConfig, SurgeryEvent, h0_threshold, perform_surgery
from .level_set import GridSpec, LevelSetField, compute_t_epsilon, evolve_lsf, reinitialize
from .spacetime import SpaceTimeTrack, contains_track, distance_series, hausdorff_distance, shift_track
from .harness import ExperimentConfig, convergence_sweep, run_level_set, run_surgery_flow

__version__ = "0.1.0"
