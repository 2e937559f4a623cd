"""Tunable geometric docking and virtual screening."""

from .autotuner import ConfigProfile, Plan, build_knowledge_base, scenario_sweep, select_config
from .geometry import PocketGrid, check_bumps, overlap_score, rotate_fragment
from .kernel import BASELINE, KnobConfig, PoseResult, match_probes_shape, optimal_tile_size, prepare
from .molecule import Atom, Bond, Fragment, Ligand, Pocket, Rotamer, find_rotamers, grow_fragments
from .perfmodel import DataFeatures, PerfModel, fit, predict
from .screening import ScreeningReport, overlap_degradation, screen

__version__ = "0.1.0"
