"""
Tanglegame
Tangle simulation and attachment game
"""

# Add imports here
from .tangle.core import new_tangle, attach, snapshot, Tangle, View
from .walks.walk import WalkParams, sample_walk, deterministic_walk, transition_probs
from .walks.exit_distribution import exit_distribution_exact, exit_distribution_mc
from .strategies.tip_selection import select_default, select_greedy, select_mixed, conflict_free
from .simulation.config import SimConfig
from .simulation.simulator import run, run_replicas, confirmation_confidence
from .analysis.metrics import mean_costs, approval_cdf, little_check, relative_cost_increase
from .analysis.equilibrium import sweep, find_crossing, classify_stability, theta0, analyse
from .tanglegame import parse_config, main

from ._version import __version__
