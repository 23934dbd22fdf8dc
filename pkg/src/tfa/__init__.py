"""Total Flow Analysis for per-class FIFO networks with cyclic dependencies.

Delay-jitter and burstiness bounds by four equivalent iteration schedules
(synchronous, asynchronous, alternating and cut-based fixed point), with an
exact affine oracle for certification.
"""

from tfa.calculus import State, eval_D, eval_G, eval_Z, global_map
from tfa.cuts import Cut, feedforward_labeling, find_cut, validate_labeling
from tfa.model import AffineForm, Flow, Network, Node, build_network
from tfa.netfile import load_network, save_network
from tfa.solvers import (
    Schedule,
    SolveOptions,
    SolverOutcome,
    Status,
    compare_algorithms,
    run_alt,
    run_async,
    run_fptfa,
    run_sync,
)

__all__ = [
    "AffineForm",
    "Cut",
    "Flow",
    "Network",
    "Node",
    "Schedule",
    "SolveOptions",
    "SolverOutcome",
    "State",
    "Status",
    "build_network",
    "compare_algorithms",
    "eval_D",
    "eval_G",
    "eval_Z",
    "feedforward_labeling",
    "find_cut",
    "global_map",
    "load_network",
    "run_alt",
    "run_async",
    "run_fptfa",
    "run_sync",
    "save_network",
    "validate_labeling",
]

__version__ = "0.1.0"
