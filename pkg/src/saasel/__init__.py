"""saasel: minimum-cardinality sensor/actuator selection that stabilizes an
LTI dynamic network through static output feedback.

Three interchangeable solution methods over per-node binary activations:

- ``misdp``    big-M mixed-integer SDP solved by branch-and-bound,
- ``bsa-sdp``  median-probing search over the ordered candidate set with an
               exact LMI feasibility oracle,
- ``bsa-pbh``  the same search driven by fast stabilizability/detectability
               rank tests, with LMI confirmation of the stored survivors.

Every reported selection is certified by the closed-loop spectral abscissa.
"""

from .conic import SolverTolerances, SolveStatus
from .model import DynamicNetwork, LogisticConstraint, Selection
from .synthesis import SofResult, SofSolution, SofStatus, solve_sof, verify_closed_loop
from .candidates import CandidateSet, enumerate_candidates
from .search import SearchResult, bsa_pbh_solve, bsa_solve, pbh_detectable, pbh_stabilizable
from .misdp import BigMConstants, MisdpResult, build_misdp, confirm_selection, solve_misdp
from .bench import MassSpringSpec, mass_spring, run_experiment

__version__ = "0.1.0"

__all__ = [
    "SolverTolerances",
    "SolveStatus",
    "DynamicNetwork",
    "LogisticConstraint",
    "Selection",
    "SofResult",
    "SofSolution",
    "SofStatus",
    "solve_sof",
    "verify_closed_loop",
    "CandidateSet",
    "enumerate_candidates",
    "SearchResult",
    "bsa_solve",
    "bsa_pbh_solve",
    "pbh_stabilizable",
    "pbh_detectable",
    "BigMConstants",
    "MisdpResult",
    "build_misdp",
    "solve_misdp",
    "confirm_selection",
    "MassSpringSpec",
    "mass_spring",
    "run_experiment",
]
