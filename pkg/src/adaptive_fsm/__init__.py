"""Adaptive pure-state estimation with Fisher-symmetric measurements."""

__version__ = "0.1.0"

from .errors import (
    DegenerateInversionError,
    DimensionError,
    FsmConditionError,
    FsmConstructionError,
    GridError,
    SingularFiducialError,
)
from .fisher import FimPair, classical_fim, fim_report, gill_massar_trace, gmb, quantum_fim_at_fiducial
from .fitting import ScalingFit, fit_scaling
from .montecarlo import ExperimentConfig, ExperimentSummary, run_experiment
from .povm import (
    CountRecord,
    FsmCoefficients,
    Povm,
    adapt,
    born_probabilities,
    canonical_fsm,
    check_fsm,
    combine,
    phase_rotate,
    sample_counts,
    signed_pair,
)
from .protocol import ProtocolResult, run_protocol
from .reconstruct import LikelihoodDataset, TwoFsmStatistics, analytic_estimate, mle_refine
from .splits import SPLITS, SplitPolicy, get_split
from .states import PureState, Unitary, fidelity, haar_random_state, householder_to, infidelity
