"""Robust state-feedback pole assignment through the real Schur form."""

from .errors import (
    AllStartsFailed,
    EmptyNullSpace,
    NoViableCandidate,
    NotControllable,
    PolecraftError,
    RankDeficientB,
    UnmatchedConjugate,
)
from .model import FeedbackSolution, Pair, PoleSpec, Real, RobustnessReport, SystemPair
from .model import canonicalize_poles, new_system
from .solver import (
    SolveConfig,
    assign,
    assign_multistart,
    cond_eigvec,
    departure,
    precision_digits,
    recover_f,
    validate,
)

__version__ = "0.1.0"
