from .backward import (
    BackwardPolicy,
    ReferenceActivations,
    backward,
    record_reference_pass,
    unbroadcast,
)
from .counters import PassCounters, bump_backward, bump_forward, count_passes
from .ops import LN_EPS, OP_FORWARD, SOURCE_OPS, run_forward
from .tape import Tape, TapeNode

__all__ = [
    "BackwardPolicy",
    "ReferenceActivations",
    "backward",
    "record_reference_pass",
    "unbroadcast",
    "PassCounters",
    "bump_backward",
    "bump_forward",
    "count_passes",
    "LN_EPS",
    "OP_FORWARD",
    "SOURCE_OPS",
    "run_forward",
    "Tape",
    "TapeNode",
]
