"""Global forward/backward pass counters.

Models bump the forward counter once per forward evaluation (a single record
or a batch both count as one pass); the backward engine bumps the backward
counter.  Tests wrap work in count_passes() to assert how many passes an
attribution method really spent.
"""

from __future__ import annotations

from contextlib import contextmanager
from dataclasses import dataclass


@dataclass
class PassCounters:
    forward: int = 0
    backward: int = 0


_ACTIVE: list[PassCounters] = []


@contextmanager
def count_passes():
    counters = PassCounters()
    _ACTIVE.append(counters)
    try:
        yield counters
    finally:
        _ACTIVE.remove(counters)


def bump_forward():
    for c in _ACTIVE:
        c.forward += 1


def bump_backward():
    for c in _ACTIVE:
        c.backward += 1
