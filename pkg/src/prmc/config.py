"""Resource limits and tunables, shared through a module-level default."""

from __future__ import annotations

import contextlib
from dataclasses import dataclass, replace


@dataclass(frozen=True)
class Limits:
    max_states: int = 1_000_000        # states any single construction may allocate
    max_enum: int = 1_000_000          # words a single enumeration may materialize
    eq_budget: int = 500               # equivalence queries before the learner gives up
    mq_budget: int = 1_000_000         # membership queries before the learner gives up
    brute_length_cap: int = 12         # longest word length brute-force iteration accepts
    var_order: tuple[str, ...] = ()    # override for variable track ordering


_active = Limits()


def active() -> Limits:
    return _active


def set_active(limits: Limits) -> None:
    global _active
    _active = limits


@contextlib.contextmanager
def override(**kwargs):
    """Temporarily replace selected limits; restores the previous ones on exit."""
    global _active
    saved = _active
    _active = replace(saved, **kwargs)
    try:
        yield _active
    finally:
        _active = saved
