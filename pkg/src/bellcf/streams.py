"""Keyed counter-based random streams.

Every draw is a pure function of ``(master_seed, trial_id, role, counter)``,
so trials can be evaluated in any order, in any number of workers, and still
produce identical values. The mixing function is the splitmix64 finalizer
applied in three rounds (seed, trial, role/counter).
"""

from __future__ import annotations

import enum

import numpy as np

_MASK = (1 << 64) - 1
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30, _S27, _S31 = np.uint64(30), np.uint64(27), np.uint64(31)
_TO_UNIT = 2.0 ** -53


class Role(enum.IntEnum):
    SOURCE = 0
    SETTING1 = 1
    SETTING2 = 2
    INSTRUMENT1 = 3
    INSTRUMENT2 = 4
    JOINT = 5


def mix64(z: np.ndarray) -> np.ndarray:
    """splitmix64 output function, elementwise on a uint64 array."""
    z = np.asarray(z, dtype=np.uint64) + _GOLDEN
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


def _u64(value) -> np.uint64:
    return np.uint64(int(value) & _MASK)


def raw_draws(master_seed: int, trial_ids, role: int, counter=0) -> np.ndarray:
    """64-bit draw number ``counter`` of stream ``role`` for each trial id.

    ``trial_ids`` and ``counter`` broadcast against each other.
    """
    ids = np.asarray(trial_ids, dtype=np.uint64)
    h = mix64(np.full(ids.shape, _u64(master_seed), dtype=np.uint64))
    h = mix64(h ^ ids)
    counter = np.asarray(counter, dtype=np.uint64) & np.uint64(0xFFFFFFFF)
    tag = np.uint64(int(role) << 32) | counter
    return mix64(h ^ tag)


def uniforms(master_seed: int, trial_ids, role: int, counter: int = 0) -> np.ndarray:
    """Doubles in [0, 1) with 53 random bits."""
    return (raw_draws(master_seed, trial_ids, role, counter) >> np.uint64(11)).astype(np.float64) * _TO_UNIT


class TrialStream:
    """Sequential view of one (seed, trial, role) stream; draw k is ``uniforms(..., counter=k)``."""

    __slots__ = ("master_seed", "trial_id", "role", "counter")

    def __init__(self, master_seed: int, trial_id: int, role: int):
        self.master_seed = int(master_seed)
        self.trial_id = int(trial_id)
        self.role = Role(role)
        self.counter = 0

    def random_raw(self, size: int | None = None):
        n = 1 if size is None else int(size)
        counters = np.arange(self.counter, self.counter + n, dtype=np.uint64)
        out = raw_draws(self.master_seed, [self.trial_id], self.role, counters)
        self.counter += n
        return int(out[0]) if size is None else out

    def uniform(self, size: int | None = None):
        raw = self.random_raw(1 if size is None else size)
        u = (np.atleast_1d(raw).astype(np.uint64) >> np.uint64(11)).astype(np.float64) * _TO_UNIT
        return float(u[0]) if size is None else u

    def __repr__(self):
        return f"TrialStream(seed={self.master_seed}, trial={self.trial_id}, role={self.role.name}, at={self.counter})"


def derive_trial_stream(master_seed: int, trial_id: int, stream_role: Role | int) -> TrialStream:
    return TrialStream(master_seed, trial_id, stream_role)
