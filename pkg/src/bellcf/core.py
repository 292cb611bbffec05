"""Domain types shared across the package.

Settings are planar analyzer directions. Station 1 owns labels ``a`` and
``d``; station 2 owns ``b`` and ``c``. The four measured combinations are the
pairs (a,c), (a,b), (d,b), (d,c) with signs (+, -, -, -).

Large runs are held column-wise in :class:`TrialBatch` and
:class:`CounterfactualBatch`; the per-record dataclasses are the row view.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np

TWO_PI = 2.0 * math.pi

STATION_OF = {"a": 1, "d": 1, "b": 2, "c": 2}

# Index order of the four canonical pairs everywhere in the package.
PAIR_CODES = ("ac", "ab", "db", "dc")
PAIR_SIGNS = (1, -1, -1, -1)
PAIR_INDEX = {code: i for i, code in enumerate(PAIR_CODES)}

# Column order of potential values in counterfactual records.
POTENTIAL_LABELS = ("a", "d", "b", "c")
POTENTIAL_KEYS = ("A_a", "A_d", "B_b", "B_c")

Outcome = int
SourceToken = int
TimeIndex = int


def normalize_angle(angle: float) -> float:
    angle = float(angle)
    if not math.isfinite(angle):
        raise ValueError(f"angle must be finite, got {angle!r}")
    angle = math.fmod(angle, TWO_PI)
    if angle < 0.0:
        angle += TWO_PI
    # fmod of a tiny negative number can round up to exactly 2*pi
    if angle >= TWO_PI:
        angle = 0.0
    return angle


def as_outcome(value) -> Outcome:
    v = int(value)
    if v not in (1, -1) or v != value:
        raise ValueError(f"outcome must be +1 or -1, got {value!r}")
    return v


@dataclass(frozen=True)
class Setting:
    label: str
    angle: float

    def __post_init__(self):
        if self.label not in STATION_OF:
            raise ValueError(f"unknown setting label {self.label!r}")
        object.__setattr__(self, "angle", normalize_angle(self.angle))

    @property
    def station(self) -> int:
        return STATION_OF[self.label]


def angle_between(s1: Setting | float, s2: Setting | float) -> float:
    """Smallest angular separation of two directions, in [0, pi]."""
    a1 = s1.angle if isinstance(s1, Setting) else normalize_angle(s1)
    a2 = s2.angle if isinstance(s2, Setting) else normalize_angle(s2)
    d = abs(a1 - a2)
    if d > math.pi:
        d = TWO_PI - d
    return d


@dataclass(frozen=True)
class SettingPair:
    s1: Setting
    s2: Setting

    def __post_init__(self):
        if self.s1.station != 1:
            raise ValueError(f"{self.s1.label!r} is not a station-1 setting")
        if self.s2.station != 2:
            raise ValueError(f"{self.s2.label!r} is not a station-2 setting")

    @property
    def code(self) -> str:
        return self.s1.label + self.s2.label

    @property
    def index(self) -> int:
        return PAIR_INDEX[self.code]

    @property
    def sign(self) -> int:
        return PAIR_SIGNS[self.index]

    @property
    def theta(self) -> float:
        return angle_between(self.s1, self.s2)

    @property
    def is_equal_angle(self) -> bool:
        return self.s1.angle == self.s2.angle


@dataclass(frozen=True)
class SettingSet:
    """Angles (radians) of the four analyzer directions."""

    a: float = 0.0
    d: float = math.pi / 2
    b: float = math.pi / 4
    c: float = 3 * math.pi / 4

    def __post_init__(self):
        for label in POTENTIAL_LABELS:
            object.__setattr__(self, label, normalize_angle(getattr(self, label)))

    def setting(self, label: str) -> Setting:
        return Setting(label, getattr(self, label))

    def pair(self, code: str) -> SettingPair:
        if code not in PAIR_INDEX:
            raise ValueError(f"unknown setting pair {code!r}")
        return SettingPair(self.setting(code[0]), self.setting(code[1]))

    def as_dict(self) -> dict[str, float]:
        return {label: getattr(self, label) for label in POTENTIAL_LABELS}

    def angles_for(self, labels: Sequence[str]) -> np.ndarray:
        return np.array([getattr(self, lab) for lab in labels], dtype=np.float64)

    @classmethod
    def equal_angle(cls, angle: float = 0.0) -> "SettingSet":
        """All four directions coincide: every pair is an equal-angle diagnostic pair."""
        return cls(angle, angle, angle, angle)


DEFAULT_SETTINGS = SettingSet()


def canonical_pairs(settings: SettingSet = DEFAULT_SETTINGS) -> list[SettingPair]:
    """The four pairs entering the CHSH combination, in sign order (+, -, -, -)."""
    return [settings.pair(code) for code in PAIR_CODES]


def equal_angle_pair(angle: float = 0.0) -> SettingPair:
    return SettingPair(Setting("a", angle), Setting("b", angle))


@dataclass(frozen=True, slots=True)
class TrialRecord:
    trial_id: int
    tick: TimeIndex
    pair: str
    x: Outcome
    y: Outcome
    source: SourceToken | None = None


@dataclass(frozen=True, slots=True)
class CounterfactualRecord:
    trial_id: int
    tick: TimeIndex
    source: SourceToken
    a_val: Outcome
    d_val: Outcome
    b_val: Outcome
    c_val: Outcome

    def __post_init__(self):
        for v in (self.a_val, self.d_val, self.b_val, self.c_val):
            as_outcome(v)

    @property
    def values(self) -> tuple[int, int, int, int]:
        return (self.a_val, self.d_val, self.b_val, self.c_val)


@dataclass(frozen=True, slots=True)
class Unsupported:
    """Marker for a trial whose model cannot furnish all four potential values."""

    trial_id: int
    tick: TimeIndex


def _int_array(values, dtype) -> np.ndarray:
    return np.ascontiguousarray(np.asarray(values, dtype=dtype))


@dataclass(eq=False)
class TrialBatch:
    """Column-wise actual-mode records. ``pair`` holds indices into PAIR_CODES;
    ``source`` is -1 where no token was recorded."""

    trial: np.ndarray
    tick: np.ndarray
    pair: np.ndarray
    x: np.ndarray
    y: np.ndarray
    source: np.ndarray

    def __post_init__(self):
        self.trial = _int_array(self.trial, np.int64)
        self.tick = _int_array(self.tick, np.int64)
        self.pair = _int_array(self.pair, np.int8)
        self.x = _int_array(self.x, np.int8)
        self.y = _int_array(self.y, np.int8)
        self.source = _int_array(self.source, np.int64)
        n = len(self.trial)
        for name in ("tick", "pair", "x", "y", "source"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"column {name!r} has wrong length")
        if n:
            if not (np.all(np.abs(self.x) == 1) and np.all(np.abs(self.y) == 1)):
                raise ValueError("outcomes must be +1 or -1")
            if self.pair.min() < 0 or self.pair.max() > 3:
                raise ValueError("pair index out of range")

    def __len__(self) -> int:
        return len(self.trial)

    def __eq__(self, other) -> bool:
        if not isinstance(other, TrialBatch):
            return NotImplemented
        return all(
            np.array_equal(getattr(self, k), getattr(other, k))
            for k in ("trial", "tick", "pair", "x", "y", "source")
        )

    def __getitem__(self, idx) -> "TrialBatch":
        return TrialBatch(
            self.trial[idx], self.tick[idx], self.pair[idx],
            self.x[idx], self.y[idx], self.source[idx],
        )

    def records(self) -> Iterator[TrialRecord]:
        cols = zip(self.trial.tolist(), self.tick.tolist(), self.pair.tolist(),
                   self.x.tolist(), self.y.tolist(), self.source.tolist())
        for t, k, p, x, y, s in cols:
            yield TrialRecord(t, k, PAIR_CODES[p], x, y, None if s < 0 else s)

    @classmethod
    def empty(cls) -> "TrialBatch":
        return cls([], [], [], [], [], [])

    @classmethod
    def from_records(cls, records: Iterable[TrialRecord]) -> "TrialBatch":
        rows = [
            (r.trial_id, r.tick, PAIR_INDEX[r.pair], as_outcome(r.x), as_outcome(r.y),
             -1 if r.source is None else r.source)
            for r in records
        ]
        if not rows:
            return cls.empty()
        return cls(*zip(*rows))

    @classmethod
    def concat(cls, parts: Sequence["TrialBatch"]) -> "TrialBatch":
        if not parts:
            return cls.empty()
        return cls(*(np.concatenate([getattr(p, k) for p in parts])
                     for k in ("trial", "tick", "pair", "x", "y", "source")))


def as_trial_batch(records) -> TrialBatch:
    if isinstance(records, TrialBatch):
        return records
    return TrialBatch.from_records(records)


@dataclass(eq=False)
class CounterfactualBatch:
    """Column-wise counterfactual records.

    ``values`` has shape (n, 4) in POTENTIAL_LABELS order. Rows with
    ``supported`` false carry zeros there and source -1.
    """

    trial: np.ndarray
    tick: np.ndarray
    source: np.ndarray
    values: np.ndarray
    supported: np.ndarray = field(default=None)

    def __post_init__(self):
        self.trial = _int_array(self.trial, np.int64)
        self.tick = _int_array(self.tick, np.int64)
        self.source = _int_array(self.source, np.int64)
        self.values = _int_array(self.values, np.int8).reshape(-1, 4)
        n = len(self.trial)
        if self.supported is None:
            self.supported = np.ones(n, dtype=bool)
        self.supported = _int_array(self.supported, bool)
        for name in ("tick", "source", "values", "supported"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"column {name!r} has wrong length")
        vals = self.values[self.supported]
        if vals.size and not np.all(np.abs(vals) == 1):
            raise ValueError("potential values must be +1 or -1")

    def __len__(self) -> int:
        return len(self.trial)

    def __eq__(self, other) -> bool:
        if not isinstance(other, CounterfactualBatch):
            return NotImplemented
        return all(
            np.array_equal(getattr(self, k), getattr(other, k))
            for k in ("trial", "tick", "source", "values", "supported")
        )

    def __getitem__(self, idx) -> "CounterfactualBatch":
        return CounterfactualBatch(self.trial[idx], self.tick[idx], self.source[idx],
                                   self.values[idx], self.supported[idx])

    @property
    def all_supported(self) -> bool:
        return bool(np.all(self.supported))

    def records(self) -> Iterator[CounterfactualRecord | Unsupported]:
        cols = zip(self.trial.tolist(), self.tick.tolist(), self.source.tolist(),
                   self.values.tolist(), self.supported.tolist())
        for t, k, s, v, ok in cols:
            yield CounterfactualRecord(t, k, s, *v) if ok else Unsupported(t, k)

    @classmethod
    def empty(cls) -> "CounterfactualBatch":
        return cls([], [], [], np.zeros((0, 4)), [])

    @classmethod
    def from_records(cls, records: Iterable[CounterfactualRecord | Unsupported]) -> "CounterfactualBatch":
        rows = []
        for r in records:
            if isinstance(r, Unsupported):
                rows.append((r.trial_id, r.tick, -1, (0, 0, 0, 0), False))
            else:
                rows.append((r.trial_id, r.tick, r.source, r.values, True))
        if not rows:
            return cls.empty()
        trial, tick, source, values, ok = zip(*rows)
        return cls(trial, tick, source, np.array(values), ok)

    @classmethod
    def concat(cls, parts: Sequence["CounterfactualBatch"]) -> "CounterfactualBatch":
        if not parts:
            return cls.empty()
        return cls(*(np.concatenate([getattr(p, k) for p in parts])
                     for k in ("trial", "tick", "source", "values", "supported")))


def as_counterfactual_batch(records) -> CounterfactualBatch:
    if isinstance(records, CounterfactualBatch):
        return records
    return CounterfactualBatch.from_records(records)
