"""Hidden-variable models.

Each model works on whole columns of trials at once (numpy arrays of angles,
source tokens and ticks); the module-level functions ``sample_source``,
``evaluate_station``, ``evaluate_pair`` and ``counterfactual_profile`` are the
single-trial views of the same code path.

Shipped models:

* ``bell-local``: source direction phi on M bins, A = sign cos(phi - alpha),
  B = -sign cos(phi - beta). Time free.
* ``time-dependent-local``: the bell-local outcome, flipped at each station by
  a periodic instrument parity that depends only on the local angle and the
  tick. Both stations use the same parity function, so equal angles stay
  perfectly anticorrelated.
* ``quantum-singlet``: joint sampler with E(xy) = -cos(theta), using both
  actual settings. No single-station potential values exist.
* ``nonlocal-all-settings``: like bell-local but the source direction is
  rotated by an amount depending on all four potential settings at once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (
    CounterfactualRecord,
    DEFAULT_SETTINGS,
    POTENTIAL_LABELS,
    Setting,
    SettingPair,
    SettingSet,
    Unsupported,
    TWO_PI,
)
from .streams import TrialStream, mix64

EINSTEIN_LOCAL = "EinsteinLocal"
EINSTEIN_LOCAL_TIME_DEPENDENT = "EinsteinLocalTimeDependent"
NONLOCAL = "Nonlocal"
LOCAL_CLASSES = (EINSTEIN_LOCAL, EINSTEIN_LOCAL_TIME_DEPENDENT)

DEFAULT_ALPHABET = 64
DEFAULT_PERIOD = 16
DEFAULT_SALT = 0x5EED


class LocalityError(ValueError):
    """A station-local evaluation was requested from a model that has none."""


@dataclass(frozen=True)
class ModelDescriptor:
    name: str
    locality_class: str
    counterfactually_definite: bool
    lambda_alphabet_size: int
    depends_on_all_settings: bool = False

    def __post_init__(self):
        if self.locality_class not in (EINSTEIN_LOCAL, EINSTEIN_LOCAL_TIME_DEPENDENT, NONLOCAL):
            raise ValueError(f"unknown locality class {self.locality_class!r}")
        if self.lambda_alphabet_size < 1:
            raise ValueError("lambda alphabet must be non-empty")
        if self.locality_class == EINSTEIN_LOCAL and not self.counterfactually_definite:
            raise ValueError("Einstein-local models must be counterfactually definite")
        if (self.locality_class == NONLOCAL and self.counterfactually_definite
                and not self.depends_on_all_settings):
            raise ValueError("a nonlocal model is counterfactually definite only if it "
                             "depends on all four settings at once")


@dataclass(frozen=True)
class InstrumentState:
    """Local instrument parameter of one station at one tick."""

    station: int
    local_setting: Setting
    tick: int
    token: int


def signs(values: np.ndarray) -> np.ndarray:
    """Elementwise sign with sign(0) = +1, as int8."""
    return np.where(values >= 0.0, 1, -1).astype(np.int8)


def separation(angles1: np.ndarray, angles2: np.ndarray) -> np.ndarray:
    d = np.abs(np.asarray(angles1, dtype=np.float64) - np.asarray(angles2, dtype=np.float64))
    return np.where(d > math.pi, TWO_PI - d, d)


class HiddenVariableModel:
    name = "abstract"
    locality_class = EINSTEIN_LOCAL
    counterfactually_definite = True
    depends_on_all_settings = False

    def __init__(self, lambda_alphabet_size: int = DEFAULT_ALPHABET):
        if int(lambda_alphabet_size) < 1:
            raise ValueError("lambda_alphabet_size must be >= 1")
        self.lambda_alphabet_size = int(lambda_alphabet_size)

    @property
    def descriptor(self) -> ModelDescriptor:
        return ModelDescriptor(self.name, self.locality_class, self.counterfactually_definite,
                               self.lambda_alphabet_size, self.depends_on_all_settings)

    @property
    def is_local(self) -> bool:
        return self.locality_class in LOCAL_CLASSES

    def params(self) -> dict:
        return {"lambda_alphabet_size": self.lambda_alphabet_size}

    # Uniform rho(Lambda) over the alphabet. No settings enter here.
    def source_tokens(self, u: np.ndarray) -> np.ndarray:
        m = self.lambda_alphabet_size
        tokens = np.floor(np.asarray(u, dtype=np.float64) * m).astype(np.int64)
        return np.minimum(tokens, m - 1)

    def source_direction(self, tokens: np.ndarray) -> np.ndarray:
        return (np.asarray(tokens, dtype=np.float64) + 0.5) * (TWO_PI / self.lambda_alphabet_size)

    def station_outcomes(self, station: int, angles, tokens, ticks) -> np.ndarray:
        raise LocalityError(f"{self.name} has no station-local outcome function")

    def pair_outcomes(self, angles1, angles2, tokens, ticks, joint_u=None):
        return (self.station_outcomes(1, angles1, tokens, ticks),
                self.station_outcomes(2, angles2, tokens, ticks))

    def potential_values(self, settings: SettingSet, tokens, ticks) -> np.ndarray | None:
        """(n, 4) array of A_a, A_d, B_b, B_c, or None if the model is not counterfactually definite."""
        if not self.counterfactually_definite:
            return None
        tokens = np.asarray(tokens)
        cols = []
        for label in POTENTIAL_LABELS:
            station = 1 if label in "ad" else 2
            angles = np.full(tokens.shape, getattr(settings, label))
            cols.append(self.station_outcomes(station, angles, tokens, ticks))
        return np.stack(cols, axis=1).astype(np.int8)

    def closed_form(self, theta: float) -> float | None:
        return None

    def __repr__(self):
        args = ", ".join(f"{k}={v!r}" for k, v in self.params().items())
        return f"{type(self).__name__}({args})"


class BellLocal(HiddenVariableModel):
    name = "bell-local"
    locality_class = EINSTEIN_LOCAL

    def station_outcomes(self, station, angles, tokens, ticks=None):
        phi = self.source_direction(tokens)
        out = signs(np.cos(phi - np.asarray(angles, dtype=np.float64)))
        return out if station == 1 else -out

    def closed_form(self, theta):
        return -(1.0 - 2.0 * theta / math.pi)


class TimeDependentLocal(BellLocal):
    name = "time-dependent-local"
    locality_class = EINSTEIN_LOCAL_TIME_DEPENDENT

    def __init__(self, lambda_alphabet_size=DEFAULT_ALPHABET, period=DEFAULT_PERIOD, salt=DEFAULT_SALT):
        super().__init__(lambda_alphabet_size)
        if int(period) < 1:
            raise ValueError("period must be >= 1")
        self.period = int(period)
        self.salt = int(salt)

    def params(self):
        return {**super().params(), "period": self.period, "salt": self.salt}

    def instrument_tokens(self, angles, ticks) -> np.ndarray:
        """16-bit instrument parameter u(angle, tick mod period).

        Keyed on the angle rather than the label so that equal directions in
        the two stations see the same parameter at the same tick.
        """
        angles = np.asarray(angles, dtype=np.float64)
        ticks = np.broadcast_to(np.asarray(ticks, dtype=np.int64), angles.shape)
        angle_key = np.rint(angles * 2.0 ** 32).astype(np.uint64)
        phase = (ticks % self.period).astype(np.uint64)
        h = mix64(mix64(np.uint64(self.salt & 0xFFFFFFFF) ^ angle_key) ^ phase)
        return (h >> np.uint64(48)).astype(np.int64)

    def parity(self, angles, ticks) -> np.ndarray:
        return (self.instrument_tokens(angles, ticks) & 1).astype(np.int8)

    def station_outcomes(self, station, angles, tokens, ticks):
        base = super().station_outcomes(station, angles, tokens)
        return (base * (1 - 2 * self.parity(angles, ticks))).astype(np.int8)

    def closed_form(self, theta):
        return None


class QuantumSinglet(HiddenVariableModel):
    name = "quantum-singlet"
    locality_class = NONLOCAL
    counterfactually_definite = False

    def pair_outcomes(self, angles1, angles2, tokens, ticks, joint_u=None):
        if joint_u is None:
            raise ValueError("quantum-singlet needs joint uniforms")
        u0, u1 = (np.asarray(u, dtype=np.float64) for u in joint_u)
        x = np.where(u0 < 0.5, 1, -1).astype(np.int8)
        p_same = 0.5 * (1.0 - np.cos(separation(angles1, angles2)))
        y = np.where(u1 < p_same, x, -x).astype(np.int8)
        return x, y

    def closed_form(self, theta):
        return -math.cos(theta)


class NonlocalAllSettings(HiddenVariableModel):
    """Outcomes depend on all four potential settings, hence counterfactually definite."""

    name = "nonlocal-all-settings"
    locality_class = NONLOCAL
    counterfactually_definite = True
    depends_on_all_settings = True

    def __init__(self, lambda_alphabet_size=DEFAULT_ALPHABET, settings: SettingSet = DEFAULT_SETTINGS):
        super().__init__(lambda_alphabet_size)
        self.settings = settings

    @staticmethod
    def shift(settings: SettingSet) -> float:
        return math.fmod(settings.a + settings.d + settings.b + settings.c, TWO_PI)

    def _outcomes(self, station, angles, tokens, settings):
        phi = self.source_direction(tokens) + self.shift(settings)
        out = signs(np.cos(phi - np.asarray(angles, dtype=np.float64)))
        return out if station == 1 else -out

    def pair_outcomes(self, angles1, angles2, tokens, ticks, joint_u=None):
        return (self._outcomes(1, angles1, tokens, self.settings),
                self._outcomes(2, angles2, tokens, self.settings))

    def potential_values(self, settings, tokens, ticks):
        tokens = np.asarray(tokens)
        cols = [self._outcomes(1 if lab in "ad" else 2, np.full(tokens.shape, getattr(settings, lab)),
                               tokens, settings)
                for lab in POTENTIAL_LABELS]
        return np.stack(cols, axis=1).astype(np.int8)


MODELS = {
    cls.name: cls for cls in (BellLocal, TimeDependentLocal, QuantumSinglet, NonlocalAllSettings)
}


def make_model(name: str, settings: SettingSet = DEFAULT_SETTINGS, **params) -> HiddenVariableModel:
    try:
        cls = MODELS[name]
    except KeyError:
        raise ValueError(f"unknown model {name!r}; choose from {sorted(MODELS)}") from None
    if cls is NonlocalAllSettings:
        params["settings"] = settings
    return cls(**params)


# Single-trial views.

def _one(values) -> np.ndarray:
    return np.asarray([values])


def sample_source(model: HiddenVariableModel, rng_stream: TrialStream) -> int:
    return int(model.source_tokens(_one(rng_stream.uniform()))[0])


def evaluate_station(model: HiddenVariableModel, station: int, setting: Setting,
                     source: int, tick: int, rng_stream: TrialStream | None = None) -> int:
    """Outcome of one station. ``rng_stream`` is accepted for models with
    local instrument noise; the shipped local models are deterministic."""
    if setting.station != station:
        raise ValueError(f"setting {setting.label!r} does not belong to station {station}")
    if not model.is_local:
        raise LocalityError(f"{model.name} is nonlocal; use evaluate_pair")
    _check_token(model, source)
    return int(model.station_outcomes(station, _one(setting.angle), _one(source), _one(tick))[0])


def evaluate_pair(model: HiddenVariableModel, pair: SettingPair, source: int, tick: int,
                  rng_stream: TrialStream | None = None) -> tuple[int, int]:
    _check_token(model, source)
    joint = None
    if rng_stream is not None:
        joint = (_one(rng_stream.uniform()), _one(rng_stream.uniform()))
    x, y = model.pair_outcomes(_one(pair.s1.angle), _one(pair.s2.angle), _one(source), _one(tick), joint)
    return int(x[0]), int(y[0])


def counterfactual_profile(model: HiddenVariableModel, source: int, tick: int,
                           rng_stream: TrialStream | None = None, *,
                           settings: SettingSet = DEFAULT_SETTINGS,
                           trial_id: int | None = None) -> CounterfactualRecord | Unsupported:
    trial_id = tick if trial_id is None else trial_id
    if not model.counterfactually_definite:
        return Unsupported(trial_id, tick)
    _check_token(model, source)
    vals = model.potential_values(settings, _one(source), _one(tick))[0].tolist()
    return CounterfactualRecord(trial_id, tick, source, *vals)


def theoretical_correlation(model: HiddenVariableModel, pair: SettingPair) -> float | None:
    """Closed-form E(xy) for the pair, or None where the model has none."""
    return model.closed_form(pair.theta)


def instrument_state(model: TimeDependentLocal, station: int, setting: Setting, tick: int) -> InstrumentState:
    if setting.station != station:
        raise ValueError(f"setting {setting.label!r} does not belong to station {station}")
    token = int(model.instrument_tokens(_one(setting.angle), _one(tick))[0])
    return InstrumentState(station, setting, tick, token)


def _check_token(model, source):
    if not 0 <= int(source) < model.lambda_alphabet_size:
        raise ValueError(f"source token {source} outside alphabet of size {model.lambda_alphabet_size}")
