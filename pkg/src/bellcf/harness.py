"""Run orchestration and record files.

Per trial, in order: draw the source token (no setting information is
available to that draw), then draw each station's setting from its own
stream, then evaluate the outcomes. ``tick == trial_id``.

Record file: one JSON header line ``{"schema":1,"config":{...},...}`` then one
line per record, sorted by trial id.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .core import (
    PAIR_CODES,
    PAIR_INDEX,
    POTENTIAL_KEYS,
    CounterfactualBatch,
    SettingSet,
    TrialBatch,
)
from .jsonio import dumps
from .models import MODELS, HiddenVariableModel, make_model
from .streams import Role, uniforms

SCHEMA_VERSION = 1
ACTUAL = "actual"
COUNTERFACTUAL = "counterfactual"
UNIFORM = "uniform"
FIXED = "fixed"


class ConfigError(ValueError):
    pass


class SchemaError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    model: str = "bell-local"
    n_trials: int = 1000
    mode: str = ACTUAL
    master_seed: int = 0
    settings: SettingSet = field(default_factory=SettingSet)
    model_params: dict = field(default_factory=dict)
    schedule: str = UNIFORM
    fixed_sequence: tuple[str, ...] = PAIR_CODES
    window_size: int = 1000

    def __post_init__(self):
        if self.model not in MODELS:
            raise ConfigError(f"unknown model {self.model!r}; choose from {sorted(MODELS)}")
        if int(self.n_trials) < 1:
            raise ConfigError("n_trials must be >= 1")
        if self.mode not in (ACTUAL, COUNTERFACTUAL):
            raise ConfigError(f"mode must be {ACTUAL!r} or {COUNTERFACTUAL!r}")
        if not 0 <= int(self.master_seed) < 2 ** 64:
            raise ConfigError("master_seed must fit in 64 bits")
        if self.schedule not in (UNIFORM, FIXED):
            raise ConfigError(f"schedule must be {UNIFORM!r} or {FIXED!r}")
        object.__setattr__(self, "fixed_sequence", tuple(self.fixed_sequence))
        if not self.fixed_sequence or any(c not in PAIR_INDEX for c in self.fixed_sequence):
            raise ConfigError(f"fixed_sequence must be a non-empty list of {PAIR_CODES}")
        if int(self.window_size) < 1:
            raise ConfigError("window_size must be >= 1")
        try:
            self.build_model()
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad model parameters: {exc}") from None

    def build_model(self) -> HiddenVariableModel:
        return make_model(self.model, self.settings, **self.model_params)

    def to_json(self) -> dict:
        return {
            "model": self.model,
            "model_params": dict(sorted(self.model_params.items())),
            "n_trials": int(self.n_trials),
            "mode": self.mode,
            "master_seed": int(self.master_seed),
            "angles": self.settings.as_dict(),
            "schedule": self.schedule,
            "fixed_sequence": list(self.fixed_sequence),
            "window_size": int(self.window_size),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "RunConfig":
        try:
            return cls(
                model=obj["model"],
                n_trials=int(obj["n_trials"]),
                mode=obj["mode"],
                master_seed=int(obj["master_seed"]),
                settings=SettingSet(**obj["angles"]),
                model_params=dict(obj.get("model_params", {})),
                schedule=obj.get("schedule", UNIFORM),
                fixed_sequence=tuple(obj.get("fixed_sequence", PAIR_CODES)),
                window_size=int(obj.get("window_size", 1000)),
            )
        except (KeyError, TypeError) as exc:
            raise SchemaError(f"malformed config: {exc}") from None


@dataclass
class RunArtifact:
    config: RunConfig
    records: TrialBatch | CounterfactualBatch
    provenance: dict = field(default_factory=dict)


def provenance(config: RunConfig, timestamp: bool = False) -> dict:
    # No wall-clock time by default: artifacts must be a pure function of the config.
    stamp = datetime.now(timezone.utc).isoformat() if timestamp else None
    return {"engine": f"bellcf {__version__}", "seed": int(config.master_seed), "timestamp": stamp}


def _chunks(n: int, workers: int) -> list[np.ndarray]:
    workers = max(1, min(int(workers), n))
    bounds = np.linspace(0, n, workers + 1).astype(np.int64)
    return [np.arange(lo, hi, dtype=np.int64) for lo, hi in zip(bounds[:-1], bounds[1:])]


def _parallel(fn, config: RunConfig, workers: int):
    model = config.build_model()
    parts = _chunks(config.n_trials, workers)
    if len(parts) == 1:
        return [fn(config, model, parts[0])]
    with ThreadPoolExecutor(len(parts)) as pool:
        return list(pool.map(lambda ids: fn(config, model, ids), parts))


def draw_sources(config: RunConfig, model: HiddenVariableModel, ids: np.ndarray) -> np.ndarray:
    return model.source_tokens(uniforms(config.master_seed, ids, Role.SOURCE))


def draw_pairs(config: RunConfig, ids: np.ndarray) -> np.ndarray:
    """Pair index per trial. Uniform: each station picks one of its two settings with probability 1/2."""
    if config.schedule == FIXED:
        seq = np.array([PAIR_INDEX[c] for c in config.fixed_sequence], dtype=np.int8)
        return seq[ids % len(seq)]
    first_is_a = uniforms(config.master_seed, ids, Role.SETTING1) < 0.5
    second_is_b = uniforms(config.master_seed, ids, Role.SETTING2) < 0.5
    # ac=0, ab=1, db=2, dc=3
    return np.where(first_is_a, np.where(second_is_b, 1, 0), np.where(second_is_b, 2, 3)).astype(np.int8)


def _actual_chunk(config: RunConfig, model: HiddenVariableModel, ids: np.ndarray) -> TrialBatch:
    tokens = draw_sources(config, model, ids)
    pair = draw_pairs(config, ids)
    s = config.settings
    angles1 = np.where(pair <= 1, s.a, s.d)
    angles2 = np.where((pair == 1) | (pair == 2), s.b, s.c)
    joint = (uniforms(config.master_seed, ids, Role.JOINT, 0),
             uniforms(config.master_seed, ids, Role.JOINT, 1))
    x, y = model.pair_outcomes(angles1, angles2, tokens, ids, joint)
    return TrialBatch(ids, ids, pair, x, y, tokens)


def _counterfactual_chunk(config: RunConfig, model: HiddenVariableModel, ids: np.ndarray) -> CounterfactualBatch:
    tokens = draw_sources(config, model, ids)
    values = model.potential_values(config.settings, tokens, ids)
    if values is None:
        n = len(ids)
        return CounterfactualBatch(ids, ids, np.full(n, -1), np.zeros((n, 4), np.int8), np.zeros(n, bool))
    return CounterfactualBatch(ids, ids, tokens, values)


def run_actual(config: RunConfig, workers: int = 1, timestamp: bool = False) -> RunArtifact:
    if config.mode != ACTUAL:
        raise ConfigError("run_actual needs mode 'actual'")
    batch = TrialBatch.concat(_parallel(_actual_chunk, config, workers))
    return RunArtifact(config, batch, provenance(config, timestamp))


def run_counterfactual(config: RunConfig, workers: int = 1, timestamp: bool = False) -> RunArtifact:
    if config.mode != COUNTERFACTUAL:
        raise ConfigError("run_counterfactual needs mode 'counterfactual'")
    batch = CounterfactualBatch.concat(_parallel(_counterfactual_chunk, config, workers))
    return RunArtifact(config, batch, provenance(config, timestamp))


def run(config: RunConfig, workers: int = 1, timestamp: bool = False) -> RunArtifact:
    if config.mode == ACTUAL:
        return run_actual(config, workers, timestamp)
    return run_counterfactual(config, workers, timestamp)


def sweep_profiles(model: HiddenVariableModel, settings: SettingSet, tokens, ticks) -> CounterfactualBatch:
    """Potential values for every (token, tick) combination, token-major.

    This is the full time-indexed table: all ticks for each token, not a
    sample of trials.
    """
    tok = np.repeat(np.asarray(tokens, dtype=np.int64), len(ticks))
    tick = np.tile(np.asarray(ticks, dtype=np.int64), len(tokens))
    trial = np.arange(len(tok), dtype=np.int64)
    values = model.potential_values(settings, tok, tick)
    if values is None:
        n = len(tok)
        return CounterfactualBatch(trial, tick, np.full(n, -1), np.zeros((n, 4), np.int8), np.zeros(n, bool))
    return CounterfactualBatch(trial, tick, tok, values)


# Record files.

def _header(artifact: RunArtifact) -> str:
    return dumps({"schema": SCHEMA_VERSION, "config": artifact.config.to_json(),
                  "provenance": artifact.provenance})


def _actual_lines(b: TrialBatch):
    cols = zip(b.trial.tolist(), b.tick.tolist(), b.pair.tolist(), b.x.tolist(), b.y.tolist(),
               b.source.tolist())
    for t, k, p, x, y, s in cols:
        tail = "}" if s < 0 else f',"lambda":{s}}}'
        yield f'{{"trial":{t},"tick":{k},"pair":"{PAIR_CODES[p]}","x":{x},"y":{y}{tail}'


def _counterfactual_lines(b: CounterfactualBatch):
    cols = zip(b.trial.tolist(), b.tick.tolist(), b.source.tolist(), b.values.tolist(),
               b.supported.tolist())
    for t, k, s, (va, vd, vb, vc), ok in cols:
        if ok:
            yield (f'{{"trial":{t},"tick":{k},"lambda":{s},'
                   f'"A_a":{va},"A_d":{vd},"B_b":{vb},"B_c":{vc}}}')
        else:
            yield f'{{"trial":{t},"unsupported":true}}'


def persist(artifact: RunArtifact, path) -> Path:
    path = Path(path)
    b = artifact.records
    lines = _actual_lines(b) if isinstance(b, TrialBatch) else _counterfactual_lines(b)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(_header(artifact))
        fh.write("\n")
        for line in lines:
            fh.write(line)
            fh.write("\n")
    return path


def _parse_actual(rows: list[dict]) -> TrialBatch:
    if not rows:
        return TrialBatch.empty()
    try:
        return TrialBatch(
            [r["trial"] for r in rows], [r["tick"] for r in rows],
            [PAIR_INDEX[r["pair"]] for r in rows], [r["x"] for r in rows], [r["y"] for r in rows],
            [r.get("lambda", -1) for r in rows],
        )
    except KeyError as exc:
        raise SchemaError(f"actual record missing field {exc}") from None


def _parse_counterfactual(rows: list[dict]) -> CounterfactualBatch:
    if not rows:
        return CounterfactualBatch.empty()
    trial, tick, source, values, ok = [], [], [], [], []
    try:
        for r in rows:
            trial.append(r["trial"])
            if r.get("unsupported"):
                tick.append(r.get("tick", r["trial"]))
                source.append(-1)
                values.append((0, 0, 0, 0))
                ok.append(False)
            else:
                tick.append(r["tick"])
                source.append(r["lambda"])
                values.append(tuple(r[k] for k in POTENTIAL_KEYS))
                ok.append(True)
    except KeyError as exc:
        raise SchemaError(f"counterfactual record missing field {exc}") from None
    return CounterfactualBatch(trial, tick, source, np.array(values), ok)


def load(path) -> RunArtifact:
    text = Path(path).read_text(encoding="utf-8")
    if not text.endswith("\n"):
        raise SchemaError(f"{path}: truncated file (no final newline)")
    lines = text.split("\n")[:-1]
    if not lines:
        raise SchemaError(f"{path}: empty file")
    try:
        header = json.loads(lines[0])
        rows = [json.loads(line) for line in lines[1:]]
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: invalid JSON: {exc}") from None
    if not isinstance(header, dict) or header.get("schema") != SCHEMA_VERSION:
        raise SchemaError(f"{path}: expected schema {SCHEMA_VERSION}, got {header.get('schema') if isinstance(header, dict) else header!r}")
    config = RunConfig.from_json(header["config"])
    if len(rows) != config.n_trials:
        raise SchemaError(f"{path}: expected {config.n_trials} records, found {len(rows)}")
    try:
        records = _parse_actual(rows) if config.mode == ACTUAL else _parse_counterfactual(rows)
    except ValueError as exc:
        raise SchemaError(f"{path}: {exc}") from None
    if len(records) and np.any(np.diff(records.trial) <= 0):
        raise SchemaError(f"{path}: records not sorted by trial id")
    return RunArtifact(config, records, dict(header.get("provenance", {})))


def export_csv(artifact: RunArtifact, path) -> Path:
    """Flat CSV view of the records. Drops the header, so it cannot be loaded back."""
    path = Path(path)
    b = artifact.records
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        if isinstance(b, TrialBatch):
            w.writerow(["trial", "tick", "pair", "x", "y", "lambda"])
            for r in b.records():
                w.writerow([r.trial_id, r.tick, r.pair, r.x, r.y, "" if r.source is None else r.source])
        else:
            w.writerow(["trial", "tick", "lambda", *POTENTIAL_KEYS])
            for t, k, s, v, ok in zip(b.trial.tolist(), b.tick.tolist(), b.source.tolist(),
                                      b.values.tolist(), b.supported.tolist()):
                w.writerow([t, k, s, *v] if ok else [t, k, "", "", "", "", ""])
    return path


def degrees_to_settings(text: str) -> SettingSet:
    """Parse ``a=0,d=90,b=45,c=135`` (degrees). Unlisted labels keep their defaults."""
    angles = SettingSet().as_dict()
    for part in filter(None, (p.strip() for p in text.split(","))):
        label, sep, value = part.partition("=")
        label = label.strip()
        if not sep or label not in angles:
            raise ConfigError(f"bad angle assignment {part!r}")
        try:
            angles[label] = math.radians(float(value))
        except ValueError:
            raise ConfigError(f"bad angle value in {part!r}") from None
    try:
        return SettingSet(**angles)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
