"""Simulation and analysis of Bell-test experiments with counterfactual outcome tables."""

__version__ = "0.1.0"

from .core import (  # noqa: E402
    DEFAULT_SETTINGS,
    PAIR_CODES,
    CounterfactualBatch,
    CounterfactualRecord,
    Setting,
    SettingPair,
    SettingSet,
    TrialBatch,
    TrialRecord,
    Unsupported,
    angle_between,
    canonical_pairs,
)
from .harness import RunArtifact, RunConfig, load, persist, run, run_actual, run_counterfactual  # noqa: E402
from .models import make_model  # noqa: E402
