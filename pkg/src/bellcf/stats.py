"""Estimators and inequality checks over actual-mode data.

All accumulation is in integers: per pair, the trial count ``n`` and
``sum_xy``. The number of trials with x == y is ``(n + sum_xy) / 2``. Floats
appear only when a report is formed, so results do not depend on how the
records were split between workers.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product

import numpy as np

from . import tables
from .core import PAIR_CODES, PAIR_INDEX, SettingPair, as_counterfactual_batch, as_trial_batch

SATISFIED = "Satisfied"
VIOLATED = "Violated"
INAPPLICABLE = "Inapplicable"
DEFAULT_K = 5.0
CHSH_BOUND = 2.0
GWZZ_BOUND = 0.0
MIXTURE_TOLERANCE = 1e-12


class InsufficientData(ValueError):
    pass


def _pair_index(pair) -> int:
    if isinstance(pair, SettingPair):
        return pair.index
    if isinstance(pair, str):
        return PAIR_INDEX[pair]
    return int(pair)


@dataclass
class PairCounters:
    n: list[int] = field(default_factory=lambda: [0, 0, 0, 0])
    sum_xy: list[int] = field(default_factory=lambda: [0, 0, 0, 0])

    @classmethod
    def from_batch(cls, batch) -> "PairCounters":
        batch = as_trial_batch(batch)
        n = np.bincount(batch.pair, minlength=4).astype(np.int64)
        agree = np.bincount(batch.pair[batch.x == batch.y], minlength=4).astype(np.int64)
        return cls(n.tolist(), (2 * agree - n).tolist())

    def merge(self, other: "PairCounters") -> "PairCounters":
        return PairCounters([a + b for a, b in zip(self.n, other.n)],
                            [a + b for a, b in zip(self.sum_xy, other.sum_xy)])

    def n_equal(self, i: int) -> int:
        return (self.n[i] + self.sum_xy[i]) // 2


def accumulate(records, workers: int = 1) -> PairCounters:
    """Fold records into per-pair counters, optionally over several threads."""
    batch = as_trial_batch(records)
    if workers <= 1 or len(batch) < 2:
        return PairCounters.from_batch(batch)
    bounds = np.linspace(0, len(batch), workers + 1).astype(int)
    chunks = [batch[lo:hi] for lo, hi in zip(bounds[:-1], bounds[1:])]
    with ThreadPoolExecutor(workers) as pool:
        parts = list(pool.map(PairCounters.from_batch, chunks))
    total = PairCounters()
    for part in parts:
        total = total.merge(part)
    return total


@dataclass(frozen=True)
class CorrelationEstimate:
    pair: str
    n: int
    sum_xy: int

    def __post_init__(self):
        if self.n <= 0:
            raise InsufficientData(f"no trials for pair {self.pair}")
        if abs(self.sum_xy) > self.n:
            raise ValueError("|sum_xy| cannot exceed n")

    @property
    def mean(self) -> float:
        return self.sum_xy / self.n

    @property
    def stderr(self) -> float:
        # plug-in variance, no continuity correction
        return math.sqrt(max(0.0, 1.0 - self.mean ** 2) / self.n)

    @property
    def n_equal(self) -> int:
        return (self.n + self.sum_xy) // 2

    @property
    def p_equal(self) -> float:
        return 0.5 * (1.0 + self.mean)

    def to_json(self) -> dict:
        return {"pair": self.pair, "n": self.n, "sum_xy": self.sum_xy,
                "mean": self.mean, "stderr": self.stderr}


def _estimate(counters: PairCounters, i: int) -> CorrelationEstimate:
    if counters.n[i] == 0:
        raise InsufficientData(f"no trials for pair {PAIR_CODES[i]}")
    return CorrelationEstimate(PAIR_CODES[i], counters.n[i], counters.sum_xy[i])


def estimate_correlation(records, pair) -> CorrelationEstimate:
    return _estimate(PairCounters.from_batch(records), _pair_index(pair))


def chsh_delta(e_ac: CorrelationEstimate, e_ab: CorrelationEstimate,
               e_db: CorrelationEstimate, e_dc: CorrelationEstimate) -> tuple[float, float]:
    ests = (e_ac, e_ab, e_db, e_dc)
    if tuple(e.pair for e in ests) != PAIR_CODES:
        raise ValueError(f"expected estimates for {PAIR_CODES}, got {tuple(e.pair for e in ests)}")
    delta = e_ac.mean - e_ab.mean - e_db.mean - e_dc.mean
    return delta, math.sqrt(sum(e.stderr ** 2 for e in ests))


def equality_probability(records, pair) -> tuple[float, int]:
    """Fraction of matching trials with x == y, as (1 + mean)/2 from the same counters."""
    est = estimate_correlation(records, pair)
    return est.p_equal, est.n


def gwzz_lhs(p_ac: float, p_ab: float, p_db: float, p_dc: float) -> float:
    for p in (p_ac, p_ab, p_db, p_dc):
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"probability out of range: {p!r}")
    return p_ac - p_ab - p_db - p_dc


@dataclass
class InequalityReport:
    name: str
    lhs: float | None
    bound: float
    stderr: float | None
    verdict: str
    n_per_term: dict[str, int]
    notes: dict[str, str] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"name": self.name, "lhs": self.lhs, "bound": self.bound, "stderr": self.stderr,
                "verdict": self.verdict, "n_per_term": self.n_per_term, "notes": self.notes}


def decide(lhs: float, bound: float, stderr: float, k: float = DEFAULT_K) -> str:
    return VIOLATED if lhs > bound + k * stderr else SATISFIED


def _availability(counters: PairCounters) -> tuple[dict[str, int], dict[str, str]]:
    n_per = dict(zip(PAIR_CODES, counters.n))
    notes = {code: "unavailable: no trials with this setting pair"
             for code, n in n_per.items() if n == 0}
    return n_per, notes


def chsh_report(counters: PairCounters, k: float = DEFAULT_K) -> tuple[InequalityReport, float | None]:
    """|Delta| against 2. Returns the report and the signed Delta (None if inapplicable)."""
    n_per, notes = _availability(counters)
    if notes:
        return InequalityReport("chsh", None, CHSH_BOUND, None, INAPPLICABLE, n_per, notes), None
    delta, se = chsh_delta(*(_estimate(counters, i) for i in range(4)))
    return InequalityReport("chsh", abs(delta), CHSH_BOUND, se,
                            decide(abs(delta), CHSH_BOUND, se, k), n_per), delta


def gwzz_report(counters: PairCounters, k: float = DEFAULT_K, name: str = "gwzz") -> InequalityReport:
    n_per, notes = _availability(counters)
    if notes:
        return InequalityReport(name, None, GWZZ_BOUND, None, INAPPLICABLE, n_per, notes)
    ests = [_estimate(counters, i) for i in range(4)]
    lhs = gwzz_lhs(*(e.p_equal for e in ests))
    se = math.sqrt(sum(e.p_equal * (1.0 - e.p_equal) / e.n for e in ests))
    return InequalityReport(name, lhs, GWZZ_BOUND, se, decide(lhs, GWZZ_BOUND, se, k), n_per)


# Potential-outcome (counterfactual) side.

def potential_equality_counts(cf_records) -> tuple[list[int], int]:
    """Counts of A_a=B_c, A_a=B_b, A_d=B_b, A_d=B_c over supported records, and their number."""
    batch = as_counterfactual_batch(cf_records)
    v = batch.values[batch.supported]
    a, d, b, c = v[:, 0], v[:, 1], v[:, 2], v[:, 3]
    counts = [int(np.count_nonzero(l == r)) for l, r in ((a, c), (a, b), (d, b), (d, c))]
    return counts, len(v)


def potential_gwzz_lhs(cf_records) -> float:
    """Equality-probability combination over potential values, rounded once from the exact count."""
    counts, n = potential_equality_counts(cf_records)
    if n == 0:
        raise InsufficientData("no counterfactually definite records")
    return float(Fraction(counts[0] - counts[1] - counts[2] - counts[3], n))


def potential_delta(cf_records) -> Fraction:
    """Exact mean of the per-trial four-term combination over supported records."""
    batch = as_counterfactual_batch(cf_records)
    v = batch.values[batch.supported]
    if len(v) == 0:
        raise InsufficientData("no counterfactually definite records")
    return Fraction(int(tables.signed_products(v).sum(dtype=np.int64)), len(v))


# Exhaustive verification over the 16 sign quadruples.

QUADRUPLES = tuple(product((1, -1), repeat=4))


def indicator_combination(xi: int, eta: int, zeta: int, kappa: int) -> int:
    """1{xi=eta} - 1{xi=zeta} - 1{kappa=zeta} - 1{kappa=eta}."""
    return int(xi == eta) - int(xi == zeta) - int(kappa == zeta) - int(kappa == eta)


@dataclass
class IdentityCheck:
    values: dict[tuple, int]
    failures: list[tuple]

    @property
    def passed(self) -> int:
        return len(self.values) - len(self.failures)

    @property
    def ok(self) -> bool:
        return not self.failures


def verify_four_number_identity() -> IdentityCheck:
    values, failures = {}, []
    for q in QUADRUPLES:
        v = tables.row_delta(*q)
        values[q] = v
        if v not in (2, -2):
            failures.append(q)
    return IdentityCheck(values, failures)


@dataclass
class GpwVerification:
    atom_values: dict[tuple, int]
    atom_failures: list[tuple]
    trials: int
    mixture_failures: int
    max_mixture_lhs: float

    @property
    def atom_max(self) -> int:
        return max(self.atom_values.values())

    @property
    def atom_min(self) -> int:
        return min(self.atom_values.values())

    @property
    def ok(self) -> bool:
        return not self.atom_failures and self.mixture_failures == 0


def verify_gpw_inequality(trials: int, seed: int = 0) -> GpwVerification:
    """Check the equality-probability inequality on every deterministic atom,
    then on ``trials`` random probability mixtures of the atoms."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    atom_values = {q: indicator_combination(*q) for q in QUADRUPLES}
    atom_failures = [q for q, v in atom_values.items() if v > 0]

    q = np.array(QUADRUPLES)
    xi, eta, zeta, kappa = q.T
    # indicator of each event on each atom, shape (4, 16)
    events = np.stack([xi == eta, xi == zeta, kappa == zeta, kappa == eta]).astype(np.float64)
    weights = np.random.default_rng(seed).dirichlet(np.ones(len(QUADRUPLES)), size=trials)
    probs = weights @ events.T
    lhs = probs[:, 0] - probs[:, 1] - probs[:, 2] - probs[:, 3]
    return GpwVerification(atom_values, atom_failures, trials,
                           int(np.count_nonzero(lhs > MIXTURE_TOLERANCE)), float(lhs.max()))


# Indicator accounting: one observable term per trial.

@dataclass(eq=False)
class IndicatorLedger:
    trial: np.ndarray
    observable_term: np.ndarray
    indicator: np.ndarray

    def __len__(self):
        return len(self.trial)

    def entry(self, i: int) -> list[int | None]:
        """The four terms for trial row ``i``; None marks an unobservable term."""
        row: list[int | None] = [None] * 4
        row[int(self.observable_term[i])] = int(self.indicator[i])
        return row

    def term_counts(self) -> list[int]:
        return np.bincount(self.observable_term, minlength=4).astype(int).tolist()

    def coverage(self) -> Fraction:
        """Observable terms over all terms written in the four-term combination."""
        n = len(self)
        if n == 0:
            return Fraction(0)
        return Fraction(int(np.count_nonzero(self.observable_term >= 0)), 4 * n)

    def to_json(self) -> dict:
        cov = self.coverage()
        return {
            "n_trials": len(self),
            "observable_terms": len(self),
            "unobservable_terms": 3 * len(self),
            "coverage": float(cov),
            "term_counts": dict(zip(PAIR_CODES, self.term_counts())),
            "indicator_sums": dict(zip(PAIR_CODES, np.bincount(
                self.observable_term, weights=self.indicator, minlength=4).astype(int).tolist())),
        }


def indicator_accounting(records) -> IndicatorLedger:
    batch = as_trial_batch(records)
    return IndicatorLedger(batch.trial, batch.pair.astype(np.int64),
                           (batch.x == batch.y).astype(np.int8))


# Tick windows.

def _window_counters(records, window_size: int):
    if window_size < 1:
        raise ValueError("window_size must be >= 1")
    batch = as_trial_batch(records)
    if len(batch) == 0:
        return np.zeros(0, np.int64), np.zeros((0, 4), np.int64), np.zeros((0, 4), np.int64)
    wid = batch.tick // window_size
    windows, inv = np.unique(wid, return_inverse=True)
    flat = inv * 4 + batch.pair
    size = 4 * len(windows)
    n = np.bincount(flat, minlength=size).reshape(-1, 4).astype(np.int64)
    agree = np.bincount(flat[batch.x == batch.y], minlength=size).reshape(-1, 4).astype(np.int64)
    return windows, n, 2 * agree - n


def windowed_gwzz(records, window_size: int, k: float = DEFAULT_K) -> list[InequalityReport]:
    """GWZZ check per consecutive block of ``window_size`` ticks."""
    windows, n, s = _window_counters(records, window_size)
    return [
        gwzz_report(PairCounters(n[i].tolist(), s[i].tolist()), k, name=f"gwzz[window {int(w)}]")
        for i, w in enumerate(windows)
    ]


def windowed_summary(records, window_size: int, k: float = DEFAULT_K) -> dict:
    """Verdict counts over windows without building a report per window."""
    windows, n, s = _window_counters(records, window_size)
    missing = np.count_nonzero(n == 0, axis=1)
    full = missing == 0
    violated = 0
    if full.any():
        nf, sf = n[full], s[full]
        p = 0.5 * (1.0 + sf / nf)
        lhs = p[:, 0] - p[:, 1] - p[:, 2] - p[:, 3]
        se = np.sqrt((p * (1.0 - p) / nf).sum(axis=1))
        violated = int(np.count_nonzero(lhs > GWZZ_BOUND + k * se))
    return {
        "window_size": window_size,
        "n_windows": len(windows),
        "inapplicable": int(np.count_nonzero(~full)),
        "violated": violated,
        "satisfied": int(np.count_nonzero(full)) - violated,
        "unavailable_terms_histogram": {str(j): int(np.count_nonzero(missing == j)) for j in range(5)},
    }
