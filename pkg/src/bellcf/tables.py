"""Counterfactual outcome tables.

A potential table holds, per trial, the four signed products
``+A_a B_c, -A_a B_b, -A_d B_b, -A_d B_c``. Grouping rows by equal source
token gives the reordered table, whose rows each sum to +2 or -2 as long as a
token always carries the same four values. When values for one token change
with the tick, grouping is blocked and a :class:`ProofObstruction` lists the
conflicting cells.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .core import (
    POTENTIAL_LABELS,
    CounterfactualBatch,
    as_counterfactual_batch,
    as_trial_batch,
)

TIME_CONFLICT = "TimeConflict"
NOT_COUNTERFACTUALLY_DEFINITE = "NotCounterfactuallyDefinite"
DEFAULT_WITNESS_CAP = 100

# (column of first factor, column of second factor, sign) per product, columns in POTENTIAL_LABELS order
_PRODUCTS = ((0, 3, 1), (0, 2, -1), (1, 2, -1), (1, 3, -1))


def row_delta(xi: int, eta: int, zeta: int, kappa: int) -> int:
    """xi*eta - xi*zeta - kappa*zeta - kappa*eta for four values in {+1, -1}."""
    for v in (xi, eta, zeta, kappa):
        if v not in (1, -1):
            raise ValueError(f"expected +1 or -1, got {v!r}")
    return xi * eta - xi * zeta - kappa * zeta - kappa * eta


def signed_products(values: np.ndarray) -> np.ndarray:
    values = np.asarray(values, dtype=np.int8).reshape(-1, 4)
    cols = [sign * values[:, i] * values[:, j] for i, j, sign in _PRODUCTS]
    return np.stack(cols, axis=1).astype(np.int8) if len(values) else np.zeros((0, 4), np.int8)


@dataclass(frozen=True)
class Witness:
    """One cell where a token's potential value differs between two ticks."""

    label: str
    token: int
    trials: tuple[int, int]
    ticks: tuple[int, int]
    values: tuple[int, int]

    def to_json(self) -> dict:
        return {"label": self.label, "lambda": self.token, "trials": list(self.trials),
                "ticks": list(self.ticks), "values": list(self.values)}


@dataclass
class ProofObstruction:
    kind: str
    witnesses: list[Witness] = field(default_factory=list)
    total_conflicts: int = 0
    unsupported_trials: list[int] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "total_conflicts": self.total_conflicts,
            "witness_count": len(self.witnesses),
            "witnesses": [w.to_json() for w in self.witnesses],
            "unsupported_trials": self.unsupported_trials,
        }


class ObstructionError(Exception):
    def __init__(self, obstruction: ProofObstruction):
        super().__init__(f"{obstruction.kind}: table cannot be built")
        self.obstruction = obstruction


class ModelConsistencyError(RuntimeError):
    """Two records with the same token and tick carry different values: a model bug."""


@dataclass(eq=False)
class PotentialTable:
    trial: np.ndarray
    tick: np.ndarray
    token: np.ndarray
    values: np.ndarray
    products: np.ndarray

    def __len__(self):
        return len(self.trial)

    @property
    def row_sums(self) -> np.ndarray:
        return self.products.sum(axis=1, dtype=np.int64)

    def to_json(self) -> dict:
        return {
            "kind": "potential_table",
            "trials": self.trial.tolist(),
            "ticks": self.tick.tolist(),
            "lambda": self.token.tolist(),
            "rows": self.products.tolist(),
            "row_sums": self.row_sums.tolist(),
        }


def build_potential_table(records) -> PotentialTable:
    batch = as_counterfactual_batch(records)
    if not batch.all_supported:
        bad = batch.trial[~batch.supported].tolist()
        raise ObstructionError(ProofObstruction(NOT_COUNTERFACTUALLY_DEFINITE, unsupported_trials=bad))
    order = np.argsort(batch.tick, kind="stable")
    batch = batch[order]
    return PotentialTable(batch.trial, batch.tick, batch.source, batch.values,
                          signed_products(batch.values))


@dataclass
class Group:
    token: int
    trials: np.ndarray
    ticks: np.ndarray
    products: np.ndarray

    @property
    def row_sums(self) -> np.ndarray:
        return self.products.sum(axis=1, dtype=np.int64)


@dataclass
class GroupedTable:
    groups: dict[int, Group]
    value_conflicts: int = 0

    @property
    def n_rows(self) -> int:
        return sum(len(g.trials) for g in self.groups.values())

    def row_sum_histogram(self) -> dict[int, int]:
        hist = {2: 0, -2: 0}
        for g in self.groups.values():
            s = g.row_sums
            hist[2] += int(np.count_nonzero(s == 2))
            hist[-2] += int(np.count_nonzero(s == -2))
        return hist

    def row_sum_total(self) -> int:
        return sum(int(g.row_sums.sum()) for g in self.groups.values())

    def column_totals(self) -> list[int]:
        tot = [0, 0, 0, 0]
        for g in self.groups.values():
            for j, v in enumerate(g.products.sum(axis=0, dtype=np.int64).tolist()):
                tot[j] += v
        return tot

    def mean_row_sum(self) -> Fraction:
        return Fraction(self.row_sum_total(), self.n_rows)

    def signed_column_mean_sum(self) -> Fraction:
        n = self.n_rows
        return sum((Fraction(t, n) for t in self.column_totals()), Fraction(0))

    def to_json(self) -> dict:
        hist = self.row_sum_histogram()
        return {
            "kind": "grouped_table",
            "n_rows": self.n_rows,
            "group_count": len(self.groups),
            "value_conflicts": self.value_conflicts,
            "row_sum_histogram": {"+2": hist[2], "-2": hist[-2]},
            "groups": [
                {"lambda": tok, "trials": g.trials.tolist(), "ticks": g.ticks.tolist(),
                 "rows": g.products.tolist()}
                for tok, g in sorted(self.groups.items())
            ],
        }


def _check_same_tick_consistency(table: PotentialTable) -> None:
    if len(table) < 2:
        return
    order = np.lexsort((table.tick, table.token))
    tok, tick, vals = table.token[order], table.tick[order], table.values[order]
    same = (tok[1:] == tok[:-1]) & (tick[1:] == tick[:-1])
    clash = same & np.any(vals[1:] != vals[:-1], axis=1)
    if clash.any():
        i = int(np.flatnonzero(clash)[0])
        t1, t2 = table.trial[order][i], table.trial[order][i + 1]
        raise ModelConsistencyError(
            f"trials {t1} and {t2} share token {tok[i]} and tick {tick[i]} but differ")


def reorder_by_lambda(table: PotentialTable, time_sensitivity: bool,
                      witness_cap: int = DEFAULT_WITNESS_CAP) -> GroupedTable | ProofObstruction:
    """Group rows by equal source token.

    With ``time_sensitivity`` the rows keep their ticks, and any token whose
    potential values differ between ticks blocks the grouping. Without it the
    ticks are ignored; grouping always proceeds and the number of cells that
    disagree with their group's first row is reported as ``value_conflicts``.
    """
    _check_same_tick_consistency(table)
    n = len(table)
    if n == 0:
        return GroupedTable({})
    _, first, inverse = np.unique(table.token, return_index=True, return_inverse=True)
    ref = first[inverse]
    mismatch = table.values != table.values[ref]
    total = int(np.count_nonzero(mismatch))

    if time_sensitivity and total:
        rows, cols = np.nonzero(mismatch)
        witnesses = []
        for r, c in zip(rows[:witness_cap].tolist(), cols[:witness_cap].tolist()):
            f = int(ref[r])
            witnesses.append(Witness(
                label=POTENTIAL_LABELS[c],
                token=int(table.token[r]),
                trials=(int(table.trial[f]), int(table.trial[r])),
                ticks=(int(table.tick[f]), int(table.tick[r])),
                values=(int(table.values[f, c]), int(table.values[r, c])),
            ))
        return ProofObstruction(TIME_CONFLICT, witnesses, total)

    order = np.argsort(table.token, kind="stable")
    tok_sorted = table.token[order]
    cuts = np.flatnonzero(np.diff(tok_sorted)) + 1
    groups = {}
    for idx in np.split(order, cuts):
        tok = int(table.token[idx[0]])
        groups[tok] = Group(tok, table.trial[idx], table.tick[idx], table.products[idx])
    return GroupedTable(groups, value_conflicts=total)


def replay_witness(witness: Witness, records) -> bool:
    """True if the cited records carry the cited token, ticks and differing values."""
    batch = as_counterfactual_batch(records)
    col = POTENTIAL_LABELS.index(witness.label)
    found = []
    for trial_id in witness.trials:
        hit = np.flatnonzero(batch.trial == trial_id)
        if len(hit) != 1 or not batch.supported[hit[0]]:
            return False
        found.append(int(hit[0]))
    ok = all(
        int(batch.source[i]) == witness.token
        and int(batch.tick[i]) == tick
        and int(batch.values[i, col]) == val
        for i, tick, val in zip(found, witness.ticks, witness.values)
    )
    return ok and witness.values[0] != witness.values[1]


@dataclass(eq=False)
class TimeIndexedTable:
    token: int
    tick: np.ndarray
    trial: np.ndarray
    products: np.ndarray

    def __len__(self):
        return len(self.tick)

    @property
    def row_sums(self) -> np.ndarray:
        return self.products.sum(axis=1, dtype=np.int64)

    def to_json(self) -> dict:
        return {"kind": "time_indexed_table", "lambda": self.token, "ticks": self.tick.tolist(),
                "trials": self.trial.tolist(), "rows": self.products.tolist(),
                "row_sums": self.row_sums.tolist()}


def build_time_indexed_table(records, fixed_token: int) -> TimeIndexedTable:
    """All rows for one token, one row per tick."""
    batch = as_counterfactual_batch(records)
    sel = batch[batch.source == fixed_token]
    if len(sel) == 0:
        return TimeIndexedTable(int(fixed_token), np.zeros(0, np.int64), np.zeros(0, np.int64),
                                np.zeros((0, 4), np.int8))
    if not sel.all_supported:
        raise ObstructionError(ProofObstruction(NOT_COUNTERFACTUALLY_DEFINITE,
                                                unsupported_trials=sel.trial[~sel.supported].tolist()))
    order = np.argsort(sel.tick, kind="stable")
    sel = sel[order]
    if len(sel) > 1 and np.any(np.diff(sel.tick) == 0):
        raise ValueError(f"token {fixed_token} has more than one row at the same tick")
    return TimeIndexedTable(int(fixed_token), sel.tick, sel.trial, signed_products(sel.values))


def potential_value_count(table) -> int:
    if isinstance(table, (list, tuple)):
        return sum(potential_value_count(t) for t in table)
    if isinstance(table, GroupedTable):
        return 4 * table.n_rows
    if isinstance(table, CounterfactualBatch):
        return 4 * int(np.count_nonzero(table.supported))
    return 4 * len(table)


def element_count_audit(table: PotentialTable | TimeIndexedTable | Sequence, run) -> float:
    """Single-station potential values in the table per actually measured outcome pair."""
    return count_ratio(potential_value_count(table), len(as_trial_batch(run)))


def count_ratio(n_potential_values: int, n_pairs: int) -> float:
    if n_pairs <= 0:
        raise ValueError("element count audit needs a non-empty run")
    return n_potential_values / n_pairs
