from fractions import Fraction
from itertools import product

import numpy as np
import pytest
from hypothesis import given, strategies as st

from bellcf import RunConfig, run
from bellcf.core import DEFAULT_SETTINGS, CounterfactualBatch, CounterfactualRecord, Unsupported
from bellcf.harness import sweep_profiles
from bellcf.models import TimeDependentLocal
from bellcf.tables import (
    NOT_COUNTERFACTUALLY_DEFINITE,
    TIME_CONFLICT,
    GroupedTable,
    ModelConsistencyError,
    ObstructionError,
    ProofObstruction,
    build_potential_table,
    build_time_indexed_table,
    element_count_audit,
    reorder_by_lambda,
    replay_witness,
    row_delta,
)

signs = st.sampled_from([1, -1])


def test_row_delta_examples():
    assert row_delta(1, 1, 1, 1) == -2
    assert row_delta(1, 1, -1, -1) == 2


def test_row_delta_exhaustive():
    # oracle: the four products written out term by term for each of the 16 cases
    seen = {}
    for xi, eta, zeta, kappa in product((1, -1), repeat=4):
        terms = [xi * eta, -(xi * zeta), -(kappa * zeta), -(kappa * eta)]
        seen[(xi, eta, zeta, kappa)] = sum(terms)
        assert row_delta(xi, eta, zeta, kappa) == sum(terms)
    assert len(seen) == 16
    assert set(seen.values()) == {2, -2}


@given(signs, signs, signs, signs)
def test_row_delta_global_flip(xi, eta, zeta, kappa):
    assert row_delta(-xi, -eta, -zeta, -kappa) == row_delta(xi, eta, zeta, kappa)


def test_row_delta_rejects_zero():
    with pytest.raises(ValueError):
        row_delta(1, 0, 1, 1)


def test_build_potential_table_small():
    assert len(build_potential_table([])) == 0
    t = build_potential_table([CounterfactualRecord(0, 0, 0, 1, 1, 1, 1)])
    assert t.products.tolist() == [[1, -1, -1, -1]]


def test_build_potential_table_unsupported():
    with pytest.raises(ObstructionError) as exc:
        build_potential_table([CounterfactualRecord(0, 0, 0, 1, 1, 1, 1), Unsupported(1, 1)])
    assert exc.value.obstruction.kind == NOT_COUNTERFACTUALLY_DEFINITE
    assert exc.value.obstruction.unsupported_trials == [1]


def test_bell_local_rows_and_grouping(bell_cf):
    table = build_potential_table(bell_cf.records)
    assert set(table.row_sums.tolist()) <= {2, -2}
    grouped = reorder_by_lambda(table, time_sensitivity=True)
    assert isinstance(grouped, GroupedTable)
    hist = grouped.row_sum_histogram()
    assert hist[2] + hist[-2] == len(bell_cf.records)
    assert grouped.mean_row_sum() == grouped.signed_column_mean_sum()
    assert abs(grouped.mean_row_sum()) <= 2


def test_time_dependent_obstruction(tdl_cf):
    table = build_potential_table(tdl_cf.records)
    result = reorder_by_lambda(table, time_sensitivity=True, witness_cap=25)
    assert isinstance(result, ProofObstruction)
    assert result.kind == TIME_CONFLICT
    assert 1 <= len(result.witnesses) <= 25
    assert all(replay_witness(w, tdl_cf.records) for w in result.witnesses)


def _conflict_count_oracle(records: CounterfactualBatch) -> int:
    first = {}
    count = 0
    for rec in records.records():
        ref = first.setdefault(rec.source, rec.values)
        count += sum(a != b for a, b in zip(ref, rec.values))
    return count


def test_conflict_counts_exact_and_tick_erased_mode(tdl_cf):
    table = build_potential_table(tdl_cf.records)
    obstruction = reorder_by_lambda(table, True)
    erased = reorder_by_lambda(table, False)
    assert isinstance(erased, GroupedTable)
    expected = _conflict_count_oracle(tdl_cf.records)
    assert obstruction.total_conflicts == erased.value_conflicts == expected > 0


def test_replay_detects_tampering(tdl_cf):
    w = reorder_by_lambda(build_potential_table(tdl_cf.records), True).witnesses[0]
    tampered = tdl_cf.records[:]
    i = int(np.flatnonzero(tampered.trial == w.trials[1])[0])
    tampered.values[i] = -tampered.values[i]
    assert not replay_witness(w, tampered)


def test_same_token_same_tick_mismatch_is_model_bug():
    recs = [CounterfactualRecord(0, 4, 2, 1, 1, 1, 1), CounterfactualRecord(1, 4, 2, -1, 1, 1, 1)]
    with pytest.raises(ModelConsistencyError):
        reorder_by_lambda(build_potential_table(recs), False)


def test_empty_reorder():
    g = reorder_by_lambda(build_potential_table([]), True)
    assert isinstance(g, GroupedTable) and g.n_rows == 0


@given(st.dictionaries(st.integers(0, 7), st.tuples(signs, signs, signs, signs), min_size=1),
       st.lists(st.integers(0, 7), min_size=1, max_size=200))
def test_time_free_tables_always_group(lookup, tokens):
    tokens = [t for t in tokens if t in lookup] or [next(iter(lookup))]
    recs = [CounterfactualRecord(i, i, t, *lookup[t]) for i, t in enumerate(tokens)]
    grouped = reorder_by_lambda(build_potential_table(recs), time_sensitivity=True)
    assert isinstance(grouped, GroupedTable)
    assert grouped.value_conflicts == 0
    assert grouped.mean_row_sum() == grouped.signed_column_mean_sum()
    assert abs(grouped.mean_row_sum()) <= 2
    assert grouped.row_sum_total() == sum(grouped.column_totals())


def test_time_indexed_table():
    m = TimeDependentLocal()
    recs = sweep_profiles(m, DEFAULT_SETTINGS, [7], range(100))
    t = build_time_indexed_table(recs, 7)
    assert len(t) == 100
    assert t.tick.tolist() == list(range(100))
    assert set(t.row_sums.tolist()) <= {2, -2}
    single = build_time_indexed_table(recs[:1], 7)
    assert len(single) == 1 and abs(int(single.row_sums[0])) == 2
    assert len(build_time_indexed_table(recs, 3)) == 0


def test_time_indexed_rows_averaged_over_tokens_within_bounds():
    m = TimeDependentLocal()
    recs = sweep_profiles(m, DEFAULT_SETTINGS, range(64), range(32))
    sums = np.concatenate([build_time_indexed_table(recs, tok).row_sums for tok in range(64)])
    assert -2 <= sums.mean() <= 2


def test_element_count_audit():
    n = 500
    cf = run(RunConfig(model="time-dependent-local", n_trials=n, mode="counterfactual", master_seed=2))
    actual = run(RunConfig(model="time-dependent-local", n_trials=n, master_seed=2))
    assert element_count_audit(build_potential_table(cf.records), actual.records) == 4.0
    assert element_count_audit(build_potential_table([]), actual.records) == 0.0
    m = TimeDependentLocal()
    sweep = sweep_profiles(m, DEFAULT_SETTINGS, range(64), range(n))
    full = [build_time_indexed_table(sweep, tok) for tok in range(64)]
    assert element_count_audit(full, actual.records) == 4 * 64
    with pytest.raises(ValueError):
        element_count_audit(full, [])


def test_table_json_shapes(bell_cf):
    g = reorder_by_lambda(build_potential_table(bell_cf.records[:50]), True).to_json()
    assert g["kind"] == "grouped_table"
    assert all(isinstance(grp["lambda"], int) for grp in g["groups"])
    assert sum(len(grp["rows"]) for grp in g["groups"]) == 50
    assert Fraction(sum(sum(r) for grp in g["groups"] for r in grp["rows"]), 50) == \
        reorder_by_lambda(build_potential_table(bell_cf.records[:50]), True).mean_row_sum()
