import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from bellcf.core import (
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
    as_outcome,
    canonical_pairs,
    equal_angle_pair,
)

finite_angles = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)


def test_canonical_pairs():
    pairs = canonical_pairs()
    assert len(pairs) == 4
    assert [p.code for p in pairs] == ["ac", "ab", "db", "dc"]
    assert pairs[0].sign == 1
    assert sum(p.sign for p in pairs) == -2


def test_default_angles_theta():
    thetas = {p.code: p.theta for p in canonical_pairs()}
    assert thetas["ac"] == pytest.approx(3 * math.pi / 4)
    for code in ("ab", "db", "dc"):
        assert thetas[code] == pytest.approx(math.pi / 4)


@pytest.mark.parametrize("a1, a2, expected", [
    (0.0, 0.0, 0.0),
    (0.0, 3 * math.pi / 2, math.pi / 2),
    (0.0, 3 * math.pi / 4, 3 * math.pi / 4),
])
def test_angle_between_examples(a1, a2, expected):
    assert angle_between(Setting("a", a1), Setting("b", a2)) == pytest.approx(expected, abs=1e-15)


@given(finite_angles, finite_angles)
def test_angle_between_range_and_symmetry(x, y):
    d = angle_between(x, y)
    assert 0.0 <= d <= math.pi
    assert d == angle_between(y, x)


@given(finite_angles)
def test_setting_angle_normalized(angle):
    s = Setting("a", angle)
    assert 0.0 <= s.angle < 2 * math.pi


def test_setting_rejects_bad_input():
    with pytest.raises(ValueError):
        Setting("e", 0.0)
    with pytest.raises(ValueError):
        Setting("a", float("nan"))
    with pytest.raises(ValueError):
        Setting("b", float("inf"))


def test_station_assignment():
    assert Setting("a", 0).station == Setting("d", 0).station == 1
    assert Setting("b", 0).station == Setting("c", 0).station == 2
    with pytest.raises(ValueError):
        SettingPair(Setting("b", 0), Setting("c", 0))
    with pytest.raises(ValueError):
        SettingPair(Setting("a", 0), Setting("d", 0))


def test_equal_angle_pair():
    p = equal_angle_pair(0.3)
    assert p.is_equal_angle and p.theta == 0.0
    assert all(p.is_equal_angle for p in canonical_pairs(SettingSet.equal_angle(1.0)))


@given(st.lists(st.sampled_from([1, -1]), min_size=1, max_size=10))
def test_outcome_products_closed(values):
    assert as_outcome(math.prod(values)) in (1, -1)


@pytest.mark.parametrize("bad", [0, 2, -2, 0.5])
def test_outcome_rejects(bad):
    with pytest.raises(ValueError):
        as_outcome(bad)


def test_counterfactual_record_is_all_or_nothing():
    with pytest.raises(ValueError):
        CounterfactualRecord(0, 0, 1, 1, 0, 1, 1)
    rec = CounterfactualRecord(0, 0, 1, 1, -1, 1, 1)
    assert rec.values == (1, -1, 1, 1)


def test_trial_batch_roundtrip_records():
    recs = [TrialRecord(0, 0, "ac", 1, -1, 3), TrialRecord(1, 1, "db", -1, -1, None)]
    batch = TrialBatch.from_records(recs)
    assert list(batch.records()) == recs
    assert batch == TrialBatch.from_records(recs)


def test_trial_batch_rejects_zero_outcome():
    with pytest.raises(ValueError):
        TrialBatch([0], [0], [0], [0], [1], [0])


def test_counterfactual_batch_roundtrip_records():
    recs = [CounterfactualRecord(0, 0, 5, 1, 1, -1, 1), Unsupported(1, 1)]
    batch = CounterfactualBatch.from_records(recs)
    assert not batch.all_supported
    assert list(batch.records()) == recs


def test_batch_concat_and_slice():
    b = TrialBatch(np.arange(6), np.arange(6), [0, 1, 2, 3, 0, 1], [1] * 6, [-1] * 6, [0] * 6)
    assert TrialBatch.concat([b[:2], b[2:]]) == b
    assert len(TrialBatch.empty()) == 0
    assert set(PAIR_CODES[p] for p in b.pair) == set(PAIR_CODES)
