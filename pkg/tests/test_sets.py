import numpy as np
import pytest
from hypothesis import given, strategies as st

from predbands.sets import (
    GridSpec,
    IntervalUnion,
    PredictionBand,
    from_indicator,
    intersection_measure,
    measure,
    symmetric_difference_measure,
)


def test_measure_examples():
    assert measure(IntervalUnion(())) == 0
    assert measure(IntervalUnion(((0, 1), (2, 3.5)))) == pytest.approx(2.5)


def test_overlapping_intervals_merge():
    s = IntervalUnion(((2, 3), (0, 1), (0.5, 2.2)))
    assert s.intervals == ((0, 3),)
    assert s.contains(2.9) and not s.contains(3.1)


def test_grid_spec():
    g = GridSpec(0.0, 1.0, 11)
    assert g.spacing == pytest.approx(0.1)
    assert g.points[-1] == 1.0
    with pytest.raises(ValueError):
        GridSpec(1.0, 0.0, 5)
    with pytest.raises(ValueError):
        GridSpec(0.0, 1.0, 1)


def test_from_indicator_runs():
    g = GridSpec(0.0, 10.0, 11)
    s = from_indicator([0, 1, 1, 1, 0, 0, 1, 0, 0, 0, 1], g)
    assert s.intervals == ((0.5, 3.5), (5.5, 6.5), (9.5, 10.0))
    assert from_indicator(np.zeros(11), g).measure == 0


@given(st.lists(st.booleans(), min_size=2, max_size=60))
def test_indicator_measure_within_one_spacing(mask):
    g = GridSpec(-1.0, 2.0, len(mask))
    s = from_indicator(mask, g)
    assert abs(s.measure - sum(mask) * g.spacing) <= g.spacing + 1e-12
    for a, b in s:
        assert a <= b
    for (_, b), (a, _) in zip(s.intervals, s.intervals[1:]):
        assert b < a


intervals = st.lists(
    st.tuples(st.floats(-10, 10), st.floats(0, 5)).map(lambda t: (t[0], t[0] + t[1])), max_size=6
).map(lambda v: IntervalUnion(tuple(v)))


@given(intervals, intervals)
def test_symmetric_difference_matches_dense_grid(a, b):
    ys = np.linspace(-10, 15, 25001)
    step = ys[1] - ys[0]
    dense = np.count_nonzero(a.contains(ys) != b.contains(ys)) * step
    sd = symmetric_difference_measure(a, b)
    assert sd == pytest.approx(dense, abs=2 * step * (len(a) + len(b)) + 1e-9)
    assert intersection_measure(a, b) <= min(a.measure, b.measure) + 1e-12


def test_band_validation_and_lookup():
    sets = [IntervalUnion(((0, 1),)), IntervalUnion(((5, 6),))]
    band = PredictionBand([0.0, 1.0], sets, 0.1, "cops")
    assert band.covers([[0.2], [0.9]], [0.5, 5.5]).tolist() == [True, True]
    assert band.set_at(0.4) is sets[0]
    with pytest.raises(ValueError):
        PredictionBand([0.0], sets, 0.1, "cops")
    with pytest.raises(ValueError):
        PredictionBand([0.0, 1.0], sets, 1.0, "cops")
    with pytest.raises(ValueError):
        PredictionBand([0.0, 1.0], sets, 0.1, "quantile")


def test_lookup_stays_in_bin():
    # 0.45 is nearer grid point 0.5, but the locator puts it in the left bin
    sets = [IntervalUnion(((0, 1),)), IntervalUnion(((5, 6),))]
    band = PredictionBand(
        [0.0, 0.5], sets, 0.1, "cops", cells=np.array([0, 1]),
        locator=lambda x: (np.asarray(x)[:, 0] >= 0.48).astype(int),
    )
    assert band.index_for([[0.45], [0.49]]).tolist() == [0, 1]
