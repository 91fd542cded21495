import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hiervar import knee
from hiervar.errors import ConfigurationError
from hiervar.knee import (
    CONVEX,
    STRONGEST,
    KneeResult,
    NoKneeWarning,
    kneedle_detect,
    rank_coefficients,
    select_erocket,
)
from hiervar.linear import fit_ridge

from oracles import curvature_knee


def informative_problem(seed, n=100, k=1000, informative=10):
    rng = np.random.default_rng(seed)
    y = np.repeat([1, 2], n // 2)
    z = rng.uniform(0, 1, size=(n, k))
    cols = rng.choice(k, informative, replace=False)
    shift = np.where(y == 1, -0.25, 0.25)
    z[:, cols] = 0.5 + shift[:, None] + 0.1 * rng.standard_normal((n, informative))
    return z, y, cols


def test_binary_ranking_example():
    r = rank_coefficients(np.array([[-3.0, 3.0], [1.0, -1.0], [2.0, -2.0]]))
    assert r.magnitudes.tolist() == [1.0, 2.0, 3.0]
    assert r.permutation.tolist() == [1, 2, 0]


def test_multiclass_aggregations():
    w = np.array([[3.0, 4.0, 0.0], [1.0, -6.0, 2.0]])
    assert knee.coefficient_scores(w).tolist()[0] == 5.0
    assert knee.coefficient_scores(w, knee.MAX_ABS).tolist() == [4.0, 6.0]
    with pytest.raises(ConfigurationError):
        knee.coefficient_scores(w, "median")


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-100, 100), min_size=3, max_size=50), st.integers(2, 4))
def test_ranking_invariants(values, c):
    w = np.resize(np.asarray(values), (len(values), c))
    r = rank_coefficients(w)
    assert np.all(np.diff(r.magnitudes) >= 0)
    assert sorted(r.permutation.tolist()) == list(range(len(values)))
    again = rank_coefficients(w)
    np.testing.assert_array_equal(r.permutation, again.permutation)
    np.testing.assert_array_equal(r.magnitudes, again.magnitudes)


def test_ties_keep_original_order():
    r = rank_coefficients(np.array([2.0, 1.0, 2.0, 1.0]))
    assert r.permutation.tolist() == [1, 3, 0, 2]


def test_linear_and_constant_curves_have_no_knee():
    assert kneedle_detect(np.arange(10.0)).knee_index is None
    assert kneedle_detect(np.full(7, 2.5)).knee_index is None
    assert kneedle_detect(np.arange(10.0), shape=CONVEX).knee_index is None


def test_input_errors():
    with pytest.raises(ConfigurationError):
        kneedle_detect([1.0, 2.0])
    with pytest.raises(ConfigurationError):
        kneedle_detect([1.0, np.nan, 2.0])
    with pytest.raises(ConfigurationError):
        kneedle_detect([0.0, 1.0, 2.0], sensitivity=0)


def test_saturating_curve_against_curvature_oracle():
    x = np.arange(10.0)
    y = 1 - 1 / (x + 1)
    oracle = curvature_knee(y)
    assert oracle == 2
    result = kneedle_detect(y, 1.0)
    assert result.knee_index == 2
    assert abs(result.knee_index - oracle) <= 1


def test_convex_orientation_mirrors_concave():
    x = np.arange(30.0)
    concave = 1 - np.exp(-x / 4)
    convex = (concave.max() - concave)[::-1]
    a = kneedle_detect(concave)
    b = kneedle_detect(convex, shape=CONVEX)
    assert b.knee_index == len(x) - 1 - a.knee_index
    np.testing.assert_allclose(b.difference_curve, a.difference_curve[::-1])


def test_knee_is_confirmed_local_maximum():
    rng = np.random.default_rng(0)
    for _ in range(20):
        y = np.sort(rng.exponential(size=200)) ** 0.3
        for select in (knee.FIRST, STRONGEST):
            res = kneedle_detect(y, 1.0, select=select)
            if res.found:
                k, diff = res.knee_index, res.difference_curve
                assert k in res.candidates
                assert diff[k] > diff[k - 1] and diff[k] >= diff[k + 1]


def test_strongest_knee_dominates_first():
    rng = np.random.default_rng(1)
    y = np.sort(np.abs(rng.standard_normal(500)))
    first = kneedle_detect(y, shape=CONVEX)
    strongest = kneedle_detect(y, shape=CONVEX, select=STRONGEST)
    assert first.found and strongest.found
    d = strongest.difference_curve
    assert d[strongest.knee_index] >= d[first.knee_index]


@pytest.mark.parametrize("select", [knee.FIRST, STRONGEST])
@pytest.mark.parametrize("seed", range(5))
def test_informative_features_survive_pruning(seed, select):
    z, y, cols = informative_problem(seed)
    ranking = rank_coefficients(fit_ridge(z, y, 1.0))
    res = kneedle_detect(ranking.magnitudes, shape=CONVEX, select=select)
    assert res.knee_index >= 900
    kept = select_erocket(ranking, res)
    assert np.isin(cols, kept).sum() >= 8


def test_select_example():
    ranking = knee.CoefficientRanking(np.array([1.0, 2.0, 3.0]), np.array([1, 2, 0]))
    result = KneeResult(knee_index=0, sensitivity=1.0, difference_curve=np.zeros(3))
    assert select_erocket(ranking, result).tolist() == [0, 2]


def test_absent_knee_keeps_everything():
    ranking = rank_coefficients(np.arange(6.0))
    with pytest.warns(NoKneeWarning):
        kept = select_erocket(ranking, kneedle_detect(ranking.magnitudes))
    assert kept.tolist() == list(range(6))


curves = st.lists(st.floats(0, 1e3), min_size=5, max_size=80).map(np.array)


@settings(max_examples=80, deadline=None)
@given(curves, st.floats(1e-3, 1e3), st.sampled_from([knee.CONCAVE, CONVEX]))
def test_selection_scale_invariant_and_ordered(values, scale, shape):
    ranking = rank_coefficients(values)
    res = kneedle_detect(ranking.magnitudes, shape=shape)
    scaled = rank_coefficients(values * scale)
    res2 = kneedle_detect(scaled.magnitudes, shape=shape)
    assert res.knee_index == res2.knee_index
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NoKneeWarning)
        kept = select_erocket(ranking, res)
        np.testing.assert_array_equal(kept, select_erocket(scaled, res2))
    if res.found:
        assert len(kept) == len(values) - 1 - res.knee_index
        dropped = np.setdiff1d(np.arange(len(values)), kept)
        if len(dropped) and len(kept):
            assert values[kept].min() >= values[dropped].max()


def test_knee_csv(tmp_path):
    rng = np.random.default_rng(2)
    ranking = rank_coefficients(rng.standard_normal(50))
    res = kneedle_detect(ranking.magnitudes, shape=CONVEX)
    path = tmp_path / "knee.csv"
    knee.write_knee_csv(path, ranking, res)
    lines = path.read_text().splitlines()
    assert lines[0] == "position,feature_index,magnitude,difference,candidate,knee"
    assert len(lines) == 51
    assert sum(int(ln.split(",")[-1]) for ln in lines[1:]) == int(res.found)
