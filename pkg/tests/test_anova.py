import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hiervar.anova import (
    FScoreVector,
    apply_selection,
    d_sweep,
    f_scores,
    mean_finite,
    select_hiervar,
    write_fscore_csv,
)
from hiervar.errors import ConfigurationError, DegenerateLabelsError
from hiervar.representation import FeatureMatrix

from oracles import anova_loop


def scores_vector(f, d=2.0):
    f = np.asarray(f, dtype=float)
    mu = mean_finite(f)
    zero = np.zeros_like(f)
    return FScoreVector(f, mu, d, mu / d, np.array([1, 1]), zero, zero, zero)


@st.composite
def problems(draw, max_n=40, max_k=12):
    c = draw(st.integers(2, 5))
    n = draw(st.integers(c + 1, max_n))
    k = draw(st.integers(1, max_k))
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    y = np.r_[np.arange(1, c + 1), rng.integers(1, c + 1, n - c)]
    z = rng.uniform(size=(n, k)) + 0.3 * y[:, None] * rng.uniform(size=k)
    return z, rng.permutation(y)


def test_hand_computed_two_class_example():
    fs = f_scores(np.array([[1.0], [2.0], [4.0], [6.0]]), [1, 1, 2, 2])
    assert fs.ssb[0] == pytest.approx(12.25)
    assert fs.ssw[0] == pytest.approx(2.5)
    assert fs.f_scores[0] == pytest.approx(9.8, rel=1e-12)
    assert anova_loop([[1.0], [2.0], [4.0], [6.0]], [1, 1, 2, 2])[0] == pytest.approx(9.8)


def test_degenerate_features():
    z = np.array([[0.0, 5.0, 1.0], [0.0, 5.0, 2.0], [1.0, 5.0, 4.0], [1.0, 5.0, 6.0]])
    fs = f_scores(z, [1, 1, 2, 2])
    assert fs.f_scores[0] == np.inf
    assert fs.f_scores[1] == 0.0
    # the infinite entry is left out of the mean
    assert fs.mean_f == pytest.approx((0.0 + 9.8) / 2)
    assert 0 in fs.passing()


def test_degeneracy_exact_despite_rounding():
    # class means of 0.1-valued columns do not round-trip exactly in floating point
    z = np.array([[0.1, 0.7]] * 3 + [[0.3, 0.7]] * 4)
    fs = f_scores(z, [1, 1, 1, 2, 2, 2, 2])
    assert fs.f_scores.tolist() == [np.inf, 0.0]


@settings(max_examples=100, deadline=None)
@given(problems())
def test_matches_loop_oracle(problem):
    z, y = problem
    expected = anova_loop(z.tolist(), y.tolist())
    np.testing.assert_allclose(f_scores(z, y).f_scores, expected, rtol=1e-9)


@settings(max_examples=100, deadline=None)
@given(problems(), st.floats(0.1, 10))
def test_decomposition_and_threshold(problem, d):
    z, y = problem
    fs = f_scores(z, y, d)
    finite = np.isfinite(fs.f_scores)
    np.testing.assert_allclose(fs.sst[finite], (fs.ssb + fs.ssw)[finite], rtol=1e-9, atol=1e-12)
    assert np.all(fs.f_scores >= 0)
    assert fs.threshold == fs.mean_f / d
    assert fs.mean_f == pytest.approx(fs.f_scores[finite].mean() if finite.any() else 0.0)
    assert fs.group_counts.sum() == len(y)


@settings(max_examples=60, deadline=None)
@given(problems(), st.floats(-100, 100).filter(lambda a: abs(a) > 1e-2), st.floats(-100, 100))
def test_affine_invariance(problem, a, b):
    z, y = problem
    base = f_scores(z, y).f_scores
    moved = f_scores(a * z + b, y).f_scores
    np.testing.assert_allclose(moved, base, rtol=1e-9)


def test_label_shuffle_gives_null_mean():
    rng = np.random.default_rng(0)
    z = rng.standard_normal((600, 300))
    y = rng.permutation(np.tile([1, 2, 3], 200))
    assert 0.5 <= f_scores(z, y).mean_f <= 2.0


@settings(max_examples=60, deadline=None)
@given(problems(max_k=30), st.floats(0.05, 5), st.floats(0.05, 5), st.integers(0, 2**16))
def test_pass_set_monotone_in_divider(problem, d1, d2, seed):
    z, y = problem
    d1, d2 = sorted((d1, d2))
    fs = f_scores(z, y, d1)
    s = np.random.default_rng(seed).choice(z.shape[1], size=z.shape[1] // 2 + 1, replace=False)
    small, large = fs.passing(), fs.with_divider(d2).passing()
    assert set(small) <= set(large)
    sel = select_hiervar(fs, s)
    assert set(sel.final_set) <= set(sel.erocket_set)
    assert set(sel.final_set) == set(s) & set(sel.fscore_pass)
    counts = [c for _, c in d_sweep(fs, s, [d1, d2])]
    assert counts[0] <= counts[1]


def test_intersection_example():
    sel = select_hiervar(scores_vector([0, 10, 10, 10]), [0, 1])
    assert sel.fscore_pass.tolist() == [1, 2, 3]
    assert sel.final_set.tolist() == [1]
    assert sel.n_features == 4


def test_vacuous_and_empty_selections():
    # mu = 4 over the finite entries, threshold 2: every feature passes
    fs = scores_vector([3.0, 4.0, 5.0, np.inf])
    assert fs.threshold == 2.0
    assert select_hiervar(fs, range(4)).final_set.tolist() == [0, 1, 2, 3]
    empty = select_hiervar(fs, [])
    assert empty.final_set.size == 0 and empty.reduction_ratio == 1.0


def test_strict_inequality():
    sel = select_hiervar(scores_vector([2.0, 2.0], d=1.0), [0, 1])
    assert sel.final_set.size == 0


def test_selection_index_errors():
    with pytest.raises(ConfigurationError):
        select_hiervar(scores_vector([1.0, 2.0]), [2])
    with pytest.raises(ConfigurationError):
        select_hiervar(scores_vector([1.0, 2.0]), [-1])


def test_input_errors():
    with pytest.raises(DegenerateLabelsError):
        f_scores(np.ones((3, 2)), [1, 1, 1])
    with pytest.raises(DegenerateLabelsError):
        f_scores(np.ones((2, 2)), [1, 2])
    with pytest.raises(ConfigurationError):
        f_scores(np.ones((4, 2)), [1, 1, 2, 2], d=0)


def test_apply_selection():
    z = np.arange(12.0).reshape(4, 3)
    np.testing.assert_array_equal(apply_selection(z, [0, 1, 2]).values, z)
    np.testing.assert_array_equal(apply_selection(z, [1]).values, z[:, [1]])
    assert apply_selection(z, []).values.shape == (4, 0)
    with pytest.raises(ConfigurationError):
        apply_selection(z, [3])


def test_apply_selection_positional_oracle():
    rng = np.random.default_rng(1)
    fm = FeatureMatrix(rng.standard_normal((9, 40)), provenance="abc")
    idx = rng.choice(40, 13, replace=False)
    out = apply_selection(fm, idx)
    assert out.provenance == "abc"
    for new_col, src in enumerate(sorted(idx)):
        for n in range(9):
            assert out.values[n, new_col] == fm.values[n, src]


def test_fscore_csv_sorted_descending():
    fs = f_scores(np.array([[0, 1, 1.0], [0, 2, 2], [1, 4, 2.5], [1, 6, 2.6]]), [1, 1, 2, 2])
    buf = io.StringIO()
    write_fscore_csv(buf, fs, [0, 2])
    rows = [ln.split(",") for ln in buf.getvalue().splitlines()]
    assert rows[0] == ["rank", "feature_index", "f_score", "erocket_selected", "above_threshold"]
    assert rows[1][1:3] == ["0", "inf"]
    values = [float(r[2]) for r in rows[1:]]
    assert values == sorted(values, reverse=True)
    assert {r[1]: r[3] for r in rows[1:]} == {"0": "1", "1": "0", "2": "1"}
