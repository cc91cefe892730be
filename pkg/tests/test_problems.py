import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gegdyn import finite_diff, problems
from gegdyn.problems import DataError

coords = st.floats(-3.0, 3.0, allow_nan=False)


def multi_reference(x, y):
    # written out independently of _poly2d
    f1 = -x * x / 8 - y * y / 2 + 0.6 * x * y
    f2 = x * x / 2 + y * y / 2 + 4 * x * y
    return f1 * (x - 1) ** 2 * (y - 1) ** 2 + f2 * x * x * y * y


def test_builtin_values():
    assert problems.builtin("bilinear_xy").eval(np.array([2.0, 3.0])) == 6.0
    q = problems.builtin("quadratic_counterexample")
    assert q.eval(np.array([1.0, 2.0])) == pytest.approx(-0.1 - 0.5 * 4 + 0.5 * 2)
    m = problems.builtin("multi_critical")
    for x, y in [(0.3, -0.7), (2.0, 1.5), (-4.0, 0.5)]:
        assert m.eval(np.array([x, y])) == pytest.approx(multi_reference(x, y), rel=1e-13)


def test_unknown_builtin():
    with pytest.raises(KeyError, match="unknown builtin"):
        problems.builtin("nope")


def test_lipschitz_hints():
    assert problems.builtin("bilinear_xy").lipschitz_hint == 1.0
    assert problems.builtin("quadratic_counterexample").lipschitz_hint == 1.25
    assert problems.builtin("multi_critical").lipschitz_hint is None


def test_counterexample_lipschitz_is_hessian_norm():
    h = problems.builtin("quadratic_counterexample").hessian(np.zeros(2))
    assert np.max(np.abs(np.linalg.eigvalsh(h))) <= 1.25


def test_multi_hessian_at_origin_by_hand(multi):
    # near the origin (x-1)^2 (y-1)^2 -> 1, so the Hessian is that of f1
    h = multi.hessian(np.zeros(2))
    np.testing.assert_allclose(h, [[-0.25, 0.6], [0.6, -1.0]], atol=1e-15)


@settings(max_examples=60, deadline=None)
@given(coords, coords)
def test_multi_gradient_matches_finite_differences(x, y):
    m = problems.builtin("multi_critical")
    z = np.array([x, y])
    fd = finite_diff.gradient(m.eval, z)
    assert finite_diff.relative_error(m.gradient(z), fd) < 1e-7


@settings(max_examples=60, deadline=None)
@given(coords, coords)
def test_multi_hessian_matches_finite_differences(x, y):
    m = problems.builtin("multi_critical")
    z = np.array([x, y])
    fd = finite_diff.jacobian(m.gradient, z)
    assert finite_diff.relative_error(m.hessian(z), fd) < 1e-6


def test_quadratic_factory(rng):
    a = rng.normal(size=(5, 5))
    q = a + a.T
    p = problems.quadratic(q, 2, 3)
    z = rng.normal(size=5)
    assert p.eval(z) == pytest.approx(0.5 * z @ q @ z)
    np.testing.assert_allclose(p.gradient(z), q @ z)
    np.testing.assert_allclose(p.hessian(z), q)
    assert p.quadratic and p.kernel is None
    two = problems.quadratic([[1.0, 2.0], [2.0, -3.0]], 1, 1)
    assert two.kernel is not None
    np.testing.assert_allclose(two.gradient(np.array([1.0, 1.0])), [3.0, -1.0])


def test_quadratic_rejects_bad_shapes():
    with pytest.raises(ValueError):
        problems.quadratic(np.eye(3), 1, 1)
    with pytest.raises(ValueError):
        problems.quadratic([[0.0, 1.0], [0.0, 0.0]], 1, 1)


def test_hessian_fallbacks():
    f = lambda z: z[0] ** 3 + z[0] * z[1] ** 2
    p = problems.MinMaxProblem(1, 1, f)
    z = np.array([0.5, -1.5])
    np.testing.assert_allclose(p.gradient(z), [3 * 0.25 + 2.25, 2 * 0.5 * -1.5], rtol=1e-8)
    np.testing.assert_allclose(p.hessian(z), [[3.0, -3.0], [-3.0, 1.0]], atol=1e-5)


def test_parameter_count():
    assert problems.parameter_count(30, 50) == 31 * 50 + 51
    assert problems.parameter_count(1, 1) == 4


def test_erm_instance_split_and_standardization():
    x, y = problems.synthetic_blobs(100, 4, seed=3)
    inst = problems.erm_from_arrays(x, y, hidden_width=5, alpha=0.5, seed=1)
    assert inst.m == 80
    assert inst.test_index.size == 20
    assert set(inst.train_index) | set(inst.test_index) == set(range(100))
    np.testing.assert_allclose(inst.features.mean(axis=0), 0.0, atol=1e-12)
    np.testing.assert_allclose(inst.features.std(axis=0), 1.0, atol=1e-12)
    assert inst.theta0.size == inst.n_params


def test_erm_constant_feature_column():
    x, y = problems.synthetic_blobs(20, 3, seed=0)
    x[:, 1] = 7.0
    inst = problems.erm_from_arrays(x, y, hidden_width=3)
    assert np.all(inst.features[:, 1] == 0.0)


def test_erm_determinism():
    x, y = problems.synthetic_blobs(50, 3, seed=2)
    a = problems.erm_from_arrays(x, y, 4, seed=9)
    b = problems.erm_from_arrays(x, y, 4, seed=9)
    np.testing.assert_array_equal(a.theta0, b.theta0)
    np.testing.assert_array_equal(a.train_index, b.train_index)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_erm_gradient_matches_finite_differences(seed):
    x, y = problems.synthetic_blobs(40, 5, seed=seed)
    inst = problems.erm_from_arrays(x, y, hidden_width=7, alpha=1.0, seed=seed)
    prob = problems.erm_objective(inst)
    rng = np.random.default_rng(seed)
    z = problems.erm_start(inst, prob.m) + 0.05 * rng.normal(size=prob.dim)
    fd = finite_diff.gradient(prob.eval, z)
    assert finite_diff.relative_error(prob.gradient(z), fd) < 1e-6


def test_erm_objective_value_by_hand():
    x, y = problems.synthetic_blobs(10, 2, seed=0)
    inst = problems.erm_from_arrays(x, y, hidden_width=2, alpha=2.0)
    prob = problems.erm_objective(inst)
    theta = np.zeros(prob.n)
    p = np.full(prob.m, 0.25)
    # zero weights: every prediction is 1/2, so each loss is log 2
    expect = 0.25 * prob.m * np.log(2.0) - 2.0 * prob.m * (0.25 - 1.0 / prob.m) ** 2
    assert prob.eval(np.concatenate([theta, p])) == pytest.approx(expect)


def test_erm_start_is_uniform():
    x, y = problems.synthetic_blobs(30, 2, seed=0)
    inst = problems.erm_from_arrays(x, y, 3)
    z0 = problems.erm_start(inst, inst.m)
    assert np.allclose(z0[inst.n_params:], 1.0 / inst.m)


def test_load_erm_from_csv(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text(problems.blobs_csv(30, 3, seed=1))
    inst = problems.load_erm(path, hidden_width=4)
    assert inst.v == 3 and inst.features.shape[0] == 30
    inst2 = problems.load_erm(io.StringIO(problems.blobs_csv(30, 3, seed=1)), hidden_width=4)
    np.testing.assert_array_equal(inst.features, inst2.features)


def test_load_erm_custom_label_column():
    text = "target,a,b\n" + "".join(f"{i % 2},{i},{i * i}\n" for i in range(12))
    inst = problems.load_erm(io.StringIO(text), hidden_width=2, label_column="target")
    assert inst.v == 2


@pytest.mark.parametrize("text, message", [
    ("a,b\n" + "1,2\n" * 12, "missing label column"),
    ("a,label\n" + "1,0\n" * 5, "at least"),
    ("a,label\n" + "1,0\n" * 11 + "x,1\n", "non-numeric"),
    ("a,label\n" + "1,0\n" * 11 + "1,2\n", "not 0 or 1"),
    ("a,label\n" + "1,0\n" * 11 + "1\n", "expected 2 cells"),
    ("", "empty"),
])
def test_load_erm_errors(text, message):
    with pytest.raises(DataError, match=message):
        problems.load_erm(io.StringIO(text))


def test_erm_counts_small_network():
    x, y = problems.synthetic_blobs(10, 2, seed=0)
    inst = problems.erm_from_arrays(x, y, hidden_width=1)
    assert inst.n_params == 5
    assert inst.m == 8


def test_erm_full_scale_parameter_count():
    assert problems.parameter_count(30, 50) == 1601
    assert round(0.8 * 569) == 455


def test_erm_single_point_objective():
    x, y = problems.synthetic_blobs(10, 2, seed=0)
    inst = problems.erm_from_arrays(x, y, hidden_width=3, alpha=1.0)
    row = int(np.flatnonzero(inst.labels == 1.0)[0])
    prob = problems.erm_objective(inst, rows=[row])
    z = np.concatenate([np.zeros(prob.n), [1.0]])
    assert prob.eval(z) == pytest.approx(-np.log(0.5), rel=1e-14)


def test_erm_uniform_weights_zero_regulariser():
    x, y = problems.synthetic_blobs(20, 2, seed=4)
    a = problems.erm_from_arrays(x, y, hidden_width=3, alpha=1.0)
    b = problems.erm_from_arrays(x, y, hidden_width=3, alpha=50.0)
    za = problems.erm_start(a, a.m)
    assert problems.erm_objective(a).eval(za) == pytest.approx(problems.erm_objective(b).eval(za), rel=1e-14)


def test_erm_permutation_invariance(rng):
    x, y = problems.synthetic_blobs(30, 3, seed=5)
    inst = problems.erm_from_arrays(x, y, hidden_width=4)
    rows = inst.train_index
    perm = rng.permutation(rows.size)
    pa = problems.erm_objective(inst, rows)
    pb = problems.erm_objective(inst, rows[perm])
    theta = inst.theta0
    p = rng.uniform(0.0, 0.1, size=rows.size)
    assert pa.eval(np.concatenate([theta, p])) == pytest.approx(pb.eval(np.concatenate([theta, p[perm]])),
                                                                rel=1e-12)


def test_builtin_examples():
    assert problems.builtin("bilinear_xy").eval(np.array([1.0, 1.0])) == 1.0
    assert problems.builtin("multi_critical").eval(np.zeros(2)) == 0.0


@pytest.mark.parametrize("name", problems.BUILTIN_NAMES)
def test_builtin_derivatives_on_random_points(name):
    prob = problems.builtin(name)
    pts = np.random.default_rng(11).uniform(-2.0, 2.0, size=(100, 2))
    gerr = max(finite_diff.relative_error(prob.gradient(z), finite_diff.gradient(prob.eval, z)) for z in pts)
    herr = max(finite_diff.relative_error(prob.hessian(z), finite_diff.jacobian(prob.gradient, z)) for z in pts)
    assert gerr <= 1e-5
    assert herr <= 1e-4
    for z in pts[:10]:
        h = prob.hessian(z)
        assert np.abs(h - h.T).max() <= 1e-10


def test_printed_f1_coefficient_moves_the_origin_verdict():
    # with f1's x^2 coefficient as printed, the origin's Hessian block is -0.5
    p = problems.multi_critical(problems.MULTI_F1_PRINTED)
    np.testing.assert_allclose(p.hessian(np.zeros(2)), [[-0.5, 0.6], [0.6, -1.0]], atol=1e-15)
