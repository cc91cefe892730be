import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gegdyn import spectral
from gegdyn.spectral import Definiteness, Stability


def sorted_vals(v):
    v = np.asarray(v, dtype=complex)
    return v[np.lexsort((v.imag, v.real))]


def test_rotation_matrix():
    s = spectral.eigenvalues([[0.0, -1.0], [1.0, 0.0]])
    assert sorted(s.eigenvalues, key=lambda v: v.imag) == [-1j, 1j]
    assert s.spectral_radius == 1.0
    assert s.method == "closed-form"


def test_example_matrix():
    s = spectral.eigenvalues([[0.919, -0.09], [0.09, 0.919]])
    np.testing.assert_allclose(sorted_vals(s.eigenvalues), [0.919 - 0.09j, 0.919 + 0.09j], atol=1e-15)
    assert 0.9233 < s.spectral_radius < 0.9240


@pytest.mark.parametrize("d", [1, 2, 3, 7, 20])
def test_identity(d):
    s = spectral.eigenvalues(np.eye(d))
    np.testing.assert_allclose(s.eigenvalues, np.ones(d), atol=1e-15)


def test_scalar_and_triangular():
    assert spectral.eigenvalues([[3.5]]).eigenvalues[0] == 3.5
    t = np.triu(np.arange(1.0, 17.0).reshape(4, 4))
    np.testing.assert_allclose(sorted(spectral.eigenvalues(t).eigenvalues.real), [1.0, 6.0, 11.0, 16.0])


def test_small_root_no_cancellation():
    # eigenvalues 1e8 and 1e-8: the naive quadratic formula loses the small one
    a = np.diag([1e8, 1e-8])
    a[0, 1] = 1.0
    vals = sorted(spectral.eigenvalues(a).eigenvalues.real)
    assert vals[0] == pytest.approx(1e-8, rel=1e-12)


def test_defective_and_companion():
    # companion matrix of (x-1)(x-2)(x-3)(x+4)
    c = np.poly([1.0, 2.0, 3.0, -4.0])
    comp = np.zeros((4, 4))
    comp[0] = -c[1:]
    comp[1:, :3] = np.eye(3)
    np.testing.assert_allclose(sorted(spectral.eigenvalues(comp).eigenvalues.real), [-4, 1, 2, 3], atol=1e-10)
    jordan = np.eye(3) * 2.0 + np.diag([1.0, 1.0], 1)
    np.testing.assert_allclose(spectral.eigenvalues(jordan).eigenvalues, 2.0, atol=1e-4)


def test_errors():
    with pytest.raises(ValueError):
        spectral.eigenvalues(np.zeros((2, 3)))
    with pytest.raises(ValueError, match="non-finite"):
        spectral.eigenvalues([[np.nan, 0.0], [0.0, 1.0]])
    with pytest.raises(spectral.CapacityError):
        spectral.eigenvalues(np.eye(501))


def test_nonconvergence_names_matrix(monkeypatch):
    monkeypatch.setattr(spectral._backend, "hqr_eigenvalues", lambda h: (None, None, False))
    with pytest.raises(spectral.EigenConvergenceError, match="J_test"):
        spectral.eigenvalues(np.arange(9.0).reshape(3, 3), name="J_test")


def random_matrices(count=200, dmax=50, seed=0):
    rng = np.random.default_rng(seed)
    for _ in range(count):
        d = int(rng.integers(1, dmax + 1))
        yield rng.normal(size=(d, d))


def test_matches_reference_solver():
    # numpy's LAPACK driver serves as an independent oracle
    for a in random_matrices():
        ours = spectral.eigenvalues(a).eigenvalues
        assert spectral.match_distance(ours, np.linalg.eigvals(a)) < 1e-8 * max(1.0, np.abs(a).max())


def test_trace_determinant_and_characteristic_residual():
    for a in random_matrices():
        s = spectral.eigenvalues(a)
        lam = s.eigenvalues
        d = a.shape[0]
        tr = np.trace(a)
        assert abs(lam.sum() - tr) <= 1e-8 * max(1.0, abs(tr), np.abs(a).sum() / d)
        det = np.linalg.det(a)
        assert abs(np.prod(lam) - det) <= 1e-6 * max(abs(det), 1e-300) + 1e-12
        norm = np.linalg.norm(a, 2)
        for val in lam:
            res = abs(np.linalg.det(a - val * np.eye(d)))
            assert res <= 1e-6 * norm ** d


def test_conjugate_pairs():
    for a in random_matrices(50, 30, seed=1):
        lam = spectral.eigenvalues(a).eigenvalues
        cplx = lam[np.abs(lam.imag) > 1e-10]
        assert spectral.match_distance(cplx, np.conj(cplx)) <= 1e-10


def test_similarity_invariance():
    rng = np.random.default_rng(5)
    for _ in range(30):
        d = int(rng.integers(2, 15))
        a = rng.normal(size=(d, d))
        q, _ = np.linalg.qr(rng.normal(size=(d, d)))
        p = q @ np.diag(rng.uniform(0.5, 2.0, size=d))
        b = np.linalg.solve(p, a @ p)
        assert spectral.match_distance(spectral.eigenvalues(a).eigenvalues,
                                       spectral.eigenvalues(b).eigenvalues) < 1e-6


def test_badly_scaled_matrix_balancing():
    rng = np.random.default_rng(9)
    a = rng.normal(size=(8, 8))
    s = np.diag(10.0 ** np.arange(-4, 4))
    b = s @ a @ np.linalg.inv(s)
    assert spectral.match_distance(spectral.eigenvalues(b).eigenvalues, np.linalg.eigvals(a)) < 1e-8


def test_classify_examples():
    assert spectral.classify(0.9234).stability is Stability.ASYMPTOTICALLY_STABLE
    assert spectral.classify(1.0).stability is Stability.INCONCLUSIVE
    assert spectral.classify(1.2).stability is Stability.UNSTABLE
    assert spectral.classify(1.0 - 5e-10).stability is Stability.INCONCLUSIVE
    assert spectral.classify(1.0 + 5e-10).stability is Stability.INCONCLUSIVE
    c = spectral.classify(spectral.eigenvalues([[0.5, 0.0], [0.0, -0.25]]))
    assert c.stable and c.margin == 0.5 and c.spectral_radius == 0.5
    with pytest.raises(ValueError):
        spectral.classify(0.5, tol_unit=0.0)


_ORDER = {Stability.ASYMPTOTICALLY_STABLE: 0, Stability.INCONCLUSIVE: 1, Stability.UNSTABLE: 2}


@settings(max_examples=200, deadline=None)
@given(st.floats(0.0, 3.0), st.floats(0.0, 3.0))
def test_classify_monotone(r1, r2):
    lo, hi = sorted((r1, r2))
    assert _ORDER[spectral.classify(lo).stability] <= _ORDER[spectral.classify(hi).stability]


@pytest.mark.parametrize("matrix, verdict", [
    ([[-0.5, 0.6], [0.6, -1.0]], Definiteness.NEG_DEF),
    ([[-0.25]], Definiteness.NEG_DEF),
    (np.zeros((2, 2)), Definiteness.SEMIDEF_BOTH),
    (np.diag([1.0, 2.0]), Definiteness.POS_DEF),
    (np.diag([1.0, 0.0]), Definiteness.POS_SEMIDEF),
    (np.diag([-1.0, 0.0]), Definiteness.NEG_SEMIDEF),
    (np.diag([-1.0, 1.0]), Definiteness.INDEFINITE),
])
def test_definiteness(matrix, verdict):
    assert spectral.symmetric_definiteness(matrix) is verdict


def test_definiteness_lattice():
    assert Definiteness.SEMIDEF_BOTH.is_psd and Definiteness.SEMIDEF_BOTH.is_nsd
    assert not Definiteness.POS_DEF.is_nsd
    assert not spectral.symmetric_definiteness([[-0.5, 0.6], [0.6, -1.0]]).is_psd


def test_definiteness_rejects_asymmetric():
    with pytest.raises(ValueError, match="symmetric"):
        spectral.symmetric_definiteness([[1.0, 2.0], [0.0, 1.0]])


def test_match_distance():
    assert spectral.match_distance([1, 2j], [2j, 1 + 1e-3]) == pytest.approx(1e-3)
    assert spectral.match_distance([], []) == 0.0
    with pytest.raises(ValueError):
        spectral.match_distance([1], [1, 2])


def test_closed_form_bilinear():
    vals = spectral.closed_form_bilinear(0.9, 1.0, 0.1)
    np.testing.assert_allclose(sorted_vals(vals), [0.919 - 0.09j, 0.919 + 0.09j], atol=1e-15)


def test_pairs_for_json():
    assert spectral.eigenvalues([[0.0, -2.0], [2.0, 0.0]]).pairs() == [[0.0, 2.0], [0.0, -2.0]]
