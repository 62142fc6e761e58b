import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from potts_sdpi.potts_core import (
    DomainError,
    PottsChannel,
    apply_channel,
    as_prob_vector,
    b_p_curve,
    binary_asymmetric_matrix,
    coloring_matrix,
    dirichlet_form,
    dirichlet_r,
    entropy,
    entropy_form,
    is_potts,
    kl,
    kl_displacement,
    kl_h,
    nlsi_dirichlet,
    potts_matrix,
    psi,
    psi_derivatives,
    psi_inv_right,
    psi_scalar,
    reverse_channel,
    s_lambda_curve,
    skl,
    skl_displacement,
    stationary_distribution,
    uniform,
    xi,
    xi_1,
    xi_p,
    xi_second_derivative_at_uniform,
)

mp.mp.dps = 40


def psi_mp(k, x):
    x = mp.mpf(x)
    out = mp.log(k)
    if x > 0:
        out += x * mp.log(x)
    if x < 1:
        out += (1 - x) * mp.log((1 - x) / (k - 1))
    return out


def dirichlet_mp(k, f, g):
    f = [mp.mpf(v) for v in f]
    g = [mp.mpf(v) for v in g]
    return -sum(f) * sum(g) / (k * (k - 1)) + sum(a * b for a, b in zip(f, g)) / (k - 1)


def two_valued(k, x):
    P = np.full(k, (1 - x) / (k - 1))
    P[0] = x
    return P


# ---------------------------------------------------------------------------
# channels
# ---------------------------------------------------------------------------

def test_potts_matrix_entries():
    M = potts_matrix(4, 0.3)
    assert np.allclose(np.diag(M), 0.25 + 3 * 0.3 / 4)
    assert np.allclose(M[0, 1:], 0.7 / 4)
    assert np.allclose(M.sum(axis=1), 1, atol=1e-12)


def test_lambda_out_of_range_rejected():
    with pytest.raises(DomainError):
        PottsChannel(3, -0.6)
    with pytest.raises(DomainError):
        potts_matrix(3, 1.2)
    with pytest.raises(DomainError):
        PottsChannel(1, 0.5)


def test_semigroup_constructor():
    ch = PottsChannel.from_time(3, 0.7)
    assert ch.lam == pytest.approx(math.exp(-3 * 0.7 / 2))
    assert PottsChannel.from_time(5, 0.0).lam == 1.0
    with pytest.raises(DomainError):
        PottsChannel.from_time(3, -1)


def test_semigroup_property():
    a = PottsChannel.from_time(4, 0.2).matrix()
    b = PottsChannel.from_time(4, 0.5).matrix()
    c = PottsChannel.from_time(4, 0.7).matrix()
    assert np.allclose(a @ b, c, atol=1e-14)


def test_coloring_matrix():
    M = coloring_matrix(3)
    assert M[0].tolist() == [0.0, 0.5, 0.5]
    assert np.allclose(M, potts_matrix(3, -0.5), atol=1e-15)
    assert PottsChannel.coloring(3).lam == -0.5


def test_apply_channel_trivial_cases():
    P = np.array([0.2, 0.5, 0.3])
    assert np.allclose(apply_channel(potts_matrix(3, 1), P), P)
    assert np.allclose(apply_channel(potts_matrix(3, 0), P), uniform(3))
    with pytest.raises(DomainError):
        apply_channel(potts_matrix(3, 0.5), [0.5, 0.5])


def test_stationary_and_reverse_binary_asymmetric():
    M = binary_asymmetric_matrix(0.3, 0.2)
    q = stationary_distribution(M)
    assert np.allclose(q, [0.4, 0.6], atol=1e-12)
    assert np.allclose(reverse_channel(M, q), M, atol=1e-12)


def test_reverse_of_potts_is_itself():
    for k, lam in [(3, 0.4), (5, -0.25), (4, 1.0)]:
        M = potts_matrix(k, lam)
        assert np.allclose(reverse_channel(M, uniform(k)), M, atol=1e-14)


def test_reverse_channel_detailed_balance():
    rng = np.random.default_rng(3)
    M = rng.dirichlet(np.ones(4), size=4)
    q = stationary_distribution(M)
    R = reverse_channel(M, q)
    assert np.allclose(q[:, None] * M, (q[:, None] * R).T, atol=1e-12)
    assert np.allclose(R.sum(axis=1), 1)


def test_reverse_channel_rejects_non_stationary():
    with pytest.raises(DomainError):
        reverse_channel(binary_asymmetric_matrix(0.3, 0.2), [0.5, 0.5])


def test_reverse_channel_zero_mass_rows_use_qstar():
    M = np.array([[1.0, 0.0, 0.0], [0.5, 0.5, 0.0], [0.2, 0.3, 0.5]])
    q = stationary_distribution(M)
    assert np.allclose(q, [1, 0, 0], atol=1e-9)
    R = reverse_channel(M, q)
    assert np.allclose(R[1], q) and np.allclose(R[2], q)


def test_stationary_distribution_reducible_chain():
    M = np.array([[1.0, 0.0], [0.0, 1.0]])
    q = stationary_distribution(M)
    assert np.allclose(q @ M, q) and q.sum() == pytest.approx(1)


def test_is_potts():
    assert is_potts(potts_matrix(4, 0.3)) == pytest.approx(0.3)
    assert is_potts(coloring_matrix(5)) == pytest.approx(-0.25)
    assert is_potts(binary_asymmetric_matrix(0.3, 0.2)) is None


def test_prob_vector_validation():
    with pytest.raises(DomainError):
        as_prob_vector([0.5, 0.6])
    with pytest.raises(DomainError):
        as_prob_vector([1.5, -0.5])


# ---------------------------------------------------------------------------
# psi
# ---------------------------------------------------------------------------

def test_psi_examples():
    assert psi(3, 1 / 3) == pytest.approx(0, abs=1e-16)
    assert psi(3, 1.0) == pytest.approx(math.log(3), rel=1e-15)
    # high-precision value (the commonly quoted 0.1308123 is a rounding slip)
    assert psi(2, 0.75) == pytest.approx(0.13081203594113697, rel=1e-14)
    assert psi(2, 0.75) == pytest.approx(float(psi_mp(2, 0.75)), rel=1e-14)


def test_psi_matches_high_precision():
    rng = np.random.default_rng(0)
    for _ in range(200):
        k = int(rng.integers(2, 40))
        x = float(rng.uniform())
        ref = float(psi_mp(k, x))
        assert psi(k, x) == pytest.approx(ref, rel=1e-12, abs=1e-300)
        assert psi_scalar(k, x) == pytest.approx(ref, rel=1e-12, abs=1e-300)


def test_psi_relative_accuracy_near_uniform_point():
    for k in (2, 3, 10):
        for dx in (1e-3, 1e-5, 1e-7):
            x = 1 / k + dx
            t = mp.mpf(k) * mp.mpf(x) - 1
            ref = float(psi_mp(k, mp.mpf(1) / k + t / k))
            assert psi(k, x) == pytest.approx(ref, rel=1e-9)


def test_psi_domain():
    with pytest.raises(DomainError):
        psi(3, 1.1)
    with pytest.raises(DomainError):
        psi(1, 0.5)


@pytest.mark.parametrize("k", [2, 3, 7, 20, 50])
def test_psi_shape(k):
    x = np.linspace(0, 1, 1000)
    v = psi(k, x)
    assert np.all(v >= 0) and np.all(v <= math.log(k) + 1e-15)
    assert np.all(np.diff(v, 2) >= -1e-12)
    left = x <= 1 / k
    assert np.all(np.diff(v[left]) <= 1e-15)
    assert np.all(np.diff(v[~left]) >= -1e-15)


def test_psi_is_kl_to_uniform():
    rng = np.random.default_rng(1)
    for _ in range(100):
        k = int(rng.integers(2, 12))
        x = float(rng.uniform())
        assert kl(two_valued(k, x), uniform(k)) == pytest.approx(psi(k, x), abs=1e-12)


def test_psi_derivatives_at_uniform():
    d1, d2 = psi_derivatives(3, 1 / 3)
    assert d1 == pytest.approx(0, abs=1e-15)
    assert d2 == pytest.approx(4.5)
    for k in (2, 5, 9):
        assert psi_derivatives(k, 1 / k)[1] == pytest.approx(k * k / (k - 1))


def test_psi_derivatives_match_finite_differences():
    h = 1e-5
    for k in (2, 4, 9):
        for x in np.linspace(0.01, 0.99, 25):
            d1, d2 = psi_derivatives(k, x)
            fd1 = (psi(k, x + h) - psi(k, x - h)) / (2 * h)
            fd2 = float(mp.diff(lambda t: psi_mp(k, t), x, 2))
            assert d1 == pytest.approx(fd1, rel=1e-5, abs=1e-9)
            assert d2 == pytest.approx(fd2, rel=1e-5)
    with pytest.raises(DomainError):
        psi_derivatives(3, 0.0)


def test_psi_inv_right_examples():
    assert psi_inv_right(3, 0.0) == pytest.approx(1 / 3, abs=1e-15)
    assert psi_inv_right(3, math.log(3)) == 1.0
    assert psi_inv_right(2, 0.13081203594113697) == pytest.approx(0.75, abs=1e-12)
    with pytest.raises(DomainError):
        psi_inv_right(3, 2.0)


@settings(max_examples=300, deadline=None)
@given(st.integers(2, 30), st.floats(0, 1))
def test_psi_inv_right_roundtrip(k, u):
    x = 1 / k + u * (1 - 1 / k)
    y = psi(k, x)
    back = psi_inv_right(k, y)
    # compare in y: x is ill-conditioned where psi is flat
    assert psi(k, back) == pytest.approx(y, rel=1e-12, abs=1e-15)
    if u > 1e-3:
        assert back == pytest.approx(x, abs=1e-11)


# ---------------------------------------------------------------------------
# xi and the curves
# ---------------------------------------------------------------------------

def test_xi_examples():
    assert xi_p(3, 2, 1 / 3) == pytest.approx(0, abs=1e-15)
    assert xi_p(3, 2, 1.0) == pytest.approx(1.0, rel=1e-14)
    assert xi_1(3, 1 / 3) == pytest.approx(0, abs=1e-15)
    assert xi_1(3, 0.0) == math.inf and xi_1(3, 1.0) == math.inf
    with pytest.raises(DomainError):
        xi_p(3, 1.0, 0.5)


def test_xi_1_high_precision():
    k, x = 3, mp.mpf("0.5")
    f = [k * x] + [k * (1 - x) / (k - 1)] * (k - 1)
    ref = dirichlet_mp(k, f, [mp.log(v) for v in f])
    assert xi_1(3, 0.5) == pytest.approx(float(ref), rel=1e-14)


@pytest.mark.parametrize("k", [2, 3, 6])
@pytest.mark.parametrize("p", [1.0, 1.5, 2.0, 4.0])
def test_xi_equals_dirichlet_form_on_two_valued_family(k, p):
    for x in np.linspace(0.02, 0.98, 17):
        f = k * two_valued(k, x)
        assert xi(k, p, x) == pytest.approx(nlsi_dirichlet(k, f, p), rel=1e-12, abs=1e-15)


@pytest.mark.parametrize("k", [2, 3, 5, 8])
@pytest.mark.parametrize("p", [1.0, 1.5, 2.0, 3.0])
def test_xi_curvature_at_uniform(k, p):
    r = 1 / mp.mpf(p)

    def xi_mp(x):
        f = [k * x] + [k * (1 - x) / (k - 1)] * (k - 1)
        if p == 1:
            return dirichlet_mp(k, f, [mp.log(v) for v in f])
        return dirichlet_mp(k, [v ** r for v in f], [v ** (1 - r) for v in f])

    ref = mp.diff(xi_mp, mp.mpf(1) / k, 2)
    assert xi_second_derivative_at_uniform(k, p) == pytest.approx(float(ref), rel=1e-10)


def test_b_p_curve_examples():
    b2 = b_p_curve(3, 2)
    assert b2(math.log(3)) == pytest.approx(1.0)
    b1 = b_p_curve(3, 1)
    assert b1(0.0) == pytest.approx(0, abs=1e-30)
    assert b1(math.log(3)) == math.inf
    # divergence at log k is only logarithmic in 1 - x
    assert xi_1(3, 1 - 1e-8) == pytest.approx(math.log(2e8), rel=0.01)
    ys = np.linspace(0, math.log(3), 50)[1:-1]
    assert np.all(np.diff(b1(ys)) > 0)


def test_s_lambda_examples():
    y = np.linspace(0, math.log(3), 101)
    assert np.allclose(s_lambda_curve(3, 1.0)(y), y, atol=1e-12)
    assert np.allclose(s_lambda_curve(3, 0.0)(y), 0, atol=1e-15)
    assert s_lambda_curve(3, -0.5)(math.log(3)) == pytest.approx(math.log(3) - math.log(2))


@pytest.mark.parametrize("k,lam", [(2, 0.6), (3, -0.5), (3, 0.3), (5, 0.9), (5, -0.1)])
def test_s_lambda_bounds_and_monotone(k, lam):
    y = np.linspace(0, math.log(k), 2001)
    s = s_lambda_curve(k, lam)(y)
    assert np.all(s >= 0) and np.all(s <= y + 1e-12)
    assert np.all(np.diff(s) >= -1e-13)


def test_curves_reject_out_of_domain():
    with pytest.raises(DomainError):
        s_lambda_curve(3, 0.5)(2.0)


# ---------------------------------------------------------------------------
# divergences
# ---------------------------------------------------------------------------

def test_kl_and_skl_examples():
    assert kl(uniform(3), uniform(3)) == 0.0
    assert kl(two_valued(3, 0.8), uniform(3)) == pytest.approx(psi(3, 0.8), abs=1e-12)
    assert skl([0.7, 0.3], [0.3, 0.7]) == pytest.approx(0.8 * math.log(7 / 3), rel=1e-14)
    assert kl([0.5, 0.5], [1.0, 0.0]) == math.inf
    assert entropy(uniform(4)) == pytest.approx(math.log(4))


def test_kl_h_series_branch_matches_direct():
    t = np.array([-0.5, -0.0099, -1e-6, 0.0, 1e-6, 0.0099, 0.5, 3.0])
    direct = np.array([float((1 + v) * mp.log1p(v) - v) for v in map(mp.mpf, t.tolist())])
    assert np.allclose(kl_h(t), direct, rtol=1e-13, atol=1e-300)
    assert kl_h(-1.0) == 1.0


@settings(max_examples=200, deadline=None)
@given(st.integers(2, 6), st.integers(0, 2 ** 32 - 1))
def test_displacement_divergences_match_direct(k, seed):
    rng = np.random.default_rng(seed)
    P, Q = rng.dirichlet(np.ones(k), 2)
    assert kl_displacement(Q, P - Q) == pytest.approx(kl(P, Q), rel=1e-10, abs=1e-14)
    assert skl_displacement(Q, P - Q) == pytest.approx(skl(P, Q), rel=1e-10, abs=1e-14)


@settings(max_examples=200, deadline=None)
@given(st.integers(2, 6), st.floats(-1, 1), st.integers(0, 2 ** 32 - 1))
def test_data_processing(k, u, seed):
    lam = u if u >= 0 else u / (k - 1)
    rng = np.random.default_rng(seed)
    P, Q = rng.dirichlet(np.ones(k), 2)
    M = potts_matrix(k, lam)
    assert kl(P @ M, Q @ M) <= kl(P, Q) + 1e-12


# ---------------------------------------------------------------------------
# Dirichlet forms
# ---------------------------------------------------------------------------

def test_dirichlet_form_examples():
    assert dirichlet_form(3, np.ones(3), np.ones(3)) == pytest.approx(0, abs=1e-15)
    assert dirichlet_form(3, [2, 1, 1], [1, 0, 0]) == pytest.approx(1 / 3)
    f = np.array([0.5, 1.2, 1.3])
    assert dirichlet_r(3, f, 0.5) == dirichlet_r(3, f, 0.5)
    with pytest.raises(DomainError):
        dirichlet_r(3, [1.0, 0.0, 2.0], 0.5)


def test_dirichlet_form_is_generator_form():
    # E(f, g) = -E_pi[(L f) g] with L the rate-1/(k-1) walk on the complete graph
    k = 5
    L = (np.ones((k, k)) - k * np.eye(k)) / (k - 1)
    rng = np.random.default_rng(2)
    f, g = rng.normal(size=(2, k))
    assert dirichlet_form(k, f, g) == pytest.approx(-np.mean((L @ f) * g), rel=1e-12)


def test_dirichlet_r_symmetric_in_r():
    rng = np.random.default_rng(5)
    for k in range(2, 7):
        f = rng.uniform(0.1, 3, size=k)
        for r in np.linspace(0, 1, 11):
            assert dirichlet_r(k, f, r) == pytest.approx(dirichlet_r(k, f, 1 - r), rel=1e-12, abs=1e-15)


def test_dirichlet_r_concave_in_r():
    rng = np.random.default_rng(6)
    rs = np.linspace(0, 1, 50)
    for _ in range(200):
        k = int(rng.integers(2, 7))
        f = rng.uniform(0.05, 5, size=k)
        vals = np.array([dirichlet_r(k, f, r) for r in rs])
        assert np.max(np.diff(vals, 2)) <= 1e-10


def test_entropy_form():
    f = np.array([2.0, 0.5, 0.5])
    assert entropy_form(f) == pytest.approx(np.mean(f * np.log(f)))
    assert entropy_form(3 * two_valued(3, 0.7)) == pytest.approx(psi(3, 0.7))
