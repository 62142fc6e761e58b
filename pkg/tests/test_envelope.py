import math

import mpmath as mp
import numpy as np
import pytest

from potts_sdpi.contraction import b_check, s_hat
from potts_sdpi.envelope import (
    PiecewiseLinearFn,
    b1_truncation_point,
    concave_envelope,
    convex_envelope,
    envelope_gap,
    linear_piece_near_zero,
    nonconvexity_certificate,
)
from potts_sdpi.potts_core import DomainError, b_p_curve, psi, s_lambda_curve

mp.mp.dps = 50


def test_concave_envelope_of_cubic():
    env = concave_envelope(lambda x: x ** 3, -1.0, 1.0)
    # tangent through (1, 1) touches x^3 at x = -1/2
    xs = np.linspace(-0.5, 1, 50)
    assert np.allclose(env(xs), 1 + 0.75 * (xs - 1), atol=1e-9)
    assert env(-0.8) == pytest.approx(-0.8 ** 3, abs=1e-7)


def test_convex_envelope_of_cubic():
    env = convex_envelope(lambda x: x ** 3, -1.0, 1.0)
    xs = np.linspace(-1, 0.5, 50)
    assert np.allclose(env(xs), -1 + 0.75 * (xs + 1), atol=1e-9)
    assert env(0.8) == pytest.approx(0.8 ** 3, abs=1e-7)


def test_envelope_of_concave_function_is_itself():
    env = concave_envelope(np.sqrt, 0.0, 4.0)
    ys = np.linspace(0, 4, 1001)
    assert np.max(np.abs(env(ys) - np.sqrt(ys))) < 1e-8


def test_envelope_of_linear_function_has_two_breakpoints():
    env = concave_envelope(lambda x: 2 * x + 1, 0.0, 3.0)
    assert env.xs.tolist() == [0.0, 3.0]
    assert linear_piece_near_zero(lambda x: 2 * x + 1, env) is None


def test_envelope_argument_checks():
    with pytest.raises(DomainError):
        concave_envelope(np.sin, 1.0, 1.0)
    with pytest.raises(DomainError):
        concave_envelope(np.sin, 0.0, 1.0, grid_n=4)
    with pytest.raises(DomainError):
        PiecewiseLinearFn(np.array([0.0, 0.0]), np.array([1.0, 2.0]))


def test_extension_outside_domain():
    f = PiecewiseLinearFn(np.array([0.0, 1.0, 2.0]), np.array([0.0, 2.0, 3.0]))
    assert f(-1.0) == pytest.approx(-2.0)
    assert f(3.0) == pytest.approx(4.0)
    assert f(1.5) == pytest.approx(2.5)


def test_csv_roundtrip():
    env = s_hat(3, 0.5)
    text = env.to_csv()
    assert text.splitlines()[0] == "x,y"
    back = PiecewiseLinearFn.from_csv(text)
    assert np.allclose(back.xs, env.xs, rtol=1e-11)
    assert np.allclose(back.ys, env.ys, rtol=1e-11, atol=1e-15)


CURVES = [
    ("s", 3, 0.5), ("s", 3, -0.5), ("s", 5, 0.9), ("s", 5, -0.25), ("s", 2, 0.7),
    ("b", 3, 2.0), ("b", 5, 2.0), ("b", 3, 1.5), ("b", 3, 1.0), ("b", 5, 1.0), ("b", 2, 2.0),
]


def _curve_and_env(kind, k, param):
    if kind == "s":
        return s_lambda_curve(k, param), s_hat(k, param), math.log(k)
    hi = b1_truncation_point(k) if param == 1 else math.log(k)
    return b_p_curve(k, param), b_check(k, param), hi


@pytest.mark.parametrize("kind,k,param", CURVES)
def test_dominance_hull_and_endpoints(kind, k, param):
    f, env, hi = _curve_and_env(kind, k, param)
    rng = np.random.default_rng(0)
    ys = rng.uniform(0, hi, 10_000)
    gap = envelope_gap(f, env, ys)
    scale = max(1.0, float(np.max(np.abs(env.ys))))
    if env.kind == "concave":
        assert gap.min() >= -1e-10 * scale
        assert np.all(np.diff(env.slopes) <= 1e-12 * scale)
    else:
        assert gap.max() <= 1e-10 * scale
        assert np.all(np.diff(env.slopes) >= -1e-12 * scale)
    assert env(0.0) == pytest.approx(float(f(0.0)), abs=1e-10)
    assert env(hi) == pytest.approx(float(f(hi)), abs=1e-10 * scale)


@pytest.mark.parametrize("kind,k,param", CURVES[:4] + CURVES[5:9])
def test_idempotence(kind, k, param):
    f, env, hi = _curve_and_env(kind, k, param)
    again = (concave_envelope if env.kind == "concave" else convex_envelope)(env, env.a, env.b)
    xs = np.linspace(env.a, env.b, 5001)
    assert np.max(np.abs(again(xs) - env(xs))) <= 1e-12


def test_s_hat_endpoint():
    for k, lam in [(3, 0.5), (4, -0.2), (6, 0.8)]:
        assert s_hat(k, lam)(math.log(k)) == pytest.approx(psi(k, lam + (1 - lam) / k), abs=1e-12)


def test_binary_case_has_no_linear_piece():
    f = s_lambda_curve(2, 0.7)
    env = s_hat(2, 0.7)
    ys = np.linspace(0, math.log(2), 2001)
    assert np.max(np.abs(env(ys) - f(ys))) < 1e-8
    assert linear_piece_near_zero(f, env) is None
    assert linear_piece_near_zero(b_p_curve(2, 2.0), b_check(2, 2.0)) is None


@pytest.mark.parametrize("k,kind,param", [(3, "s", -0.5), (3, "s", 0.5), (5, "b", 1.0), (3, "b", 2.0)])
def test_linear_piece_detected(k, kind, param):
    f, env, _ = _curve_and_env(kind, k, param)
    piece = linear_piece_near_zero(f, env)
    assert piece is not None
    a, c = piece
    assert a == 0.0 and c > 0
    mid = 0.5 * c
    gap = env(mid) - float(f(mid))
    assert (gap > 0) if env.kind == "concave" else (gap < 0)


def test_certificate_examples():
    assert nonconvexity_certificate(3, "b1") == pytest.approx(91.125)
    assert nonconvexity_certificate(3, "s", 0.5) == pytest.approx(3.796875)
    assert nonconvexity_certificate(2, "b1") == 0
    assert nonconvexity_certificate(2, "s", 0.3) == 0
    assert nonconvexity_certificate(2, "bp", 2.0) == 0
    with pytest.raises(DomainError):
        nonconvexity_certificate(3, "bp", 1.0)
    with pytest.raises(DomainError):
        nonconvexity_certificate(3, "zz")


@pytest.mark.parametrize("k", range(3, 31))
def test_certificate_signs(k):
    for p in (1, 1.5, 2, 4):
        kind = "b1" if p == 1 else "bp"
        assert nonconvexity_certificate(k, kind, None if p == 1 else p) > 0
    for lam in (-1 / (k - 1), -0.3, 0.3, 0.9):
        if lam >= -1 / (k - 1):
            assert nonconvexity_certificate(k, "s", lam) > 0


def _psi_mp(k, x):
    return mp.log(k) + x * mp.log(x) + (1 - x) * mp.log((1 - x) / (k - 1))


def _f_mp(k, kind, param):
    def two(x):
        return [k * x] + [k * (1 - x) / (k - 1)] * (k - 1)

    def dform(f, g):
        return (-sum(f) * sum(g) / k + sum(a * b for a, b in zip(f, g))) / (k - 1)

    if kind == "s":
        lam = mp.mpf(param)
        return lambda x: _psi_mp(k, lam * x + (1 - lam) / k)
    # b_p is checked for non-convexity, so xi enters with a negative sign
    if kind == "b1":
        return lambda x: -(k - 1) * dform(two(x), [mp.log(v) for v in two(x)])
    r = 1 / mp.mpf(param)
    return lambda x: k - (k - 1) * dform([v ** r for v in two(x)], [v ** (1 - r) for v in two(x)])


@pytest.mark.parametrize("k", [3, 4, 7])
@pytest.mark.parametrize("kind,param", [("b1", None), ("bp", 2.0), ("bp", 3.0), ("s", 0.5), ("s", -0.2)])
def test_certificate_matches_derivative_values(k, kind, param):
    x0 = mp.mpf(1) / k
    f = _f_mp(k, kind, param)
    g = lambda x: _psi_mp(k, x)  # noqa: E731
    g2, g3 = mp.diff(g, x0, 2), mp.diff(g, x0, 3)
    f2, f3 = mp.diff(f, x0, 2), mp.diff(f, x0, 3)
    ref = float(g2 * f3 - f2 * g3)
    assert nonconvexity_certificate(k, kind, param) == pytest.approx(ref, rel=1e-8)


def test_b1_truncation_point():
    y = b1_truncation_point(3)
    assert y < math.log(3)
    assert math.log(3) - y < 1e-6
    assert math.isfinite(float(b_p_curve(3, 1.0)(y)))
