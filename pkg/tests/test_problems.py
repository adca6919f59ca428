import math

import numpy as np
import pytest
from scipy import integrate

from fracfp import (
    SeriesTruncation,
    TruncationError,
    eval_series,
    example1,
    example2,
    mittag_leffler,
)

from oracles import frac_integral_oracle, series_u_oracle

TIGHT = SeriesTruncation(m_max=2_000_000, tail_tol=1e-11, order=6)


# ------------------------------------------------------------- basic values

def test_initial_values_closed_form():
    x = np.array([0.0, 0.25, 0.5, 0.8, 1.0])
    p1 = example1(0.7)
    np.testing.assert_allclose(p1.exact(x, 0.0), x * (1 - x), atol=1e-15)
    p2 = example2(0.6)
    np.testing.assert_allclose(p2.exact(x, 0.0), np.minimum(x, 1 - x), atol=1e-15)
    assert p1.exact(np.array([0.5]), 0.0)[0] == pytest.approx(0.25, abs=1e-15)
    assert p2.exact(np.array([0.5]), 0.0)[0] == pytest.approx(0.5, abs=1e-15)


def test_boundary_values_vanish():
    x = np.array([0.0, 1.0])
    for prob in (example1(0.4), example2(0.8)):
        for t in (1e-8, 1e-3, 0.5, 1.0):
            assert np.abs(prob.exact(x, t)).max() < 1e-10


def test_exact_against_direct_sum_oracle():
    p1 = example1(0.7)
    got = p1.exact(np.array([0.5]), 0.5)[0]
    want = series_u_oracle(8.0, 3, False, 0.5, 0.5, 0.7)
    assert got == pytest.approx(want, abs=1e-9)

    p2 = example2(0.4)
    got2 = p2.exact(np.array([0.25]), 1.0)[0]
    want2 = series_u_oracle(4.0, 2, True, 0.25, 1.0, 0.4)
    assert got2 == pytest.approx(want2, abs=1e-9)


def test_u0_helpers():
    p1, p2 = example1(0.5), example2(0.5)
    x = np.linspace(0.0, 1.0, 9)
    np.testing.assert_allclose(p1.u0(x), x * (1 - x), atol=1e-15)
    np.testing.assert_allclose(p1.u0_prime(x), 1.0 - 2.0 * x, atol=1e-15)
    np.testing.assert_allclose(p2.u0(x), np.minimum(x, 1 - x), atol=1e-15)
    assert p2.u0_prime(np.array([0.2]))[0] == 1.0
    assert p2.u0_prime(np.array([0.8]))[0] == -1.0


def test_symmetry_of_solutions():
    # every retained mode is an odd harmonic, so u is symmetric about 1/2
    x = np.linspace(0.05, 0.45, 9)
    for prob in (example1(0.6), example2(0.7)):
        left = prob.exact(x, 0.3)
        right = prob.exact(np.ascontiguousarray(1.0 - x), 0.3)
        np.testing.assert_allclose(left, right, atol=1e-11)


# ----------------------------------------------------------- source algebra

def test_f_is_singular_factor_times_regular():
    prob = example1(0.55)
    x = np.linspace(0.1, 0.9, 7)
    for t in (1e-4, 0.37, 1.0):
        full = prob.f(x, t)
        reg = prob.f_regular(x, t)
        np.testing.assert_allclose(full, t ** (0.55 - 1.0) * reg, rtol=1e-13)


def test_f_rejects_nonpositive_time():
    prob = example2(0.5)
    x = np.array([0.5])
    with pytest.raises(ValueError):
        prob.f(x, 0.0)
    with pytest.raises(ValueError):
        prob.f(x, -0.1)


def test_batched_time_matches_scalar_calls():
    # the batch picks one truncation for all times, so agreement is at the
    # tail-tolerance level, not machine precision
    prob = example1(0.45)
    x = np.linspace(0.0, 1.0, 11)
    ts = np.array([1e-6, 1e-3, 0.2, 0.9])
    batch = prob.f_regular(x, ts)
    assert batch.shape == (4, 11)
    for i, t in enumerate(ts):
        np.testing.assert_allclose(batch[i], prob.f_regular(x, float(t)), atol=3e-9)


# ------------------------------------------------- the equation really holds

def _weak_residual(prob, t, phi, dphi, ddphi):
    """Time-integrated weak form of the equation against a test function.

    With P = I^alpha u and F(x,s) = sin(s) - x, integrating the equation
    over (0, t], testing with phi (phi(0) = phi(1) = 0) and moving all x
    derivatives onto phi gives

      <u(t) - u0, phi> = <P(t), phi''> + <F(.,t) P(t), phi'>
                         - int_0^t cos(s) <P(s), phi'> ds
                         + <int_0^t f ds, phi>.

    Every P-moment collapses to one scalar quadrature over the series by
    Fubini, so this needs nothing but adaptive QUADPACK plus the exact
    series; no solver code is involved.  Returns lhs minus rhs.
    """
    alpha = prob.alpha
    gx, gw = np.polynomial.legendre.leggauss(40)
    # split at 1/2 so the hat problem's kink sits on a panel edge
    xg = np.concatenate([0.25 * (1.0 + gx), 0.5 + 0.25 * (1.0 + gx)])
    wg = np.concatenate([0.25 * gw, 0.25 * gw])
    phv, dphv, ddphv = phi(xg), dphi(xg), ddphi(xg)
    Fv = np.sin(t) - xg

    def moment(weights, s):
        return float(wg * weights @ prob.exact(xg, float(s)))

    rga = 1.0 / math.gamma(alpha)

    lhs = float(wg * (prob.exact(xg, t) - prob.u0(xg)) @ phv)

    # <P(t), w> = 1/Gamma(a) int_0^t (t-s)^(a-1) <u(s), w> ds
    diff_term = rga * integrate.quad(
        lambda s: moment(ddphv, s), 0.0, t,
        weight="alg", wvar=(0.0, alpha - 1.0), epsabs=1e-11, epsrel=1e-11, limit=200)[0]

    drift_now = rga * integrate.quad(
        lambda s: moment(Fv * dphv, s), 0.0, t,
        weight="alg", wvar=(0.0, alpha - 1.0), epsabs=1e-11, epsrel=1e-11, limit=200)[0]

    def kern_tail(s):
        # J(s) = int_s^t cos(sig) (sig - s)^(a-1) dsig
        return integrate.quad(np.cos, s, t, weight="alg", wvar=(alpha - 1.0, 0.0),
                              epsabs=1e-12, epsrel=1e-12)[0]

    drift_hist = rga * integrate.quad(
        lambda s: moment(dphv, s) * kern_tail(s), 0.0, t,
        epsabs=1e-11, epsrel=1e-11, limit=200)[0]

    source = integrate.quad(
        lambda s: float(wg * phv @ prob.f_regular(xg, float(s))), 0.0, t,
        weight="alg", wvar=(alpha - 1.0, 0.0), epsabs=1e-11, epsrel=1e-11, limit=200)[0]

    return lhs - (diff_term + drift_now - drift_hist + source)


@pytest.mark.parametrize("factory,alpha,t", [
    (example1, 0.7, 0.6),
    (example1, 0.4, 0.35),
    (example2, 0.5, 0.8),
    (example2, 0.75, 0.3),
])
def test_pde_residual_vanishes(factory, alpha, t):
    prob = factory(alpha, trunc=TIGHT)
    checks = [
        (lambda x: np.sin(3 * np.pi * x),
         lambda x: 3 * np.pi * np.cos(3 * np.pi * x),
         lambda x: -9 * np.pi ** 2 * np.sin(3 * np.pi * x)),
        (lambda x: x * (1 - x) * np.exp(x),
         lambda x: np.exp(x) * (1 - x - x ** 2),
         lambda x: -np.exp(x) * x * (3 + x)),
    ]
    for phi, dphi, ddphi in checks:
        res = _weak_residual(prob, t, phi, dphi, ddphi)
        assert abs(res) < 1e-6, res


def test_single_mode_volterra_equation():
    # each mode amplitude solves y = 1 - lam^2 I^alpha y, the defining
    # Volterra equation; verify it by independent quadrature
    alpha, lam, t = 0.6, 3.0 * math.pi, 0.7

    def y(s):
        return mittag_leffler(alpha, 1.0, -(lam * lam) * float(s) ** alpha)

    integral = frac_integral_oracle(alpha, y, t)
    want = 1.0 - y(t)
    assert lam * lam * integral == pytest.approx(want, rel=1e-10)


# ----------------------------------------------------- generic series route

def test_generic_eval_matches_structured():
    prob = example1(0.8, trunc=TIGHT)
    coeffs = lambda m: 8.0 * ((2 * m + 1) * np.pi) ** (-3.0)
    x = np.array([0.3, 0.5, 0.9])
    got = eval_series(coeffs, x, 1.0, 0.8)
    np.testing.assert_allclose(got, prob.exact(x, 1.0), atol=2e-9)


def test_generic_eval_with_u0_split():
    # the split route subtracts 1 from E and adds u0 back: exact at t = 0
    coeffs = lambda m: 8.0 * ((2 * m + 1) * np.pi) ** (-3.0)
    u0 = lambda x: x * (1.0 - x)
    x = np.array([0.2, 0.7])
    np.testing.assert_allclose(eval_series(coeffs, x, 0.0, 0.5, u0=u0), u0(x), rtol=0)
    a = eval_series(coeffs, x, 0.05, 0.5, u0=u0)
    b = eval_series(coeffs, x, 0.05, 0.5)
    np.testing.assert_allclose(a, b, atol=3e-9)


def test_truncation_error_raised():
    small = SeriesTruncation(m_max=40, tail_tol=1e-14, order=0)
    prob = example1(0.5, trunc=small)
    with pytest.raises(TruncationError, match="modes"):
        prob.exact(np.array([0.5]), 1e-6)
    coeffs = lambda m: ((2 * m + 1) * np.pi) ** (-2.0)
    with pytest.raises(TruncationError):
        eval_series(coeffs, np.array([0.5]), 1e-8, 0.5,
                    trunc=SeriesTruncation(m_max=100, tail_tol=1e-12))


def test_validation():
    with pytest.raises(ValueError):
        example1(1.0)
    with pytest.raises(ValueError):
        example2(0.0)
    prob = example1(0.5)
    with pytest.raises(ValueError):
        prob.exact(np.array([0.5]), -0.5)


def test_single_mode_matches_kernel():
    # one retained mode must reduce to a direct kernel evaluation
    lam = math.pi
    x = np.array([0.37])
    t = 0.4
    got = eval_series(lambda m: 1.0 if m == 0 else 0.0, x, t, 0.6)
    want = math.sin(lam * x[0]) * mittag_leffler(0.6, 1.0, -lam * lam * t ** 0.6)
    np.testing.assert_allclose(got, want, atol=1e-12)
