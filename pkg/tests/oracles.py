"""Independent reference implementations used only by the tests.

Everything here runs on different machinery than the library (mpmath
arbitrary precision, QUADPACK adaptive quadrature, dense linear algebra),
so agreement between the two routes is meaningful evidence and never a
tautology.
"""

import math

import mpmath as mp
import numpy as np
from scipy import integrate


def ml_oracle(mu: float, beta: float, x: float) -> float:
    """E_{mu,beta}(-x) for x >= 0 in extended precision.

    Taylor summation with precision scaled to the largest term while the
    peak index stays manageable; the divergent asymptotic expansion with
    envelope stopping otherwise (its truncation error is then far below
    any tolerance used in the tests).  Gamma arguments are assembled in
    mpf arithmetic: mu*k + beta rounded in float64 would shift the poles
    enough to destroy the cancellation this series relies on.
    """
    if x < 0:
        raise ValueError("oracle covers the negative real axis only, pass x >= 0")
    if x == 0.0:
        return float(mp.rgamma(beta))
    # x**(1/mu) is the log of the largest Taylor term AND the exponent of the
    # asymptotic envelope minimum (~exp(-x**(1/mu))), so one number decides
    # the branch: beyond 95 the divergent tail truncates below ~5e-42
    peak = x ** (1.0 / mu) / mu
    if x ** (1.0 / mu) < 95.0:
        lm = x ** (1.0 / mu)
        dps = 40 + int(1.2 * lm / math.log(10.0))
        with mp.workdps(dps):
            mz = -mp.mpf(x)
            mmu = mp.mpf(mu)
            mbeta = mp.mpf(beta)
            acc = mp.mpf(0)
            k = 0
            calm = 0
            while calm < 8:
                term = mz ** k / mp.gamma(mmu * k + mbeta)
                acc += term
                calm = calm + 1 if abs(term) < mp.eps * (abs(acc) + mp.eps) else 0
                k += 1
                if k > 40 * (peak + 40):
                    raise RuntimeError("oracle Taylor sum failed to settle")
            return float(acc)
    # asymptotic branch: sum_k -(-x)^{-k} rgamma(beta - mu k).  The raw terms
    # dip to ~0 whenever beta - mu k sits near a Gamma pole, so the stop
    # decision uses the pole-free reflection envelope
    # x^{-k} Gamma(mu k + 1 - beta)/pi >= |term|, which decreases smoothly
    # until convergence for every argument this branch ever sees.
    with mp.workdps(80):
        mx = mp.mpf(x)
        mmu = mp.mpf(mu)
        mbeta = mp.mpf(beta)
        floor = mp.mpf(10) ** (-32)
        acc = mp.mpf(0)
        prev_env = mp.inf
        k = 1
        while True:
            env = mx ** (-k) * mp.gamma(mmu * k + 1 - mbeta) / mp.pi
            acc -= (-mx) ** (-k) * mp.rgamma(mbeta - mmu * k)
            if env < floor * (abs(acc) + floor):
                return float(acc)
            assert env < prev_env and k < 400, "asymptotic tail not converging"
            prev_env = env
            k += 1


def series_u_oracle(amplitude: float, power: int, alternating: bool,
                    x: float, t: float, alpha: float, terms: int = 400) -> float:
    """Direct finite sum of c_m sin(lam_m x) E_{alpha,1}(-lam_m^2 t^alpha).

    Slow but transparent; only for spot values at moderate t where the
    tail beyond `terms` modes is far below 1e-13.
    """
    total = 0.0
    comp = 0.0
    for m in range(terms):
        lam = (2 * m + 1) * math.pi
        c = amplitude * lam ** (-power) * (-1.0 if alternating and m % 2 else 1.0)
        term = c * math.sin(lam * x) * ml_oracle(alpha, 1.0, lam * lam * t ** alpha)
        # Neumaier compensation; the terms alternate in size by decades
        new = total + term
        if abs(total) >= abs(term):
            comp += (total - new) + term
        else:
            comp += (term - new) + total
        total = new
    return total + comp


def dense_matrices(nodes: np.ndarray, kappa, drift_avg):
    """Dense mass and transport matrices by per-element Gauss quadrature.

    G[p, q] = int kappa phi_q' phi_p' - int drift_avg phi_q phi_p'.
    Six-point Gauss per element, exact for all polynomial data in the tests.
    """
    n = nodes.size
    gx, gw = np.polynomial.legendre.leggauss(6)
    M = np.zeros((n, n))
    G = np.zeros((n, n))
    for e in range(n - 1):
        xl, xr = nodes[e], nodes[e + 1]
        h = xr - xl
        xq = 0.5 * (xl + xr) + 0.5 * h * gx
        wq = 0.5 * h * gw
        phi = np.vstack([(xr - xq) / h, (xq - xl) / h])
        dphi = np.array([-1.0 / h, 1.0 / h])
        kv = np.asarray(kappa(xq), dtype=float) * np.ones_like(xq)
        fv = (np.asarray(drift_avg(xq), dtype=float) * np.ones_like(xq)
              if drift_avg is not None else None)
        for a in range(2):
            for b in range(2):
                M[e + a, e + b] += np.sum(wq * phi[a] * phi[b])
                G[e + a, e + b] += np.sum(wq * kv) * dphi[b] * dphi[a]
                if fv is not None:
                    G[e + a, e + b] -= np.sum(wq * fv * phi[b]) * dphi[a]
    return M, G


def dense_load(nodes: np.ndarray, g) -> np.ndarray:
    """Load vector int g phi_p by six-point Gauss per element."""
    n = nodes.size
    gx, gw = np.polynomial.legendre.leggauss(6)
    out = np.zeros(n)
    for e in range(n - 1):
        xl, xr = nodes[e], nodes[e + 1]
        h = xr - xl
        xq = 0.5 * (xl + xr) + 0.5 * h * gx
        wq = 0.5 * h * gw
        gv = np.asarray(g(xq), dtype=float) * np.ones_like(xq)
        out[e] += np.sum(wq * gv * (xr - xq) / h)
        out[e + 1] += np.sum(wq * gv * (xq - xl) / h)
    return out


def cn_reference(nodes: np.ndarray, times: np.ndarray, u0_full: np.ndarray,
                 kappa, drift, f) -> np.ndarray:
    """Crank-Nicolson trajectory with Dirichlet ends, dense linear algebra.

    Drift is averaged over each interval's endpoints and the source is
    integrated exactly in time (eight-point Gauss); both match the target
    scheme's conventions in the alpha = 1 limit.
    """
    gx8, gw8 = np.polynomial.legendre.leggauss(8)
    nsteps = times.size - 1
    vals = np.zeros((nsteps + 1, nodes.size))
    vals[0] = u0_full
    U = u0_full[1:-1].copy()
    for nstep in range(1, nsteps + 1):
        t0, t1 = times[nstep - 1], times[nstep]
        tau = t1 - t0
        davg = (None if drift is None
                else (lambda x, _a=t0, _b=t1: 0.5 * (drift(x, _a) + drift(x, _b))))
        M, G = dense_matrices(nodes, kappa, davg)
        Mi, Gi = M[1:-1, 1:-1], G[1:-1, 1:-1]
        rhs = (Mi - 0.5 * tau * Gi) @ U
        if f is not None:
            tq = 0.5 * (t0 + t1) + 0.5 * tau * gx8
            wq = 0.5 * tau * gw8
            for tv, wv in zip(tq, wq):
                rhs = rhs + wv * dense_load(nodes, lambda x: f(x, tv))[1:-1]
        U = np.linalg.solve(Mi + 0.5 * tau * Gi, rhs)
        vals[nstep] = np.concatenate([[0.0], U, [0.0]])
    return vals


def source_integral_oracle(f, rho, nodes: np.ndarray, t0: float, t1: float) -> np.ndarray:
    """int_{t0}^{t1} <f, phi_p> dt with QUADPACK in both variables.

    The time integrand may behave like t**rho near t = 0; when the interval
    touches the origin the algebraic-weight rule handles it.  f here is the
    FULL source (singular factor included).
    """
    n = nodes.size
    out = np.zeros(n)

    def space_int(p, t):
        total = 0.0
        if p > 0:
            xl, xr = nodes[p - 1], nodes[p]
            total += integrate.quad(
                lambda x: f(x, t) * (x - xl) / (xr - xl), xl, xr, epsabs=1e-14, epsrel=1e-12
            )[0]
        if p < n - 1:
            xl, xr = nodes[p], nodes[p + 1]
            total += integrate.quad(
                lambda x: f(x, t) * (xr - x) / (xr - xl), xl, xr, epsabs=1e-14, epsrel=1e-12
            )[0]
        return total

    if t0 == 0.0 and rho != 0.0:
        raise ValueError("interval touches the singularity; use source_integral_singular")
    for p in range(n):
        out[p] = integrate.quad(lambda t: space_int(p, t), t0, t1,
                                epsabs=1e-15, epsrel=1e-13, limit=200)[0]
    return out


def source_integral_singular(g, rho, nodes: np.ndarray, t1: float) -> np.ndarray:
    """int_0^{t1} t**rho <g(.,t), phi_p> dt with the algebraic-weight rule.

    g is the smooth cofactor.  QUADPACK's 'alg' weight integrates
    (t - 0)**rho exactly in its rule, which sidesteps the singularity.
    """
    n = nodes.size
    out = np.zeros(n)

    def space_int(p, t):
        total = 0.0
        if p > 0:
            xl, xr = nodes[p - 1], nodes[p]
            total += integrate.quad(
                lambda x: g(x, t) * (x - xl) / (xr - xl), xl, xr, epsabs=1e-14, epsrel=1e-12
            )[0]
        if p < n - 1:
            xl, xr = nodes[p], nodes[p + 1]
            total += integrate.quad(
                lambda x: g(x, t) * (xr - x) / (xr - xl), xl, xr, epsabs=1e-14, epsrel=1e-12
            )[0]
        return total

    for p in range(n):
        out[p] = integrate.quad(
            lambda t: space_int(p, t), 0.0, t1,
            weight="alg", wvar=(rho, 0.0), epsabs=1e-15, epsrel=1e-13, limit=200,
        )[0]
    return out


def frac_integral_oracle(alpha: float, u_of_t, t: float, dps: int = 30) -> float:
    """(I^alpha u)(t) = int_0^t (t-s)^{alpha-1}/Gamma(alpha) u(s) ds via mpmath.

    tanh-sinh quadrature after splitting at the midpoint so both the s = t
    kernel singularity and any s = 0 data singularity sit at interval ends.
    """
    with mp.workdps(dps):
        ma = mp.mpf(alpha)
        mt = mp.mpf(t)
        kern = lambda s: (mt - s) ** (ma - 1) * mp.mpf(u_of_t(float(s)))
        val = mp.quad(kern, [0, mt / 2, mt]) / mp.gamma(ma)
        return float(val)
