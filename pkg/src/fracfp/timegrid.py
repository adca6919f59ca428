"""Graded time meshes concentrating steps near t = 0."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class GradedMesh:
    """Time mesh t_i = (i * tau)**gamma with tau = T**(1/gamma) / N.

    gamma = 1 gives a uniform mesh; larger gamma compresses steps toward
    the origin, where solutions of fractional-order problems are rough.
    """

    T: float
    N: int
    gamma: float
    nodes: np.ndarray   # shape (N+1,), nodes[0] = 0, nodes[N] = T
    steps: np.ndarray   # shape (N,), steps[i] = nodes[i+1] - nodes[i]

    @property
    def tau(self) -> float:
        return self.T ** (1.0 / self.gamma) / self.N


@dataclass(frozen=True)
class MeshPropertyReport:
    doubling: bool      # t_n <= 2**gamma * t_{n-1} for n >= 2
    step_bracket: bool  # gamma*tau*t_{n-1}^{1-1/gamma} <= tau_n <= gamma*tau*t_n^{1-1/gamma}

    def __bool__(self) -> bool:
        return self.doubling and self.step_bracket


def build_mesh(T: float, N: int, gamma: float) -> GradedMesh:
    """Build the graded mesh with nodes t_i = (i*tau)**gamma, tau = T**(1/gamma)/N.

    Nodes are computed in closed form rather than multiplicatively so that
    no drift accumulates for large N.
    """
    if T <= 0:
        raise ValueError(f"T must be positive, got {T}")
    if N < 1:
        raise ValueError(f"N must be a positive integer, got {N}")
    if gamma < 1.0:
        raise ValueError(f"gamma must be >= 1, got {gamma}")
    tau = T ** (1.0 / gamma) / N
    i = np.arange(N + 1, dtype=float)
    nodes = (i * tau) ** gamma
    nodes[0] = 0.0
    nodes[N] = T  # closed form is exact up to roundoff; pin the endpoint
    steps = np.diff(nodes)
    if np.any(steps <= 0):
        raise ValueError("mesh nodes are not strictly increasing")
    return GradedMesh(T=float(T), N=int(N), gamma=float(gamma), nodes=nodes, steps=steps)


def check_mesh_properties(mesh: GradedMesh, rtol: float = 1e-12) -> MeshPropertyReport:
    """Verify the two grading inequalities used by the step-size analysis.

    For n >= 2: t_n <= 2**gamma * t_{n-1}, and for n >= 1 the step bracket
    gamma*tau*t_{n-1}^{1-1/gamma} <= tau_n <= gamma*tau*t_n^{1-1/gamma}.
    A relative slack `rtol` absorbs roundoff.
    """
    t = mesh.nodes
    tau_n = np.diff(t)
    g = mesh.gamma
    tau = mesh.tau

    doubling = bool(np.all(t[2:] <= (2.0 ** g) * t[1:-1] * (1.0 + rtol)))

    expo = 1.0 - 1.0 / g
    lo = g * tau * t[:-1] ** expo
    hi = g * tau * t[1:] ** expo
    step_bracket = bool(
        np.all(lo <= tau_n * (1.0 + rtol)) and np.all(tau_n <= hi * (1.0 + rtol))
    )
    return MeshPropertyReport(doubling=doubling, step_bracket=step_bracket)


def check_step_assumption(
    mesh: GradedMesh, alpha: float, c0: float, kappa_min: float
) -> bool:
    """Stability step-size diagnostic for the fractional scheme.

    Checks 8 * w(t_n) * w(tau_n) * (2*c0**2/kappa_min + 1)**2 <= 1 for every
    step, with w(t) = t**alpha / Gamma(1+alpha), c0 a bound on the drift
    magnitude and kappa_min the diffusivity floor.  Advisory only: callers
    warn rather than abort when it fails.
    """
    from scipy.special import gamma as _gamma

    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    if kappa_min <= 0:
        raise ValueError(f"kappa_min must be positive, got {kappa_min}")
    w = lambda s: s ** alpha / _gamma(1.0 + alpha)
    t = mesh.nodes
    lhs = 8.0 * w(t[1:]) * w(mesh.steps) * (2.0 * c0 ** 2 / kappa_min + 1.0) ** 2
    return bool(np.all(lhs <= 1.0))
