"""P1 Galerkin finite elements on a uniform interval mesh.

Tridiagonal assembly of the mass matrix and the diffusion-advection matrix,
the broken L2 norm used for error measurement, initial-data projections, and
the tridiagonal solve that everything funnels through.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
import scipy.linalg

__all__ = [
    "BcMode",
    "SpatialMesh",
    "TriDiagMatrix",
    "SingularSystemError",
    "uniform_mesh",
    "assemble_mass",
    "assemble_G",
    "l2_norm",
    "load_vector",
    "project_initial",
    "thomas_solve",
    "to_dof",
    "to_full",
]

# 2-point and 4-point Gauss-Legendre rules on [-1, 1]
_G2 = 1.0 / math.sqrt(3.0)
_GL4_X = np.array(
    [-0.8611363115940526, -0.3399810435848563, 0.3399810435848563, 0.8611363115940526]
)
_GL4_W = np.array(
    [0.3478548451374538, 0.6521451548625461, 0.6521451548625461, 0.3478548451374538]
)


class BcMode(Enum):
    """Boundary handling: eliminate boundary nodes, or keep them with no flux."""

    DIRICHLET = "dirichlet"
    ZERO_FLUX = "zeroflux"


class SingularSystemError(Exception):
    """The tridiagonal solve hit a zero pivot."""


@dataclass(frozen=True)
class SpatialMesh:
    """Uniform mesh of M_x elements on [a, b] with nodes x_p = a + p h."""

    a: float
    b: float
    M_x: int
    h: float
    nodes: np.ndarray

    def d_h(self, bc: BcMode) -> int:
        """Unknown count: interior nodes for Dirichlet, all nodes for zero-flux."""
        return self.M_x - 1 if bc is BcMode.DIRICHLET else self.M_x + 1


def uniform_mesh(a: float, b: float, m: int) -> SpatialMesh:
    if not b > a:
        raise ValueError(f"need b > a, got [{a}, {b}]")
    if m < 2:
        raise ValueError(f"need at least 2 elements, got {m}")
    nodes = np.linspace(a, b, m + 1)
    return SpatialMesh(a=a, b=b, M_x=m, h=(b - a) / m, nodes=nodes)


@dataclass(frozen=True)
class TriDiagMatrix:
    sub: np.ndarray
    diag: np.ndarray
    sup: np.ndarray

    def __post_init__(self):
        if self.sub.size != self.diag.size - 1 or self.sup.size != self.diag.size - 1:
            raise ValueError("inconsistent tridiagonal band lengths")

    @property
    def n(self) -> int:
        return self.diag.size

    def matvec(self, v: np.ndarray) -> np.ndarray:
        out = self.diag * v
        out[:-1] += self.sup * v[1:]
        out[1:] += self.sub * v[:-1]
        return out

    def plus_scaled(self, other: "TriDiagMatrix", c: float) -> "TriDiagMatrix":
        """self + c * other."""
        return TriDiagMatrix(
            self.sub + c * other.sub, self.diag + c * other.diag, self.sup + c * other.sup
        )

    def to_dense(self) -> np.ndarray:
        return np.diag(self.diag) + np.diag(self.sub, -1) + np.diag(self.sup, 1)


def _restrict(full: TriDiagMatrix, bc: BcMode) -> TriDiagMatrix:
    # Dirichlet drops the first and last row and column
    if bc is BcMode.DIRICHLET:
        return TriDiagMatrix(full.sub[1:-1], full.diag[1:-1], full.sup[1:-1])
    return full


def to_dof(v_full: np.ndarray, bc: BcMode) -> np.ndarray:
    """Full nodal vector -> unknown vector."""
    return v_full[1:-1].copy() if bc is BcMode.DIRICHLET else v_full.copy()


def to_full(v_dof: np.ndarray, bc: BcMode) -> np.ndarray:
    """Unknown vector -> full nodal vector (Dirichlet boundary entries zero)."""
    if bc is BcMode.DIRICHLET:
        out = np.zeros(v_dof.size + 2)
        out[1:-1] = v_dof
        return out
    return v_dof.copy()


def assemble_mass(mesh: SpatialMesh, bc: BcMode) -> TriDiagMatrix:
    """Exact P1 mass matrix: interior diag 2h/3, boundary diag h/3, off h/6."""
    h = mesh.h
    diag = np.full(mesh.M_x + 1, 2.0 * h / 3.0)
    diag[0] = diag[-1] = h / 3.0
    off = np.full(mesh.M_x, h / 6.0)
    return _restrict(TriDiagMatrix(off, diag, off.copy()), bc)


def _eval_on(fun, x: np.ndarray) -> np.ndarray:
    """Evaluate a pointwise callable, broadcasting scalar-valued results."""
    vals = np.asarray(fun(x), dtype=float)
    if vals.shape != x.shape:
        vals = np.broadcast_to(vals, x.shape)
    return vals


def assemble_G(mesh: SpatialMesh, bc: BcMode, kappa, drift_avg=None) -> TriDiagMatrix:
    """Matrix of <kappa phi_q', phi_p'> - <drift_avg phi_q, phi_p'>.

    2-point Gauss per element, exact for constant kappa and affine drift.
    ``drift_avg`` is the caller's time-averaged drift (or None for none).
    Raises if kappa is nonpositive at any quadrature node.
    """
    h = mesh.h
    xm = 0.5 * (mesh.nodes[:-1] + mesh.nodes[1:])
    xg1 = xm - 0.5 * h * _G2
    xg2 = xm + 0.5 * h * _G2
    k1 = _eval_on(kappa, xg1)
    k2 = _eval_on(kappa, xg2)
    if np.any(k1 <= 0.0) or np.any(k2 <= 0.0):
        raise ValueError("kappa must be positive at every quadrature node")
    k_el = (k1 + k2) / (2.0 * h)

    if drift_avg is None:
        e_ll = k_el
        e_lr = -k_el
        e_rl = -k_el
        e_rr = k_el
    else:
        d1 = _eval_on(drift_avg, xg1)
        d2 = _eval_on(drift_avg, xg2)
        # hat function values at the two Gauss points
        phi_hi = 0.5 * (1.0 + _G2)
        phi_lo = 0.5 * (1.0 - _G2)
        # -<F phi_L, phi_L'> = +(1/h) int F phi_L, and phi_R' flips the sign
        d_ll = 0.5 * (d1 * phi_hi + d2 * phi_lo)
        d_lr = 0.5 * (d1 * phi_lo + d2 * phi_hi)
        e_ll = k_el + d_ll
        e_lr = -k_el + d_lr
        e_rl = -k_el - d_ll
        e_rr = k_el - d_lr

    diag = np.zeros(mesh.M_x + 1)
    diag[:-1] += e_ll
    diag[1:] += e_rr
    return _restrict(TriDiagMatrix(np.asarray(e_rl, float), diag, np.asarray(e_lr, float)), bc)


def l2_norm(values: np.ndarray, mesh: SpatialMesh) -> float:
    """L2(a,b) norm of the piecewise-linear interpolant of nodal values.

    Uses the closed form h (v_l^2 + v_l v_r + v_r^2) / 3 per element, which
    is what a 2-point Gauss rule gives exactly.
    """
    v = np.asarray(values, dtype=float)
    if v.shape != mesh.nodes.shape:
        raise ValueError(f"expected {mesh.nodes.size} nodal values, got {v.size}")
    vl = v[:-1]
    vr = v[1:]
    acc = float(np.sum(vl * vl + vl * vr + vr * vr))
    return math.sqrt(mesh.h * acc / 3.0)


def load_vector(g, mesh: SpatialMesh) -> np.ndarray:
    """Full nodal vector of ∫ g φ_p dx, 4-point Gauss per element."""
    h = mesh.h
    xm = 0.5 * (mesh.nodes[:-1] + mesh.nodes[1:])
    xg = xm[:, None] + (0.5 * h) * _GL4_X[None, :]
    gv = _eval_on(g, xg)
    phi_l = 0.5 * (1.0 - _GL4_X)
    phi_r = 0.5 * (1.0 + _GL4_X)
    wl = (0.5 * h) * (gv @ (_GL4_W * phi_l))
    wr = (0.5 * h) * (gv @ (_GL4_W * phi_r))
    out = np.zeros(mesh.M_x + 1)
    out[:-1] += wl
    out[1:] += wr
    return out


def project_initial(u0, mesh: SpatialMesh, bc: BcMode, mode: str,
                    kappa=None, u0_prime=None) -> np.ndarray:
    """Project the initial datum onto the P1 space; returns full nodal values.

    mode "nodal" samples u0 at the nodes; "l2" solves the mass system with a
    4-point Gauss load vector; "ritz" solves the kappa-weighted stiffness
    system (Dirichlet only; needs kappa, and uses u0_prime when given, else a
    central difference of u0).
    """
    kind = mode.lower()
    if kind == "nodal":
        return _eval_on(u0, mesh.nodes).copy()

    if kind == "l2":
        rhs = load_vector(u0, mesh)
        mass = assemble_mass(mesh, bc)
        return to_full(thomas_solve(mass, to_dof(rhs, bc)), bc)

    if kind == "ritz":
        if kappa is None:
            raise ValueError("ritz projection needs the diffusion coefficient kappa")
        if bc is not BcMode.DIRICHLET:
            # the pure-Neumann stiffness matrix is singular (constants)
            raise ValueError("ritz projection is only supported with dirichlet boundaries")
        if u0_prime is None:
            step = 1e-5 * mesh.h
            u0_prime = lambda x: (u0(x + step) - u0(x - step)) / (2.0 * step)
        h = mesh.h
        xm = 0.5 * (mesh.nodes[:-1] + mesh.nodes[1:])
        xg = xm[:, None] + (0.5 * h) * _GL4_X[None, :]
        gv = _eval_on(kappa, xg) * _eval_on(u0_prime, xg)
        # ∫ kappa u0' phi_p' per element: phi' = ±1/h cancels the h/2 scale
        el = 0.5 * (gv @ _GL4_W)
        rhs = np.zeros(mesh.M_x + 1)
        rhs[:-1] -= el
        rhs[1:] += el
        stiff = assemble_G(mesh, bc, kappa, None)
        return to_full(thomas_solve(stiff, to_dof(rhs, bc)), bc)

    raise ValueError(f"unknown projection mode {mode!r}")


def thomas_solve(A: TriDiagMatrix, rhs: np.ndarray) -> np.ndarray:
    """Solve the tridiagonal system A x = rhs.

    Backed by LAPACK's banded elimination; raises SingularSystemError on a
    zero pivot (exactly singular systems).
    """
    b = np.asarray(rhs, dtype=float)
    if b.shape != A.diag.shape:
        raise ValueError(f"rhs length {b.size} does not match system size {A.n}")
    ab = np.zeros((3, A.n))
    ab[0, 1:] = A.sup
    ab[1] = A.diag
    ab[2, :-1] = A.sub
    try:
        return scipy.linalg.solve_banded((1, 1), ab, b, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError(f"tridiagonal solve failed: {exc}") from exc
