"""Magnetic Lagrangian systems in adapted coordinates.

A system lives on a bundle with base coordinates q (dim n) and fibre
coordinates p (dim k); the Lagrangian L(q, v, p) carries no fibre
velocities, and a closed 2-form with blocks (B_QQ, B_QP, B_PP) supplies the
gyroscopic force.  The equations of motion mix a second-order equation in q
with a first-order equation in p:

    d/dt(dL/dv) - dL/dq = B_QQ v + B_QP pdot
    B_PP pdot = B_QP^T v - dL/dp

Derivatives of L come from analytic callables when supplied and central
finite differences otherwise.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import numerics
from .numerics import StepperChoice

DET_FLOOR = 1e-12


class RegularityError(RuntimeError):
    """A regularity determinant fell below the floor."""


@dataclass(frozen=True)
class MagLagState:
    q: np.ndarray
    v: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "q", np.atleast_1d(np.asarray(self.q, dtype=float)))
        object.__setattr__(self, "v", np.atleast_1d(np.asarray(self.v, dtype=float)))
        object.__setattr__(self, "p", np.atleast_1d(np.asarray(self.p, dtype=float))
                           if np.size(self.p) else np.zeros(0))
        for arr in (self.q, self.v, self.p):
            if not np.all(np.isfinite(arr)):
                raise ValueError("state entries must be finite")


@dataclass(frozen=True)
class InvariantReport:
    """Per-invariant maximum drift / residual records."""
    entries: dict[str, float]

    def worst(self) -> float:
        return max(self.entries.values()) if self.entries else 0.0


@dataclass(frozen=True)
class Trajectory:
    """Time series of flattened states with named columns."""
    times: np.ndarray
    states: np.ndarray
    columns: tuple[str, ...]
    report: InvariantReport | None = None

    def __post_init__(self):
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")
        if self.states.shape != (self.times.size, len(self.columns)):
            raise ValueError("states shape inconsistent with times/columns")

    def to_csv(self, path) -> None:
        write_csv(path, self.times, self.states, self.columns)


def write_csv(path, times: np.ndarray, states: np.ndarray,
              columns: Sequence[str]) -> None:
    """17-significant-digit CSV with a `t` column first."""
    with open(path, "w") as fh:
        fh.write("t," + ",".join(columns) + "\n")
        for t, row in zip(times, states):
            fh.write(",".join(f"{x:.17g}" for x in (t, *row)) + "\n")


BlockForm = Callable[[np.ndarray, np.ndarray],
                     tuple[np.ndarray, np.ndarray, np.ndarray]]


@dataclass(frozen=True)
class MagneticSystem:
    """Coordinate presentation of a magnetic Lagrangian system.

    `bform(q, p)` returns blocks (B_QQ, B_QP, B_PP); None means the zero
    form.  Analytic derivative callables are optional; missing first
    derivatives fall back to central differences of the Lagrangian and
    missing second derivatives to differences of the best available first
    derivative.
    """
    n: int
    k: int
    lagrangian: Callable[[np.ndarray, np.ndarray, np.ndarray], float]
    bform: BlockForm | None = None
    dL_dq: Callable | None = None
    dL_dv: Callable | None = None
    dL_dp: Callable | None = None
    d2L_dv_dv: Callable | None = None
    d2L_dv_dq: Callable | None = None
    d2L_dv_dp: Callable | None = None
    # Set when bform does not depend on the state; lets the integrator hoist
    # the blocks and their factorization out of the stepping loop.
    constant_bform: bool = False
    name: str = ""

    # -- derivative supply ---------------------------------------------

    def value(self, q, v, p) -> float:
        return float(self.lagrangian(q, v, p))

    def grad_q(self, q, v, p) -> np.ndarray:
        if self.dL_dq is not None:
            return np.asarray(self.dL_dq(q, v, p), dtype=float)
        return numerics.fd_gradient(lambda z: self.value(z, v, p), q)

    def grad_v(self, q, v, p) -> np.ndarray:
        if self.dL_dv is not None:
            return np.asarray(self.dL_dv(q, v, p), dtype=float)
        return numerics.fd_gradient(lambda z: self.value(q, z, p), v)

    def grad_p(self, q, v, p) -> np.ndarray:
        if self.k == 0:
            return np.zeros(0)
        if self.dL_dp is not None:
            return np.asarray(self.dL_dp(q, v, p), dtype=float)
        return numerics.fd_gradient(lambda z: self.value(q, v, z), p)

    def hess_vv(self, q, v, p) -> np.ndarray:
        if self.d2L_dv_dv is not None:
            return np.asarray(self.d2L_dv_dv(q, v, p), dtype=float)
        if self.dL_dv is not None:
            return numerics.fd_jacobian(lambda z: self.grad_v(q, z, p), v)
        return numerics.fd_hessian(lambda z: self.value(q, z, p), v)

    def hess_vq(self, q, v, p) -> np.ndarray:
        """Matrix with entries d2L / dv_i dq_j."""
        if self.d2L_dv_dq is not None:
            return np.asarray(self.d2L_dv_dq(q, v, p), dtype=float)
        return numerics.fd_jacobian(
            lambda z: self.grad_v(z, v, p), q,
            h0=numerics.H_GRADIENT if self.dL_dv else numerics.H_SECOND)

    def hess_vp(self, q, v, p) -> np.ndarray:
        """Matrix with entries d2L / dv_i dp_a."""
        if self.k == 0:
            return np.zeros((self.n, 0))
        if self.d2L_dv_dp is not None:
            return np.asarray(self.d2L_dv_dp(q, v, p), dtype=float)
        return numerics.fd_jacobian(
            lambda z: self.grad_v(q, v, z), p,
            h0=numerics.H_GRADIENT if self.dL_dv else numerics.H_SECOND)

    def bblocks(self, q, p) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        if self.bform is None:
            return (np.zeros((self.n, self.n)), np.zeros((self.n, self.k)),
                    np.zeros((self.k, self.k)))
        bqq, bqp, bpp = self.bform(q, p)
        bqq = np.asarray(bqq, dtype=float).reshape(self.n, self.n)
        bqp = np.asarray(bqp, dtype=float).reshape(self.n, self.k)
        bpp = np.asarray(bpp, dtype=float).reshape(self.k, self.k)
        if not np.array_equal(bqq, -bqq.T):
            raise ValueError("B_QQ block must be exactly antisymmetric")
        if not np.array_equal(bpp, -bpp.T):
            raise ValueError("B_PP block must be exactly antisymmetric")
        return bqq, bqp, bpp

    def full_bmatrix(self, q, p) -> np.ndarray:
        """The 2-form as one antisymmetric matrix over (q, p) coordinates."""
        bqq, bqp, bpp = self.bblocks(q, p)
        top = np.hstack([bqq, bqp])
        bottom = np.hstack([-bqp.T, bpp])
        return np.vstack([top, bottom])


def legendre(sys: MagneticSystem, s: MagLagState) -> np.ndarray:
    """Base-velocity fibre derivative alpha_i = dL/dv^i."""
    _check_state(sys, s)
    alpha = sys.grad_v(s.q, s.v, s.p)
    if not np.all(np.isfinite(alpha)):
        raise ValueError("non-finite Legendre transform")
    return alpha


def energy(sys: MagneticSystem, s: MagLagState) -> float:
    """E = <dL/dv, v> - L."""
    _check_state(sys, s)
    return float(legendre(sys, s) @ s.v - sys.value(s.q, s.v, s.p))


def _check_state(sys: MagneticSystem, s: MagLagState) -> None:
    if s.q.size != sys.n or s.v.size != sys.n or s.p.size != sys.k:
        raise ValueError(
            f"state dims (q={s.q.size}, v={s.v.size}, p={s.p.size}) do not "
            f"match system (n={sys.n}, k={sys.k})")


def vector_field(sys: MagneticSystem, s: MagLagState
                 ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Right-hand side (qdot, qddot, pdot) of the mixed equations of motion."""
    _check_state(sys, s)
    q, v, p = s.q, s.v, s.p
    bqq, bqp, bpp = sys.bblocks(q, p)

    if sys.k > 0:
        det_bpp = np.linalg.det(bpp)
        if abs(det_bpp) <= DET_FLOOR:
            raise RegularityError(
                f"singular fibre block: |det B_PP| = {abs(det_bpp):.3e} <= {DET_FLOOR}")
        pdot = np.linalg.solve(bpp, bqp.T @ v - sys.grad_p(q, v, p))
    else:
        pdot = np.zeros(0)

    hess = sys.hess_vv(q, v, p)
    det_h = np.linalg.det(hess)
    if abs(det_h) <= DET_FLOOR:
        raise RegularityError(
            f"singular velocity Hessian: |det d2L/dv2| = {abs(det_h):.3e} <= {DET_FLOOR}")
    rhs = (sys.grad_q(q, v, p) + bqq @ v + bqp @ pdot
           - sys.hess_vq(q, v, p) @ v - sys.hess_vp(q, v, p) @ pdot)
    a = np.linalg.solve(hess, rhs)
    return v, a, pdot


def pack(s: MagLagState) -> np.ndarray:
    return np.concatenate([s.q, s.v, s.p])


def unpack(sys: MagneticSystem, y: np.ndarray) -> MagLagState:
    n, k = sys.n, sys.k
    return MagLagState(y[:n], y[n:2 * n], y[2 * n:2 * n + k])


def state_columns(sys: MagneticSystem) -> tuple[str, ...]:
    return tuple([f"q{i}" for i in range(sys.n)]
                 + [f"v{i}" for i in range(sys.n)]
                 + [f"p{a}" for a in range(sys.k)])


def _field_factory(sys: MagneticSystem, s0: MagLagState):
    """Flat-state right-hand side with the derivative supply hoisted.

    Block antisymmetry is validated once on the initial state; the loop
    keeps the pointwise regularity determinant checks.
    """
    n, k = sys.n, sys.k
    grad_q, grad_p = sys.grad_q, sys.grad_p
    hess_vv, hess_vq, hess_vp = sys.hess_vv, sys.hess_vq, sys.hess_vp
    sys.bblocks(s0.q, s0.p)
    if sys.bform is None or sys.constant_bform:
        bqq0, bqp0, bpp0 = sys.bblocks(s0.q, s0.p)
        blocks = lambda q, p: (bqq0, bqp0, bpp0)  # noqa: E731
        bpp_solve = None
        if k > 0:
            det = np.linalg.det(bpp0)
            if abs(det) <= DET_FLOOR:
                raise RegularityError(
                    f"singular fibre block: |det B_PP| = {abs(det):.3e} <= {DET_FLOOR}")
            bpp_inv = np.linalg.inv(bpp0)
            bpp_solve = lambda rhs: bpp_inv @ rhs  # noqa: E731
    else:
        blocks = sys.bform

        def bpp_solve_var(bpp, rhs):
            det = np.linalg.det(bpp)
            if abs(det) <= DET_FLOOR:
                raise RegularityError(
                    f"singular fibre block: |det B_PP| = {abs(det):.3e} <= {DET_FLOOR}")
            return np.linalg.solve(bpp, rhs)

        bpp_solve = None

    def field(t: float, y: np.ndarray) -> np.ndarray:
        q = y[:n]
        v = y[n:2 * n]
        p = y[2 * n:]
        bqq, bqp, bpp = blocks(q, p)
        if k > 0:
            rhs_p = bqp.T @ v - grad_p(q, v, p)
            if bpp_solve is not None:
                pdot = bpp_solve(rhs_p)
            else:
                try:
                    pdot = bpp_solve_var(bpp, rhs_p)
                except RegularityError as exc:
                    raise RegularityError(f"{exc} at t = {t:.6g}") from exc
        else:
            pdot = np.zeros(0)
        hess = hess_vv(q, v, p)
        det_h = np.linalg.det(hess)
        if abs(det_h) <= DET_FLOOR:
            raise RegularityError(
                f"singular velocity Hessian: |det d2L/dv2| = {abs(det_h):.3e} "
                f"<= {DET_FLOOR} at t = {t:.6g}")
        rhs = (grad_q(q, v, p) + bqq @ v + bqp @ pdot
               - hess_vq(q, v, p) @ v - hess_vp(q, v, p) @ pdot)
        return np.concatenate([v, np.linalg.solve(hess, rhs), pdot])

    return field


def integrate(sys: MagneticSystem, s0: MagLagState, t_end: float,
              stepper: StepperChoice, t0: float = 0.0) -> Trajectory:
    """Integrate the mixed equations; the report records the energy drift.

    A regularity failure mid-trajectory aborts with the offending time in
    the error message.
    """
    _check_state(sys, s0)
    vector_field(sys, s0)  # fail fast on an irregular initial state
    field = _field_factory(sys, s0)
    times, states = numerics.integrate_ode(field, pack(s0), t0, t_end, stepper)
    e0 = energy(sys, s0)
    stride = max(1, len(states) // 400)
    sampled = list(states[::stride]) + [states[-1]]
    drift = max(abs(energy(sys, unpack(sys, y)) - e0) for y in sampled)
    report = InvariantReport({"energy_drift": drift})
    return Trajectory(times, states, state_columns(sys), report)


def check_closedness(sys: MagneticSystem, sample_states: Sequence[MagLagState],
                     fd_step: float = 1e-4) -> float:
    """Maximum |dB| component over the samples, by central differences.

    Closedness of the magnetic form is an input requirement; this is a
    diagnostic for user-supplied forms.
    """
    if fd_step <= 0:
        raise ValueError("fd_step must be positive")
    dim = sys.n + sys.k

    def b_at(z: np.ndarray) -> np.ndarray:
        return sys.full_bmatrix(z[:sys.n], z[sys.n:])

    worst = 0.0
    for s in sample_states:
        z = np.concatenate([s.q, s.p])
        h = fd_step * np.maximum(1.0, np.abs(z))
        db = np.zeros((dim, dim, dim))
        grads = []
        for a in range(dim):
            e = np.zeros(dim)
            e[a] = h[a]
            grads.append((b_at(z + e) - b_at(z - e)) / (2.0 * h[a]))
        for a in range(dim):
            for b in range(a + 1, dim):
                for c in range(b + 1, dim):
                    val = grads[a][b, c] + grads[b][c, a] + grads[c][a, b]
                    worst = max(worst, abs(val))
    return worst


def symplectic_form_matrix(sys: MagneticSystem, q, v, p) -> np.ndarray:
    """Local matrix of the system 2-form on (q, v, p) tangents.

    Assembled from d(dL/dv_i) ^ dq^i plus the magnetic blocks; evaluating
    it on a pair of tangent vectors is u^T M w.
    """
    q = np.atleast_1d(np.asarray(q, dtype=float))
    v = np.atleast_1d(np.asarray(v, dtype=float))
    p = np.atleast_1d(np.asarray(p, dtype=float)) if np.size(p) else np.zeros(0)
    n, k = sys.n, sys.k
    bqq, bqp, bpp = sys.bblocks(q, p)
    w = sys.hess_vq(q, v, p)      # w[i, j] = d2L / dv_i dq_j
    hvv = sys.hess_vv(q, v, p)
    g = sys.hess_vp(q, v, p)      # g[i, a] = d2L / dv_i dp_a
    dim = 2 * n + k
    m = np.zeros((dim, dim))
    m[:n, :n] = bqq + w.T - w
    m[:n, n:2 * n] = -hvv
    m[n:2 * n, :n] = hvv
    m[:n, 2 * n:] = bqp - g
    m[2 * n:, :n] = g.T - bqp.T
    m[2 * n:, 2 * n:] = bpp
    return m
