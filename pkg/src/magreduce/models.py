"""Ready-made model systems: a rigid body carrying a rotor on its third
principal axis, and a pair of coupled planar bodies free to translate and
rotate (two independent oracles for the reduction machinery).

The rotor model reduces over the rotation group; its unreduced check runs
in a Z-X-Z Euler-angle chart with derivatives taken by finite differences,
deliberately independent of the reduced code path.  The planar model
reduces over the full planar Euclidean group or over translations only.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import lie, maglag, numerics, routh, semidirect
from .lie import CoVector
from .maglag import MagneticSystem, Trajectory
from .numerics import StepperChoice

GIMBAL_GUARD = 0.99


@dataclass(frozen=True)
class RotorParams:
    """Body inertia, rotor inertia (third axis live), and their sums."""
    inertia_body: np.ndarray = (3.0, 2.0, 1.0)
    inertia_rotor: np.ndarray = (0.0, 0.0, 1.0)

    def __post_init__(self):
        object.__setattr__(self, "inertia_body",
                           np.asarray(self.inertia_body, dtype=float))
        object.__setattr__(self, "inertia_rotor",
                           np.asarray(self.inertia_rotor, dtype=float))
        i, j = self.inertia_body, self.inertia_rotor
        if i.shape != (3,) or j.shape != (3,):
            raise ValueError("inertias must be 3-vectors")
        if np.any(i <= 0) or np.any(j < 0) or j[2] <= 0:
            raise ValueError("body inertia must be positive, rotor inertia "
                             "nonnegative with a positive third component")
        if not self.lam[2] > j[2]:
            raise ValueError("third-axis total inertia must exceed the rotor part")

    @property
    def lam(self) -> np.ndarray:
        return self.inertia_body + self.inertia_rotor


def rotor_lagrangian(params: RotorParams) -> routh.InvariantLagrangian:
    """Reduced-form rotor Lagrangian over the rotation group: quadratic in
    (rotor rate, body angular velocity) with constant metric and no
    potential."""
    lam = params.lam
    j3 = params.inertia_rotor[2]
    return routh.quadratic_invariant_lagrangian(
        sdim=1, group=lie.so3(),
        a_block=[[j3]],
        b_block=[[0.0, 0.0, j3]],
        c_block=np.diag(lam))


def rotor_reduced_system(params: RotorParams, m0: CoVector) -> routh.ReducedRouthSystem:
    """The reduced rotor at body momentum level m0 (left-invariant)."""
    if not isinstance(m0, CoVector) or len(m0) != 3:
        raise ValueError("m0 must be a CoVector of length 3")
    return routh.ReducedRouthSystem(rotor_lagrangian(params), mu=m0, side="left")


def rotor_reduced_field_closed_form(params: RotorParams, x, xdot, m: np.ndarray
                                    ) -> tuple[np.ndarray, float]:
    """Hand-expanded reduced equations (mdot, xddot), kept as an
    independent cross-check of the generic assembly."""
    lam = params.lam
    j3 = params.inertia_rotor[2]
    i3 = params.inertia_body[2]
    xd = float(np.atleast_1d(xdot)[0])
    m1, m2, m3 = m
    mdot = np.array([
        (1.0 / lam[2] - 1.0 / lam[1]) * m2 * m3 - (m2 * j3 / lam[2]) * xd,
        (1.0 / lam[0] - 1.0 / lam[2]) * m1 * m3 + (m1 * j3 / lam[2]) * xd,
        (1.0 / lam[1] - 1.0 / lam[0]) * m1 * m2,
    ])
    return mdot, float(-mdot[2] / i3)


# -- unreduced rotor in a Z-X-Z Euler chart ---------------------------------


def euler_zxz_matrix(angles: np.ndarray) -> np.ndarray:
    a, b, g = angles
    ca, sa = math.cos(a), math.sin(a)
    cb, sb = math.cos(b), math.sin(b)
    cg, sg = math.cos(g), math.sin(g)
    rz_a = np.array([[ca, -sa, 0.0], [sa, ca, 0.0], [0.0, 0.0, 1.0]])
    rx_b = np.array([[1.0, 0.0, 0.0], [0.0, cb, -sb], [0.0, sb, cb]])
    rz_g = np.array([[cg, -sg, 0.0], [sg, cg, 0.0], [0.0, 0.0, 1.0]])
    return rz_a @ rx_b @ rz_g


def euler_zxz_body_velocity(angles: np.ndarray, rates: np.ndarray) -> np.ndarray:
    """Body angular velocity of the Z-X-Z chart."""
    _, b, g = angles
    ad, bd, gd = rates
    sb, cb = math.sin(b), math.cos(b)
    sg, cg = math.sin(g), math.cos(g)
    return np.array([ad * sb * sg + bd * cg,
                     ad * sb * cg - bd * sg,
                     ad * cb + gd])


def rotor_chart_lagrangian(params: RotorParams) -> Callable:
    """Unreduced Lagrangian in chart coordinates (x, alpha, beta, gamma),
    vectorized over rows of (m, 4) coordinate/rate arrays for cheap
    finite-difference stencils; scalar 4-vectors also work."""
    l1, l2, l3 = params.lam
    j3 = params.inertia_rotor[2]

    def lag(q, qd):
        q = np.atleast_2d(q)
        qd = np.atleast_2d(qd)
        b, g = q[:, 2], q[:, 3]
        xd, ad, bd, gd = qd[:, 0], qd[:, 1], qd[:, 2], qd[:, 3]
        sb, cb = np.sin(b), np.cos(b)
        sg, cg = np.sin(g), np.cos(g)
        w1 = ad * sb * sg + bd * cg
        w2 = ad * sb * cg - bd * sg
        w3 = ad * cb + gd
        vals = 0.5 * (l1 * w1 * w1 + l2 * w2 * w2 + l3 * w3 * w3
                      + j3 * xd * xd) + j3 * xd * w3
        return vals if vals.size > 1 else float(vals[0])

    return lag


def _guard_gimbal(angles: np.ndarray) -> None:
    if abs(math.cos(angles[1])) >= GIMBAL_GUARD:
        raise ValueError(
            "Euler chart near gimbal lock (|cos beta| >= 0.99); restart the "
            "trajectory in a rotated chart")


# FD steps for the chart oracle.  The Lagrangian is exactly quadratic in
# the rates, so a wide rate stencil is truncation-free and keeps rounding
# noise down; angle stencils stay narrow.
_H_RATE = 1e-2
_H_RATE_GRAD = 1e-6
_H_ANGLE = 2e-4
_H_ANGLE_GRAD = 1e-5


_IDX4 = np.arange(4)


def _central_points(center: np.ndarray, h: np.ndarray) -> np.ndarray:
    pts = np.repeat(center[None, :], 8, axis=0)
    pts[2 * _IDX4, _IDX4] += h
    pts[2 * _IDX4 + 1, _IDX4] -= h
    return pts


def _grad_rates(lag, q, qd) -> np.ndarray:
    h = _H_RATE_GRAD * np.maximum(1.0, np.abs(qd))
    vals = lag(np.repeat(q[None, :], 8, axis=0), _central_points(qd, h))
    return (vals[0::2] - vals[1::2]) / (2.0 * h)


def _grad_q(lag, q, qd) -> np.ndarray:
    h = _H_ANGLE_GRAD * np.maximum(1.0, np.abs(q))
    vals = lag(_central_points(q, h), np.repeat(qd[None, :], 8, axis=0))
    return (vals[0::2] - vals[1::2]) / (2.0 * h)


def _mass_stencil() -> np.ndarray:
    # central stencils around the rate points (0, e0, .., e3)
    rate_pts = np.vstack([np.zeros(4), np.eye(4)])
    rows = [
        _central_points(base, np.full(4, _H_RATE_GRAD)) for base in rate_pts
    ]
    return np.vstack(rows)


_MASS_STENCIL = _mass_stencil()


def _mass_matrix(lag, q) -> tuple[np.ndarray, np.ndarray]:
    """Rate-gradient columns at unit rates; exact for a Lagrangian
    quadratic in the rates (up to the gradient stencil error)."""
    vals = lag(np.repeat(q[None, :], 40, axis=0), _MASS_STENCIL)
    grads = (vals[0::2] - vals[1::2]).reshape(5, 4) / (2.0 * _H_RATE_GRAD)
    return grads[1:].T - grads[0], grads[0]


def rotor_full_oracle(params: RotorParams, state: np.ndarray) -> np.ndarray:
    """Chart accelerations of the unreduced rotor by a finite-difference
    Euler-Lagrange solve: (d2L/dqd2) qdd = dL/dq - (d2L/dqd dq) qd."""
    state = np.asarray(state, dtype=float)
    q, qd = state[:4], state[4:]
    _guard_gimbal(q[1:])
    lag = rotor_chart_lagrangian(params)

    hv = _H_RATE * np.maximum(1.0, np.abs(qd))
    hq = _H_ANGLE * np.maximum(1.0, np.abs(q))
    qs = []
    qds = []
    for i in range(4):
        for j in range(4):
            for si in (1.0, -1.0):
                for sj in (1.0, -1.0):
                    r = qd.copy()
                    r[i] += si * hv[i]
                    r[j] += sj * hv[j]
                    qs.append(q)
                    qds.append(r)
    for i in range(4):
        for j in range(4):
            for si in (1.0, -1.0):
                for sj in (1.0, -1.0):
                    r = qd.copy()
                    r[i] += si * hv[i]
                    x = q.copy()
                    x[j] += sj * hq[j]
                    qs.append(x)
                    qds.append(r)
    vals = lag(np.array(qs), np.array(qds))
    hess = np.empty((4, 4))
    mixed = np.empty((4, 4))
    idx = 0
    for i in range(4):
        for j in range(4):
            pp, pm, mp, mm = vals[idx:idx + 4]
            hess[i, j] = (pp - pm - mp + mm) / (4.0 * hv[i] * hv[j])
            idx += 4
    for i in range(4):
        for j in range(4):
            pp, pm, mp, mm = vals[idx:idx + 4]
            mixed[i, j] = (pp - mp - pm + mm) / (4.0 * hv[i] * hq[j])
            idx += 4
    rhs = _grad_q(lag, q, qd) - mixed @ qd
    return np.linalg.solve(hess, rhs)


def rotor_full_trajectory(params: RotorParams, state0: np.ndarray, t_end: float,
                          stepper: StepperChoice) -> Trajectory:
    """Unreduced rotor trajectory in the Euler chart.

    Integrates in (coordinates, conjugate momenta): the momentum equation
    needs only first derivatives of the Lagrangian, which keeps the
    finite-difference noise per step near 1e-10.  Rates are recovered
    per sample by a linear solve (the Lagrangian is quadratic in rates).
    """
    state0 = np.asarray(state0, dtype=float)
    lag = rotor_chart_lagrangian(params)

    def rates_from(q, pi):
        mm, base = _mass_matrix(lag, q)
        return np.linalg.solve(mm, pi - base)

    q0, qd0 = state0[:4], state0[4:]
    _guard_gimbal(q0[1:])
    pi0 = _grad_rates(lag, q0, qd0)

    def field(t, y):
        q, pi = y[:4], y[4:]
        _guard_gimbal(q[1:])
        qd = rates_from(q, pi)
        return np.concatenate([qd, _grad_q(lag, q, qd)])

    times, ys = numerics.integrate_ode(field, np.concatenate([q0, pi0]),
                                       0.0, t_end, stepper)
    states = np.empty((len(times), 8))
    for i, y in enumerate(ys):
        states[i, :4] = y[:4]
        states[i, 4:] = rates_from(y[:4], y[4:])
    cols = ("x", "alpha", "beta", "gamma", "xdot", "alphadot", "betadot", "gammadot")
    return Trajectory(times, states, cols)


def rotor_chart_state(params: RotorParams, angles: np.ndarray, x: float,
                      xdot: float, omega: np.ndarray) -> np.ndarray:
    """Chart state with prescribed body angular velocity: inverts the
    Z-X-Z rate map (requires sin(beta) != 0)."""
    a, b, g = angles
    sb = math.sin(b)
    if abs(sb) < 1e-8:
        raise ValueError("cannot invert Euler rates at sin(beta) = 0")
    w1, w2, w3 = omega
    ad = (w1 * math.sin(g) + w2 * math.cos(g)) / sb
    bd = w1 * math.cos(g) - w2 * math.sin(g)
    gd = w3 - ad * math.cos(b)
    return np.array([x, a, b, g, xdot, ad, bd, gd])


def rotor_chart_state_from_momentum(params: RotorParams, m0: np.ndarray,
                                    x: float = 0.0, xdot: float = 0.0,
                                    alpha0: float = 0.3) -> np.ndarray:
    """Chart state realizing body momentum m0 with the conserved spatial
    momentum pointing along the vertical axis, which pins the middle Euler
    angle to cos(beta) = m3/|m| for the whole motion (a gimbal-safe chart
    whenever m3/|m| stays away from +-1)."""
    m0 = np.asarray(m0, dtype=float)
    norm = float(np.linalg.norm(m0))
    if norm == 0.0:
        raise ValueError("m0 must be nonzero")
    beta0 = math.acos(m0[2] / norm)
    gamma0 = math.atan2(m0[0], m0[1])
    lam = params.lam
    j3 = params.inertia_rotor[2]
    omega0 = np.array([m0[0] / lam[0], m0[1] / lam[1],
                       (m0[2] - j3 * xdot) / lam[2]])
    return rotor_chart_state(params, np.array([alpha0, beta0, gamma0]),
                             x, xdot, omega0)


def rotor_body_momentum(params: RotorParams, state: np.ndarray) -> np.ndarray:
    """Body momentum of a chart state (the reduced variable)."""
    state = np.asarray(state, dtype=float)
    lam = params.lam
    j3 = params.inertia_rotor[2]
    w = euler_zxz_body_velocity(state[1:4], state[5:])
    return np.array([lam[0] * w[0], lam[1] * w[1], lam[2] * w[2] + j3 * state[4]])


def rotor_spatial_momentum(params: RotorParams, state: np.ndarray) -> np.ndarray:
    """Conserved momentum of the rotation symmetry along chart states."""
    state = np.asarray(state, dtype=float)
    return euler_zxz_matrix(state[1:4]) @ rotor_body_momentum(params, state)


# ---------------------------------------------------------------------------
# coupled planar bodies


def _default_potential(c: float = 1.0):
    return (lambda phi: c * (1.0 - math.cos(float(np.atleast_1d(phi)[0]))),
            lambda phi: np.array([c * math.sin(float(np.atleast_1d(phi)[0]))]))


@dataclass(frozen=True)
class BeanieParams:
    """Mass, the two body inertias, and the shape potential (default
    1 - cos of the relative angle)."""
    m: float = 1.0
    i1: float = 2.0
    i2: float = 1.0
    potential: Callable | None = None
    dpotential: Callable | None = None

    def __post_init__(self):
        if self.m <= 0 or self.i1 <= 0 or self.i2 <= 0:
            raise ValueError("mass and inertias must be positive")
        if self.potential is None:
            v, dv = _default_potential()
            object.__setattr__(self, "potential", v)
            object.__setattr__(self, "dpotential", dv)
        elif self.dpotential is None:
            object.__setattr__(
                self, "dpotential",
                lambda phi: numerics.fd_gradient(self.potential, np.atleast_1d(phi)))


def beanie_gv_lagrangian(params: BeanieParams) -> semidirect.SemiDirectLagrangian:
    """Reduced-form Lagrangian over the planar Euclidean group."""
    i1, i2, m = params.i1, params.i2, params.m
    return semidirect.mechanical_semidirect_lagrangian(
        sdim=1, gv=lie.se2(),
        a_block=[[i2]],
        b_block=[[i2, 0.0, 0.0]],
        c_block=np.diag([i1 + i2, m, m]),
        potential=params.potential,
        dpotential=params.dpotential)


def beanie_full_field(params: BeanieParams, state: np.ndarray) -> np.ndarray:
    """Accelerations (phidd, thetadd, xdd, ydd) of the full system in
    normal form: the translations are free, the absolute rotation feels
    +V'/I1, and the relative angle -(I1+I2)/(I1 I2) V'."""
    state = np.asarray(state, dtype=float)
    vp = float(params.dpotential(state[:1])[0])
    return np.array([-(params.i1 + params.i2) / (params.i1 * params.i2) * vp,
                     vp / params.i1, 0.0, 0.0])


def beanie_full_trajectory(params: BeanieParams, state0: np.ndarray,
                           t_end: float, stepper: StepperChoice) -> Trajectory:
    """Integrate the full 8-dimensional system (phi, theta, x, y, rates)."""
    state0 = np.asarray(state0, dtype=float)

    def field(t, y):
        return np.concatenate([y[4:], beanie_full_field(params, y)])

    times, states = numerics.integrate_ode(field, state0, 0.0, t_end, stepper)
    cols = ("phi", "theta", "x", "y", "phidot", "thetadot", "xdot", "ydot")
    return Trajectory(times, states, cols)


def beanie_momenta(params: BeanieParams, state: np.ndarray) -> tuple[float, complex]:
    """Rotational momentum nu and body-frame translational momentum b of a
    full state."""
    state = np.asarray(state, dtype=float)
    phid, thetad, xd, yd = state[4:]
    nu = (params.i1 + params.i2) * thetad + params.i2 * phid
    a = params.m * complex(xd, yd)
    b = complex(math.cos(-state[1]), math.sin(-state[1])) * a
    return float(nu), b


def beanie_chart_system(params: BeanieParams, mu: float, a: complex) -> MagneticSystem:
    """Orbit-chart presentation of the full-group reduction: base phi,
    fibre (alpha, nu) with b = |a| e^{i alpha}, constant symplectic fibre
    block.  |a| enters only through an additive constant."""
    if a == 0:
        raise ValueError("dual action not onto: a must be nonzero")
    i1, i2, m = params.i1, params.i2, params.m
    itot = i1 + i2
    red = i1 * i2 / itot
    const = abs(a) ** 2 / (2.0 * m)
    pot, dpot = params.potential, params.dpotential

    def lagrangian(q, v, p):
        nu = p[1]
        return (0.5 * red * v[0] ** 2 + (i2 / itot) * nu * v[0]
                - pot(q) - const - 0.5 * nu ** 2 / itot)

    bqq = np.zeros((1, 1))
    bqp = np.zeros((1, 2))
    bpp = np.array([[0.0, 1.0], [-1.0, 0.0]])
    hvv = np.array([[red]])
    hvq = np.zeros((1, 1))
    hvp = np.array([[0.0, i2 / itot]])
    return MagneticSystem(
        n=1, k=2, lagrangian=lagrangian,
        bform=lambda q, p: (bqq, bqp, bpp),
        dL_dq=lambda q, v, p: -np.asarray(dpot(q), dtype=float),
        dL_dv=lambda q, v, p: np.array([red * v[0] + (i2 / itot) * p[1]]),
        dL_dp=lambda q, v, p: np.array([0.0, (i2 / itot) * v[0] - p[1] / itot]),
        d2L_dv_dv=lambda q, v, p: hvv,
        d2L_dv_dq=lambda q, v, p: hvq,
        d2L_dv_dp=lambda q, v, p: hvp,
        constant_bform=True,
        name="planar_pair_orbit_chart")


def beanie_r2_system(params: BeanieParams, a: complex) -> MagneticSystem:
    """Translation-reduced system on (phi, theta): an ordinary Lagrangian
    system (no fibre, no magnetic term), written from its closed form as an
    independent cross-check of the generic builder."""
    i1, i2, m = params.i1, params.i2, params.m
    const = abs(a) ** 2 / (2.0 * m)
    pot, dpot = params.potential, params.dpotential

    def lagrangian(q, v, p):
        return (0.5 * i1 * v[1] ** 2 + 0.5 * i2 * (v[1] + v[0]) ** 2
                - pot(q[:1]) - const)

    hvv = np.array([[i2, i2], [i2, i1 + i2]])
    hvq = np.zeros((2, 2))
    return MagneticSystem(
        n=2, k=0, lagrangian=lagrangian,
        dL_dq=lambda q, v, p: np.array([-float(dpot(q[:1])[0]), 0.0]),
        dL_dv=lambda q, v, p: np.array([i2 * (v[1] + v[0]),
                                        i1 * v[1] + i2 * (v[1] + v[0])]),
        d2L_dv_dv=lambda q, v, p: hvv,
        d2L_dv_dq=lambda q, v, p: hvq,
        constant_bform=True,
        name="planar_pair_translation_reduced")
