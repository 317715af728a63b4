"""Shared numerical kernel.

Finite differences, a dense Newton solver, fixed-step RK4 and the embedded
Fehlberg 4(5) pair, and the Lie-group reconstruction step.  Everything here
is stateless: all scratch is allocated per call.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

# Default finite-difference base steps.  Gradients use the smaller step;
# second derivatives and exterior derivatives need the larger one to keep
# rounding noise below truncation error.
H_GRADIENT = 1e-6
H_SECOND = 1e-4


class NewtonConvergenceError(RuntimeError):
    """Newton iteration failed; carries the iterate trace for diagnosis."""

    def __init__(self, message: str, trace: list[tuple[np.ndarray, float]]):
        super().__init__(message)
        self.trace = trace


class StepSizeError(RuntimeError):
    """Adaptive stepper drove the step size below its floor."""


def _steps(x: np.ndarray, h0: float) -> np.ndarray:
    return h0 * np.maximum(1.0, np.abs(x))


def fd_gradient(f: Callable[[np.ndarray], float], x: np.ndarray,
                h0: float = H_GRADIENT) -> np.ndarray:
    """Central-difference gradient with per-coordinate step h0*max(1,|x_i|)."""
    x = np.asarray(x, dtype=float)
    h = _steps(x, h0)
    out = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h[i]
        fp = f(x + e)
        fm = f(x - e)
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise ValueError(f"non-finite evaluation while differencing coordinate {i}")
        out[i] = (fp - fm) / (2.0 * h[i])
    return out


def fd_jacobian(f: Callable[[np.ndarray], np.ndarray], x: np.ndarray,
                h0: float = H_GRADIENT) -> np.ndarray:
    """Central-difference Jacobian of a vector-valued map, shape (m, n)."""
    x = np.asarray(x, dtype=float)
    h = _steps(x, h0)
    cols = []
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h[i]
        cols.append((np.asarray(f(x + e), dtype=float)
                     - np.asarray(f(x - e), dtype=float)) / (2.0 * h[i]))
    return np.column_stack(cols) if cols else np.zeros((0, 0))


def fd_hessian(f: Callable[[np.ndarray], float], x: np.ndarray,
               h0: float = H_SECOND) -> np.ndarray:
    """Nested central-difference Hessian (symmetric by construction)."""
    x = np.asarray(x, dtype=float)
    n = x.size
    h = _steps(x, h0)
    hess = np.empty((n, n))
    f0 = f(x)
    for i in range(n):
        ei = np.zeros(n)
        ei[i] = h[i]
        hess[i, i] = (f(x + ei) - 2.0 * f0 + f(x - ei)) / h[i] ** 2
        for j in range(i + 1, n):
            ej = np.zeros(n)
            ej[j] = h[j]
            val = (f(x + ei + ej) - f(x + ei - ej)
                   - f(x - ei + ej) + f(x - ei - ej)) / (4.0 * h[i] * h[j])
            hess[i, j] = val
            hess[j, i] = val
    return hess


def fd_exterior_derivative(one_form: Callable[[np.ndarray], np.ndarray],
                           z: np.ndarray, h0: float = H_SECOND) -> np.ndarray:
    """Exterior derivative of a coordinate 1-form by central differences.

    Returns the antisymmetric matrix D - D^T with D[a, b] = d(theta_b)/dz_a,
    i.e. (dtheta)_{ab} evaluated at z.
    """
    d = fd_jacobian(one_form, z, h0)  # d[b, a] = d theta_b / d z_a
    return d.T - d


@dataclass
class NewtonResult:
    x: np.ndarray
    iterations: int
    residual_norm: float
    trace: list[tuple[np.ndarray, float]] = field(default_factory=list)


def newton_solve(residual: Callable[[np.ndarray], np.ndarray],
                 seed: Sequence[float] | np.ndarray,
                 jacobian: Callable[[np.ndarray], np.ndarray] | None = None,
                 tol: float = 1e-10,
                 max_iter: int = 50) -> NewtonResult:
    """Dense Newton iteration with partial-pivoting solves.

    `jacobian` may be None, in which case it is approximated by central
    differences of the residual.  Divergence raises NewtonConvergenceError
    carrying the (iterate, residual norm) trace.
    """
    x = np.array(seed, dtype=float)
    jac = jacobian or (lambda z: fd_jacobian(residual, z))
    trace: list[tuple[np.ndarray, float]] = []
    for it in range(max_iter):
        r = np.asarray(residual(x), dtype=float)
        rnorm = float(np.linalg.norm(r))
        trace.append((x.copy(), rnorm))
        if not np.isfinite(rnorm):
            raise NewtonConvergenceError("non-finite residual", trace)
        if rnorm <= tol:
            return NewtonResult(x=x, iterations=it, residual_norm=rnorm, trace=trace)
        j = np.asarray(jac(x), dtype=float)
        try:
            dx = np.linalg.solve(j, -r)
        except np.linalg.LinAlgError as exc:
            raise NewtonConvergenceError(f"singular Jacobian: {exc}", trace) from exc
        x = x + dx
    r = np.asarray(residual(x), dtype=float)
    rnorm = float(np.linalg.norm(r))
    trace.append((x.copy(), rnorm))
    if rnorm <= tol:
        return NewtonResult(x=x, iterations=max_iter, residual_norm=rnorm, trace=trace)
    raise NewtonConvergenceError(
        f"no convergence after {max_iter} iterations (|r| = {rnorm:.3e})", trace)


@dataclass(frozen=True)
class StepperChoice:
    """Integrator selection: fixed-step RK4 or embedded RKF45.

    For rk4, `h` is the fixed step.  For rkf45, `h` is the initial step and
    (atol, rtol, h_min) control acceptance and underflow.
    """
    kind: str = "rk4"
    h: float = 1e-3
    atol: float = 1e-10
    rtol: float = 1e-10
    h_min: float = 1e-12

    def __post_init__(self):
        if self.kind not in ("rk4", "rkf45"):
            raise ValueError(f"unknown stepper kind {self.kind!r}")
        if self.h <= 0 or self.h_min <= 0:
            raise ValueError("step sizes must be positive")
        if self.atol < 1e-14 or self.rtol < 1e-14:
            raise ValueError("atol and rtol must be >= 1e-14")


Field = Callable[[float, np.ndarray], np.ndarray]


def rk4_step(f: Field, t: float, y: np.ndarray, h: float) -> np.ndarray:
    """One classical 4th-order Runge-Kutta step."""
    k1 = f(t, y)
    k2 = f(t + 0.5 * h, y + 0.5 * h * k1)
    k3 = f(t + 0.5 * h, y + 0.5 * h * k2)
    k4 = f(t + h, y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def rk4_integrate(f: Field, y0: np.ndarray, t0: float, t_end: float,
                  h: float) -> tuple[np.ndarray, np.ndarray]:
    """Fixed-step RK4 over [t0, t_end]; the last step is clamped to t_end."""
    y = np.array(y0, dtype=float)
    times = [t0]
    states = [y.copy()]
    t = t0
    n_steps = int(np.ceil((t_end - t0) / h - 1e-12))
    for k in range(n_steps):
        step = min(h, t_end - t)
        y = rk4_step(f, t, y, step)
        t = t0 + (k + 1) * h if k + 1 < n_steps else t_end
        times.append(t)
        states.append(y.copy())
    return np.array(times), np.array(states)


# Fehlberg 4(5) tableau.  The 4th-order solution is propagated; the
# difference to the 5th-order one drives step control.
_RKF_C = np.array([0.0, 1 / 4, 3 / 8, 12 / 13, 1.0, 1 / 2])
_RKF_A = [
    np.array([]),
    np.array([1 / 4]),
    np.array([3 / 32, 9 / 32]),
    np.array([1932 / 2197, -7200 / 2197, 7296 / 2197]),
    np.array([439 / 216, -8.0, 3680 / 513, -845 / 4104]),
    np.array([-8 / 27, 2.0, -3544 / 2565, 1859 / 4104, -11 / 40]),
]
_RKF_B4 = np.array([25 / 216, 0.0, 1408 / 2565, 2197 / 4104, -1 / 5, 0.0])
_RKF_B5 = np.array([16 / 135, 0.0, 6656 / 12825, 28561 / 56430, -9 / 50, 2 / 55])


def rkf45_integrate(f: Field, y0: np.ndarray, t0: float, t_end: float,
                    h_init: float = 1e-3, atol: float = 1e-10,
                    rtol: float = 1e-10, h_min: float = 1e-12
                    ) -> tuple[np.ndarray, np.ndarray]:
    """Embedded RKF45 with step rejection; returns accepted sample times."""
    y = np.array(y0, dtype=float)
    t = t0
    h = min(h_init, t_end - t0)
    times = [t0]
    states = [y.copy()]
    while t < t_end - 1e-14 * max(1.0, abs(t_end)):
        if h < h_min:
            raise StepSizeError(f"step size underflow at t = {t:.6g} (h = {h:.3e})")
        h = min(h, t_end - t)
        k = np.empty((6, y.size))
        k[0] = f(t, y)
        for s in range(1, 6):
            k[s] = f(t + _RKF_C[s] * h, y + h * (_RKF_A[s] @ k[:s]))
        y4 = y + h * (_RKF_B4 @ k)
        y5 = y + h * (_RKF_B5 @ k)
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y4))
        err = float(np.sqrt(np.mean(((y5 - y4) / scale) ** 2)))
        if err <= 1.0:
            t = t + h
            y = y4
            times.append(t)
            states.append(y.copy())
        factor = 0.9 * err ** -0.2 if err > 0 else 5.0
        h = h * min(5.0, max(0.2, factor))
    return np.array(times), np.array(states)


def integrate_ode(f: Field, y0: np.ndarray, t0: float, t_end: float,
                  stepper: StepperChoice) -> tuple[np.ndarray, np.ndarray]:
    """Dispatch on StepperChoice."""
    if stepper.kind == "rk4":
        return rk4_integrate(f, y0, t0, t_end, stepper.h)
    return rkf45_integrate(f, y0, t0, t_end, stepper.h,
                           stepper.atol, stepper.rtol, stepper.h_min)


def lie_step(spec, g, xi_mid, h: float):
    """Lie-group Euler-midpoint update g <- g * exp(h * xi_mid).

    Preserves group invariants (e.g. orthogonality of rotation payloads)
    through the group's own exponential and composition.
    """
    from . import lie  # local import; lie depends on this module
    return lie.compose(spec, g, lie.exponential(spec, xi_mid, h))
