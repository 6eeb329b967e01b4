"""Shared numerical kernels.

Adaptive ODE integration and adaptive quadrature are thin contracts over
scipy (solve_ivp, quad); the uniform-grid composite rules and finite
difference stencils used throughout the package live here as well.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import integrate as _sint

from .errors import BlowUpError, QuadratureError, RangeError, StiffnessError

__all__ = [
    "Tolerances",
    "OdeTrajectory",
    "integrate_ode",
    "quad_adaptive",
    "cumulative_integral",
    "integrate_table",
    "fd_weights",
    "deriv_uniform",
]

DEFAULT_OVERFLOW_GUARD = 1e12


@dataclass(frozen=True)
class Tolerances:
    abs_tol: float = 1e-12
    rel_tol: float = 1e-10
    max_steps: int = 1_000_000

    def __post_init__(self):
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise RangeError("tolerances must be positive")
        if self.max_steps < 1:
            raise RangeError("max_steps must be >= 1")


@dataclass
class OdeTrajectory:
    """Accepted steps plus a dense-output interpolant."""

    s: np.ndarray
    y: np.ndarray          # shape (n_states, n_points)
    sol: Callable          # vectorized dense evaluation, sol(s) -> (n_states, ...)
    nfev: int = 0
    naccepted: int = field(default=0)


class _BudgetExhausted(Exception):
    pass


def integrate_ode(
    rhs: Callable,
    y0,
    s_span: tuple[float, float],
    tol: Tolerances = Tolerances(),
    method: str = "rk45",
    jac: Optional[Callable] = None,
    overflow_guard: float = DEFAULT_OVERFLOW_GUARD,
) -> OdeTrajectory:
    """Adaptively integrate y' = rhs(s, y) over s_span with dense output.

    method "rk45" is an embedded explicit 4(5) pair; "radau" is the implicit
    alternative for ranges where the linearized rate makes explicit stepping
    hopeless.  Raises BlowUpError when any state component crosses the
    overflow guard (bounded-state problems make that a bug signal, not a
    numerical event) and StiffnessError when the step size underflows or the
    evaluation budget runs out.
    """
    y0 = np.atleast_1d(np.asarray(y0, dtype=float))
    if not np.all(np.isfinite(y0)):
        raise RangeError("initial state must be finite")
    scipy_method = {"rk45": "RK45", "radau": "Radau"}.get(method)
    if scipy_method is None:
        raise RangeError(f"unknown method {method!r}")

    budget = {"nfev": 0}

    def wrapped(s, y):
        budget["nfev"] += 1
        if budget["nfev"] > 50 * tol.max_steps:
            raise _BudgetExhausted
        return rhs(s, y)

    def guard(s, y):
        return overflow_guard - float(np.max(np.abs(y)))

    guard.terminal = True
    guard.direction = -1

    kwargs = dict(
        method=scipy_method,
        rtol=tol.rel_tol,
        atol=tol.abs_tol,
        dense_output=True,
        events=[guard],
    )
    if jac is not None and scipy_method == "Radau":
        kwargs["jac"] = jac
    try:
        res = _sint.solve_ivp(wrapped, s_span, y0, **kwargs)
    except _BudgetExhausted:
        raise StiffnessError(
            f"evaluation budget exhausted ({50 * tol.max_steps} rhs calls) on span {s_span}"
        )
    if res.status == 1:
        raise BlowUpError(
            f"state exceeded overflow guard {overflow_guard:g} at s={res.t_events[0][0]:.6g}"
        )
    if not res.success:
        raise StiffnessError(f"integrator failed on span {s_span}: {res.message}")
    return OdeTrajectory(s=res.t, y=res.y, sol=res.sol, nfev=budget["nfev"], naccepted=res.t.size)


def quad_adaptive(f: Callable, a: float, b: float, tol: float = 1e-10, limit: int = 200) -> float:
    """Adaptive Gauss-Kronrod integral of f over [a, b]; b may be math.inf.

    Callers with semi-infinite ranges and known analytic tails are expected to
    split at a finite point and add the closed-form tail; the infinite-range
    path here is for integrands that decay fast enough on their own.
    """
    if not tol > 0:
        raise RangeError("tol must be positive")
    value, abserr, info, *rest = _sint.quad(
        f, a, b, epsabs=tol, epsrel=tol, limit=limit, full_output=True
    )
    if rest:
        raise QuadratureError(f"quadrature did not converge on [{a}, {b}]: {rest[0]}")
    if abserr > 10.0 * tol * (1.0 + abs(value)):
        raise QuadratureError(
            f"quadrature error estimate {abserr:g} exceeds tolerance {tol:g} on [{a}, {b}]"
        )
    return value


# --- uniform-grid composite rules -------------------------------------------

# Interval weights exact for cubics: interior interval [x_i, x_{i+1}] uses the
# cubic through nodes i-1..i+2; end intervals use one-sided cubics.
_W_FIRST = np.array([9.0, 19.0, -5.0, 1.0]) / 24.0
_W_MID = np.array([-1.0, 13.0, 13.0, -1.0]) / 24.0
_W_LAST = _W_FIRST[::-1]


def _interval_increments(y: np.ndarray, dx: float) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    n = y.shape[0]
    if n < 4:
        raise RangeError("composite rule needs at least 4 nodes")
    inc = np.empty(n - 1)
    inc[0] = _W_FIRST @ y[:4]
    inc[-1] = _W_LAST @ y[-4:]
    if n > 2:
        inc[1:-1] = _W_MID[0] * y[:-3] + _W_MID[1] * y[1:-2] + _W_MID[2] * y[2:-1] + _W_MID[3] * y[3:]
    return inc * dx


def cumulative_integral(y, dx: float, direction: str = "forward") -> np.ndarray:
    """Fourth-order cumulative integral of uniformly sampled values.

    forward:  out[i] = integral from x_0 to x_i   (out[0] = 0)
    backward: out[i] = integral from x_i to x_end (out[-1] = 0)
    """
    inc = _interval_increments(y, dx)
    out = np.empty(len(inc) + 1)
    if direction == "forward":
        out[0] = 0.0
        np.cumsum(inc, out=out[1:])
    elif direction == "backward":
        out[-1] = 0.0
        out[:-1] = np.cumsum(inc[::-1])[::-1]
    else:
        raise RangeError(f"unknown direction {direction!r}")
    return out


def integrate_table(y, dx: float) -> float:
    """Integral over the whole uniform table (fourth order)."""
    return float(np.sum(_interval_increments(y, dx)))


# --- finite-difference stencils ----------------------------------------------


def fd_weights(offsets, deriv: int) -> np.ndarray:
    """Stencil weights for d^deriv/dx^deriv at 0 from nodes at the given offsets.

    Solves the Vandermonde moment system; exact for polynomials up to
    degree len(offsets)-1.  Weights are in units of dx^-deriv.
    """
    offsets = np.asarray(offsets, dtype=float)
    k = offsets.size
    if deriv >= k:
        raise RangeError("need more stencil points than the derivative order")
    A = np.vander(offsets, k, increasing=True).T
    b = np.zeros(k)
    b[deriv] = math.factorial(deriv)
    return np.linalg.solve(A, b)


def deriv_uniform(y, dx: float, deriv: int = 1, npoints: int = 5) -> np.ndarray:
    """Derivative of uniformly sampled values, one-sided stencils at the edges.

    npoints=5 gives 4th-order first derivatives and 3rd/4th-order second
    derivatives; every stencil spans npoints consecutive nodes.
    """
    y = np.asarray(y, dtype=float)
    n = y.size
    if n < npoints:
        raise RangeError(f"need at least {npoints} nodes")
    half = npoints // 2
    out = np.empty(n)
    center = fd_weights(np.arange(npoints) - half, deriv)
    # correlate applies the stencil in natural order: out[i] = sum_j y[i+j] w[j]
    out[half:n - half] = np.correlate(y, center, mode="valid")
    for i in range(half):
        out[i] = fd_weights(np.arange(npoints) - i, deriv) @ y[:npoints]
        j = n - 1 - i
        out[j] = fd_weights(np.arange(npoints) - (npoints - 1 - i), deriv) @ y[-npoints:]
    return out / dx ** deriv
