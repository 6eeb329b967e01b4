"""Radial finite-difference solver for u_t = Delta(u^m/m) on a truncated
annulus, plus the self-similar rescaling operator and the weighted-contraction
and large-time-convergence experiments.

The domain is [r_in, r_out] with Dirichlet traces at both ends, discretized on
a log-uniform grid.  In x = log r the radial operator reads

    Delta(u^m/m) = e^(-2x) [ (u^m/m)_xx + (n-2) (u^m/m)_x ],

which resolves power-law fields uniformly per decade.  Time stepping is fully
implicit (backward Euler, theta = 1) with a damped Newton inner solve; the
Jacobian is tridiagonal and the centered stencil is an M-matrix whenever
dx < 2/(n-2), which is what makes the discrete comparison and weighted-L1
contraction properties of the continuous flow carry over to the scheme.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.linalg import solve_banded

from .errors import (
    ConfigError,
    GridMismatchError,
    NewtonDivergence,
    PositivityError,
    RangeError,
    SandwichViolationError,
    ToleranceError,
)
from .params import ParamSet
from .profile import Profile, profile_interpolator, rescale_profile
from .weight import WeightFunction, weighted_l1_distance

__all__ = [
    "RadialField",
    "RescaledField",
    "EvolveConfig",
    "EvolveStats",
    "ContractionResult",
    "ConvergenceResult",
    "log_grid",
    "barenblatt",
    "make_self_similar_field",
    "evolve",
    "rescale_field",
    "power_bump_initial",
    "lambda_for_amplitude",
    "random_sandwiched_pair",
    "contraction_experiment",
    "convergence_experiment",
]

# Relative slack used when validating sandwich envelopes; field values span
# many decades, so all envelope comparisons are relative.
_SANDWICH_RTOL = 1e-8


def log_grid(r_in: float, r_out: float, n_nodes: int) -> np.ndarray:
    """Log-uniform grid on [r_in, r_out], the node layout the solver requires."""
    if not 0.0 < r_in < r_out:
        raise RangeError(f"need 0 < r_in < r_out, got [{r_in}, {r_out}]")
    if n_nodes < 4:
        raise ConfigError(f"need at least 4 nodes, got {n_nodes}")
    return np.exp(np.linspace(math.log(r_in), math.log(r_out), int(n_nodes)))


@dataclass(frozen=True)
class EvolveStats:
    """Per-run counters recorded by the time stepper.

    ab_max is the largest relative margin of the discrete decay bound
    (u_new - u_old)/dt <= u_new / ((1-m) t_new): the recorded quantity is
    ((u_new - u_old)/dt - bound)/bound maximized over interior nodes and
    accepted steps, so any value <= 0 means the bound held strictly.
    """

    t_start: float
    t_end: float
    n_steps: int
    n_rejected: int
    newton_total: int
    dt_final: float
    min_u: float
    ab_max: float


@dataclass(frozen=True)
class EvolveConfig:
    """Controls for the implicit one-step scheme (theta = 1, backward Euler).

    newton_tol is relative: the inner iteration stops once both the scaled
    residual and the scaled increment drop below it.  dt_rel_max, when set,
    caps the step at dt_rel_max * t, which is the natural accuracy knob for
    runs spanning decades of time.
    """

    dt_init: float = 1e-4
    dt_max: float = 0.05
    dt_min: float = 1e-12
    dt_rel_max: Optional[float] = None
    newton_tol: float = 1e-11
    newton_max: int = 12
    max_backtrack: int = 10
    dt_shrink: float = 0.5
    dt_grow: float = 1.3
    grow_threshold: int = 3
    max_steps: int = 2_000_000
    scheme: str = "backward-euler"

    def __post_init__(self):
        if self.scheme != "backward-euler":
            raise ConfigError(f"only the implicit one-step scheme is supported, got {self.scheme!r}")
        for name in ("dt_init", "dt_max", "dt_min", "newton_tol", "dt_shrink", "dt_grow"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.dt_rel_max is not None and not self.dt_rel_max > 0:
            raise ConfigError("dt_rel_max must be positive when set")
        if not self.dt_min <= self.dt_init <= self.dt_max:
            raise ConfigError("need dt_min <= dt_init <= dt_max")
        if self.dt_shrink >= 1.0 or self.dt_grow <= 1.0:
            raise ConfigError("need dt_shrink < 1 < dt_grow")
        if self.newton_max < 1 or self.max_backtrack < 1 or self.max_steps < 1:
            raise ConfigError("iteration budgets must be at least 1")


@dataclass(frozen=True)
class RadialField:
    """Radial field sampled on a log-uniform grid with Dirichlet traces.

    bc holds the (left, right) boundary values as functions of time; they are
    evaluated at the *new* time of each implicit step.  params carries the
    self-similar exponents so the field knows how to rescale itself.
    """

    r_grid: np.ndarray
    u: np.ndarray
    t: float
    bc: tuple[Callable[[float], float], Callable[[float], float]]
    params: Optional[ParamSet] = None
    stats: Optional[EvolveStats] = None

    def __post_init__(self):
        r = np.asarray(self.r_grid, dtype=float)
        u = np.asarray(self.u, dtype=float)
        object.__setattr__(self, "r_grid", r)
        object.__setattr__(self, "u", u)
        if r.ndim != 1 or u.shape != r.shape:
            raise ConfigError("r_grid and u must be 1-d arrays of equal length")
        if not np.all(np.diff(r) > 0) or not r[0] > 0:
            raise ConfigError("grid must be positive and strictly increasing")
        if not np.all(u > 0):
            raise ConfigError("field values must be strictly positive")
        if not self.t > 0:
            raise RangeError(f"time must be positive, got {self.t}")


@dataclass(frozen=True)
class RescaledField:
    """Similarity-rescaled snapshot: u here is t^alpha u(t^beta y, t) on y_grid."""

    y_grid: np.ndarray
    u: np.ndarray
    tau: float
    t: float
    params: Optional[ParamSet] = None

    @property
    def r_grid(self) -> np.ndarray:
        # lets weighted_l1_distance treat the rescaled field like a radial one
        return self.y_grid


@dataclass(frozen=True)
class ContractionResult:
    """Weighted distances between an evolved pair at the sampled times."""

    times: np.ndarray
    tau: np.ndarray
    dist_abs: np.ndarray
    dist_pos: np.ndarray
    dist_sup_compact: np.ndarray
    u_final: RadialField
    v_final: RadialField


@dataclass(frozen=True)
class ConvergenceResult:
    """Distance of the rescaled evolution to the limit profile along tau_grid."""

    tau_grid: np.ndarray
    t_grid: np.ndarray
    dist_l1w: np.ndarray
    dist_sup_compact: np.ndarray
    norm_ref: float
    lam0: float
    lam1: float
    lam2: float
    y_grid: np.ndarray
    f_ref: np.ndarray
    u0_l1_gap: float
    field_final: RadialField


def barenblatt(n: int, m: float, k: float, T: float) -> Callable:
    """Closed-form extinction solution of u_t = Delta(u^m/m) for m < (n-2)/n.

    Returns B(r, t) valid for 0 < t < T; it is smooth, positive, radially
    decreasing, and vanishes identically at t = T.
    """
    if n < 3:
        raise RangeError(f"dimension must be >= 3, got {n}")
    if not 0.0 < m < (n - 2) / n:
        raise RangeError(f"extinction regime requires 0 < m < (n-2)/n, got m={m}")
    if not (k > 0 and T > 0):
        raise RangeError("need k > 0 and T > 0")
    c_star = 2.0 * (n - 2.0 - n * m) / (1.0 - m)
    beta1 = 1.0 / (n - 2.0 - n * m)
    alpha1 = (2.0 * beta1 + 1.0) / (1.0 - m)

    def B(r, t):
        if not 0.0 < t < T:
            raise RangeError(f"Barenblatt field is defined for 0 < t < {T}, got t={t}")
        r_arr = np.asarray(r, dtype=float)
        s = T - t
        val = s**alpha1 * (c_star / (k**2 + (s**beta1 * r_arr) ** 2)) ** (1.0 / (1.0 - m))
        return float(val) if np.ndim(r) == 0 else val

    return B


def make_self_similar_field(profile: Profile, lam: float, t: float,
                            grid: np.ndarray) -> RadialField:
    """Sample V_lam(r, t) = t^(-alpha) f_lam(t^(-beta) r) on the grid.

    The boundary traces are generated from the same formula, so evolving the
    result reproduces an exact solution up to discretization error.
    """
    if not t > 0:
        raise RangeError(f"time must be positive, got {t}")
    params = profile.params
    prof_l = rescale_profile(profile, lam)
    itp = profile_interpolator(prof_l)
    grid = np.asarray(grid, dtype=float)
    alpha, beta = params.alpha, params.beta
    u = t ** (-alpha) * itp(t ** (-beta) * grid)
    r_in, r_out = float(grid[0]), float(grid[-1])

    def bc_left(tt: float) -> float:
        return tt ** (-alpha) * itp(tt ** (-beta) * r_in)

    def bc_right(tt: float) -> float:
        return tt ** (-alpha) * itp(tt ** (-beta) * r_out)

    return RadialField(r_grid=grid, u=u, t=float(t), bc=(bc_left, bc_right), params=params)


class _StepReject(Exception):
    """Internal: the inner solve failed at the current dt."""

    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason  # "newton" or "positivity"


class _Acc:
    """Mutable per-field counters, frozen into EvolveStats at the end."""

    __slots__ = ("n_steps", "n_rejected", "newton_total", "min_u", "ab_max")

    def __init__(self, u0: np.ndarray):
        self.n_steps = 0
        self.n_rejected = 0
        self.newton_total = 0
        self.min_u = float(np.min(u0))
        self.ab_max = -math.inf

    def freeze(self, t_start: float, t_end: float, dt_final: float) -> EvolveStats:
        return EvolveStats(
            t_start=t_start,
            t_end=t_end,
            n_steps=self.n_steps,
            n_rejected=self.n_rejected,
            newton_total=self.newton_total,
            dt_final=dt_final,
            min_u=self.min_u,
            ab_max=self.ab_max,
        )


class _Stepper:
    """Backward-Euler step on one log-uniform grid; shared by lockstep runs."""

    def __init__(self, r_grid: np.ndarray, params: ParamSet, cfg: EvolveConfig):
        r = np.asarray(r_grid, dtype=float)
        x = np.log(r)
        dxs = np.diff(x)
        dx = float(np.mean(dxs))
        if not np.allclose(dxs, dx, rtol=1e-8, atol=1e-12):
            raise GridMismatchError("solver requires a log-uniform grid")
        kdrift = params.n - 2
        if not dx < 2.0 / kdrift:
            raise ConfigError(
                f"log spacing {dx:.4g} too coarse for a monotone stencil: need dx < 2/(n-2) = {2.0 / kdrift:.4g}"
            )
        self.m = params.m
        self.cfg = cfg
        e2 = np.exp(-2.0 * x[1:-1])
        self.lo = e2 * (1.0 / dx**2 - kdrift / (2.0 * dx))
        self.ce = e2 * (-2.0 / dx**2)
        self.hi = e2 * (1.0 / dx**2 + kdrift / (2.0 * dx))

    def _apply(self, F: np.ndarray) -> np.ndarray:
        return self.lo * F[:-2] + self.ce * F[1:-1] + self.hi * F[2:]

    def _residual(self, u: np.ndarray, uo_int: np.ndarray, dt: float) -> np.ndarray:
        F = u**self.m / self.m
        return u[1:-1] - uo_int - dt * self._apply(F)

    def step(self, u_old: np.ndarray, t: float, dt: float,
             bc_left: Callable, bc_right: Callable) -> tuple[np.ndarray, int]:
        """One implicit step to t + dt; returns (u_new, newton_iterations).

        Raises _StepReject when Newton stalls or positivity backtracking is
        exhausted; the caller decides whether to shrink dt.
        """
        m, cfg = self.m, self.cfg
        t_new = t + dt
        left, right = float(bc_left(t_new)), float(bc_right(t_new))
        if not (left > 0.0 and right > 0.0 and math.isfinite(left) and math.isfinite(right)):
            raise PositivityError(f"boundary trace not positive at t={t_new}")
        u = u_old.copy()
        u[0], u[-1] = left, right
        uo_int = u_old[1:-1]
        scale = uo_int  # positive by invariant; fixed per step
        n_int = uo_int.size
        ab = np.empty((3, n_int))
        for it in range(cfg.newton_max):
            G = self._residual(u, uo_int, dt)
            if float(np.max(np.abs(G) / scale)) <= cfg.newton_tol:
                return u, it
            dF = u ** (m - 1.0)
            ab[1] = 1.0 - dt * self.ce * dF[1:-1]
            ab[0, 0] = 0.0
            ab[0, 1:] = -dt * self.hi[:-1] * dF[2:-1]
            ab[2, -1] = 0.0
            ab[2, :-1] = -dt * self.lo[1:] * dF[1:-2]
            delta = solve_banded((1, 1), ab, -G)
            err0 = float(np.max(np.abs(G) / scale))
            lam = 1.0
            accepted = False
            reason = "newton"
            for _ in range(cfg.max_backtrack + 1):
                trial = u[1:-1] + lam * delta
                if np.any(trial <= 1e-8 * scale):
                    reason = "positivity"
                    lam *= 0.5
                    continue
                u_try = u.copy()
                u_try[1:-1] = trial
                err_try = float(np.max(np.abs(self._residual(u_try, uo_int, dt)) / scale))
                # damped Newton: allow mild non-monotonicity, veto blow-up
                if err_try <= 2.0 * err0 or err_try <= cfg.newton_tol:
                    u = u_try
                    accepted = True
                    break
                reason = "newton"
                lam *= 0.5
            if not accepted:
                raise _StepReject(reason)
            if float(np.max(np.abs(lam * delta) / scale)) <= cfg.newton_tol:
                return u, it + 1
        raise _StepReject("newton")


def _advance_lockstep(stepper: _Stepper, us: list, bcs: list, t: float, t_target: float,
                      cfg: EvolveConfig, accs: list, dt_state: dict, one_m: float) -> tuple[list, float]:
    """March all fields in us with a shared adaptive dt until t_target.

    Sharing the step sequence is what makes the discrete weighted-L1
    contraction argument apply to evolved pairs; single fields just pass a
    one-element list.
    """
    eps_t = 1e-13 * max(1.0, abs(t_target))
    while t < t_target - eps_t:
        dt = min(dt_state["dt"], cfg.dt_max, t_target - t)
        if cfg.dt_rel_max is not None:
            dt = min(dt, cfg.dt_rel_max * t)
        clamped = t + dt >= t_target - eps_t
        if clamped:
            dt = t_target - t
        try:
            stepped = [
                stepper.step(u, t, dt, bc[0], bc[1]) for u, bc in zip(us, bcs)
            ]
        except _StepReject as rej:
            for acc in accs:
                acc.n_rejected += 1
            dt_new = dt * cfg.dt_shrink
            if dt_new < cfg.dt_min:
                if rej.reason == "positivity":
                    raise PositivityError(
                        f"positivity backtracking exhausted at t={t:.6g} even at dt={dt:.3g}"
                    ) from None
                raise NewtonDivergence(
                    f"Newton failed to converge at t={t:.6g} even at dt={dt:.3g}"
                ) from None
            dt_state["dt"] = dt_new
            continue
        t_new = t_target if clamped else t + dt
        worst_iters = 0
        for idx, (u_new, iters) in enumerate(stepped):
            acc = accs[idx]
            u_old = us[idx]
            bound = u_new[1:-1] / (one_m * t_new)
            margin = ((u_new[1:-1] - u_old[1:-1]) / dt - bound) / bound
            acc.ab_max = max(acc.ab_max, float(np.max(margin)))
            acc.min_u = min(acc.min_u, float(np.min(u_new)))
            acc.newton_total += iters
            acc.n_steps += 1
            worst_iters = max(worst_iters, iters)
            us[idx] = u_new
        if worst_iters <= cfg.grow_threshold:
            dt_state["dt"] = min(dt * cfg.dt_grow, cfg.dt_max)
        else:
            dt_state["dt"] = dt
        t = t_new
        if accs[0].n_steps > cfg.max_steps:
            raise ToleranceError(
                f"step budget {cfg.max_steps} exhausted at t={t:.6g} (target {t_target:.6g})"
            )
    return us, t_target


def _require_params(field: RadialField, params: Optional[ParamSet]) -> ParamSet:
    p = params if params is not None else field.params
    if p is None:
        raise ConfigError("field carries no parameter set; pass params explicitly")
    return p


def evolve(field: RadialField, cfg: EvolveConfig, t_end: float,
           params: Optional[ParamSet] = None) -> RadialField:
    """Advance the field to t_end with backward-Euler steps.

    Positivity is preserved without clipping: the Newton update backtracks on
    any sign loss, and if backtracking at the smallest allowed dt still fails
    the run aborts with PositivityError.
    """
    p = _require_params(field, params)
    if not t_end > field.t:
        raise RangeError(f"t_end must exceed the field time {field.t}, got {t_end}")
    stepper = _Stepper(field.r_grid, p, cfg)
    acc = _Acc(field.u)
    dt_state = {"dt": cfg.dt_init}
    us, _ = _advance_lockstep(
        stepper, [field.u.copy()], [field.bc], field.t, t_end, cfg, [acc], dt_state,
        one_m=1.0 - p.m,
    )
    stats = acc.freeze(field.t, t_end, dt_state["dt"])
    return RadialField(r_grid=field.r_grid, u=us[0], t=t_end, bc=field.bc,
                       params=field.params, stats=stats)


def rescale_field(field: RadialField, y_grid: Optional[np.ndarray] = None,
                  params: Optional[ParamSet] = None) -> RescaledField:
    """Similarity rescaling u -> t^alpha u(t^beta y, t) with tau = log t.

    With y_grid omitted the image grid t^(-beta) r_grid is used and the values
    are exact; an explicit y_grid triggers cubic resampling of log u and
    RangeError if any t^beta y falls outside the field's radial range.
    """
    p = _require_params(field, params)
    t = field.t
    if not t > 0:
        raise RangeError(f"time must be positive, got {t}")
    alpha, beta = p.alpha, p.beta
    tau = math.log(t)
    if y_grid is None:
        y = t ** (-beta) * field.r_grid
        u = t**alpha * field.u
        return RescaledField(y_grid=y, u=u, tau=tau, t=t, params=p)
    y = np.asarray(y_grid, dtype=float)
    r_query = t**beta * y
    r_lo, r_hi = field.r_grid[0], field.r_grid[-1]
    if r_query.min() < r_lo * (1.0 - 1e-12) or r_query.max() > r_hi * (1.0 + 1e-12):
        raise RangeError(
            f"rescaled query radii [{r_query.min():.4g}, {r_query.max():.4g}] leave the grid "
            f"[{r_lo:.4g}, {r_hi:.4g}]"
        )
    from scipy.interpolate import CubicSpline

    spline = CubicSpline(np.log(field.r_grid), np.log(field.u))
    xq = np.clip(np.log(r_query), np.log(r_lo), np.log(r_hi))
    u = t**alpha * np.exp(spline(xq))
    return RescaledField(y_grid=y, u=u, tau=tau, t=t, params=p)


def power_bump_initial(params: ParamSet, a0: float, amp: float = 0.10,
                       center: float = -1.2, width: float = 2.0) -> Callable:
    """Initial datum A0 r^(-gamma) (1 + amp * bump((log r - center)/width)).

    The bump is the standard smooth compactly supported one, so the datum
    agrees with the pure power law outside e^(center +/- width).  The default
    amplitude and width keep (1-m) Delta(u^m/m)/u below 1 everywhere at t=1,
    so the evolved field obeys the decay bound u_t <= u/((1-m)t) from the
    start; steeper bumps can push the outer inflection of u^m above that
    threshold.
    """
    if not a0 > 0:
        raise RangeError(f"a0 must be positive, got {a0}")
    if not amp > -1.0:
        raise RangeError(f"amp must exceed -1 for positivity, got {amp}")
    if not width > 0:
        raise RangeError(f"width must be positive, got {width}")
    gamma = params.gamma

    def u0(r):
        r_arr = np.asarray(r, dtype=float)
        xi = (np.log(r_arr) - center) / width
        bump = np.zeros_like(xi)
        inside = np.abs(xi) < 1.0
        bump[inside] = np.exp(1.0 - 1.0 / (1.0 - xi[inside] ** 2))
        val = a0 * r_arr ** (-gamma) * (1.0 + amp * bump)
        return float(val) if np.ndim(r) == 0 else val

    return u0


def lambda_for_amplitude(profile: Profile, a: float) -> float:
    """Scaling factor lam with origin coefficient eta(f_lam) = a.

    Uses eta ~ lam^(2/(1-m) - gamma); the exponent equals rho1/((1-m) beta),
    so for a profile normalized to eta = 1 this reduces to a^((1-m) beta/rho1).
    """
    if not a > 0:
        raise RangeError(f"amplitude must be positive, got {a}")
    if profile.eta_origin is None:
        raise ConfigError("profile must carry eta_origin (run recover_profile first)")
    p = profile.params
    expo = (1.0 - p.m) * p.beta / p.rho1
    return float((a / profile.eta_origin) ** expo)


def random_sandwiched_pair(profile: Profile, grid: np.ndarray, t0: float,
                           rng: np.random.Generator,
                           lam_pair: tuple[float, float] = (1.2, 0.8),
                           theta_amp: float = 0.12,
                           support: tuple[float, float] = (-3.0, -0.5),
                           n_modes: int = 3):
    """Random pair of fields sandwiched between two self-similar envelopes.

    Each field is a pointwise geometric interpolation between the envelopes,
    u = hi * (lo/hi)^theta with a smooth random theta in [0, theta_amp] that
    vanishes outside the given log-radius window.  Both fields therefore share
    the upper envelope's boundary traces, which is exactly the setting in
    which the implicit scheme contracts weighted-L1 distances step by step.

    Returns (u0, v0, (lo_fn, hi_fn)) where the envelope callables take (r, t).
    """
    if not 0.0 < theta_amp <= 1.0:
        raise RangeError(f"theta_amp must lie in (0, 1], got {theta_amp}")
    lam_a, lam_b = lam_pair
    fa = make_self_similar_field(profile, lam_a, t0, grid)
    fb = make_self_similar_field(profile, lam_b, t0, grid)
    # the family is pointwise monotone in lambda, so one field dominates
    if np.all(fa.u <= fb.u):
        low, high = fa, fb
    elif np.all(fb.u <= fa.u):
        low, high = fb, fa
    else:
        raise SandwichViolationError("envelope fields are not ordered; check lam_pair")

    x = np.log(np.asarray(grid, dtype=float))
    x_lo, x_hi = support
    if not x_lo < x_hi:
        raise RangeError("support window must be increasing")
    mid, half = 0.5 * (x_lo + x_hi), 0.5 * (x_hi - x_lo)
    xi = (x - mid) / half
    window = np.zeros_like(x)
    inside = np.abs(xi) < 1.0
    window[inside] = np.exp(1.0 - 1.0 / (1.0 - xi[inside] ** 2))

    def random_theta() -> np.ndarray:
        phase = 2.0 * math.pi * (x - x_lo) / (x_hi - x_lo)
        raw = np.zeros_like(x)
        for k in range(1, n_modes + 1):
            c, s = rng.normal(), rng.normal()
            raw += (c * np.cos(k * phase) + s * np.sin(k * phase)) / k
        lo_r, hi_r = float(raw.min()), float(raw.max())
        if hi_r - lo_r < 1e-12:
            return np.zeros_like(x)
        return theta_amp * window * (raw - lo_r) / (hi_r - lo_r)

    log_ratio = np.log(low.u / high.u)

    def build(theta: np.ndarray) -> RadialField:
        u = high.u * np.exp(theta * log_ratio)
        return RadialField(r_grid=grid, u=u, t=t0, bc=high.bc, params=profile.params)

    u0 = build(random_theta())
    v0 = build(random_theta())

    itp_low = profile_interpolator(rescale_profile(profile, lam_a if low is fa else lam_b))
    itp_high = profile_interpolator(rescale_profile(profile, lam_a if high is fa else lam_b))
    alpha, beta = profile.params.alpha, profile.params.beta

    def lo_fn(r, t):
        return t ** (-alpha) * itp_low(t ** (-beta) * np.asarray(r, dtype=float))

    def hi_fn(r, t):
        return t ** (-alpha) * itp_high(t ** (-beta) * np.asarray(r, dtype=float))

    return u0, v0, (lo_fn, hi_fn)


def _check_sandwich(field_u: np.ndarray, field_v: np.ndarray, grid: np.ndarray,
                    t: float, sandwich) -> None:
    lo = np.asarray(sandwich[0](grid, t), dtype=float)
    hi = np.asarray(sandwich[1](grid, t), dtype=float)
    for name, vals in (("u", field_u), ("v", field_v)):
        below = vals < lo * (1.0 - _SANDWICH_RTOL)
        above = vals > hi * (1.0 + _SANDWICH_RTOL)
        if below.any() or above.any():
            idx = int(np.argmax(below | above))
            raise SandwichViolationError(
                f"field {name} leaves the envelope at t={t:.6g}, r={grid[idx]:.6g}: "
                f"value {vals[idx]:.6g} not in [{lo[idx]:.6g}, {hi[idx]:.6g}]"
            )


def _sup_compact(grid: np.ndarray, a: np.ndarray, b: np.ndarray,
                 window: tuple[float, float] = (0.1, 10.0)) -> float:
    """Relative sup distance on a compact annulus (fields span many decades,
    so the absolute sup would only ever see the innermost nodes)."""
    mask = (grid >= window[0]) & (grid <= window[1])
    if not mask.any():
        return math.nan
    denom = np.maximum(np.maximum(a[mask], b[mask]), 1e-300)
    return float(np.max(np.abs(a[mask] - b[mask]) / denom))


def contraction_experiment(u0: RadialField, v0: RadialField, weight: WeightFunction,
                           times: Sequence[float], cfg: EvolveConfig,
                           sandwich=None) -> ContractionResult:
    """Evolve a pair in lockstep and record both weighted distances over time.

    Returns the full |u-v| and positive-part (u-v)+ weighted-L1 sequences; for
    sandwiched data with shared traces both are non-increasing up to roundoff
    because the shared-step implicit scheme inherits the contraction of the
    continuous flow.  sandwich, when given, is a (lo_fn, hi_fn) pair of (r, t)
    callables checked at setup and at every sampled time.
    """
    if u0.t != v0.t:
        raise ConfigError(f"fields start at different times: {u0.t} vs {v0.t}")
    if u0.r_grid.shape != v0.r_grid.shape or not np.allclose(
        u0.r_grid, v0.r_grid, rtol=1e-12, atol=0.0
    ):
        raise GridMismatchError("pair must share a grid")
    p = _require_params(u0, None)
    times_arr = np.asarray(list(times), dtype=float)
    if times_arr.ndim != 1 or times_arr.size < 2:
        raise ConfigError("need at least two sample times")
    if not np.all(np.diff(times_arr) > 0):
        raise ConfigError("sample times must be strictly increasing")
    if times_arr[0] < u0.t * (1.0 - 1e-12):
        raise RangeError(f"first sample time {times_arr[0]} precedes the field time {u0.t}")

    grid = u0.r_grid
    if sandwich is not None:
        _check_sandwich(u0.u, v0.u, grid, u0.t, sandwich)

    stepper = _Stepper(grid, p, cfg)
    accs = [_Acc(u0.u), _Acc(v0.u)]
    dt_state = {"dt": cfg.dt_init}
    us = [u0.u.copy(), v0.u.copy()]
    bcs = [u0.bc, v0.bc]
    one_m = 1.0 - p.m

    dist_abs, dist_pos, dist_sup = [], [], []
    t = u0.t
    for t_target in times_arr:
        if t_target > t:
            us, t = _advance_lockstep(stepper, us, bcs, t, float(t_target), cfg, accs,
                                      dt_state, one_m)
        dist_abs.append(weighted_l1_distance(weight, (grid, us[0]), (grid, us[1])))
        dist_pos.append(
            weighted_l1_distance(weight, (grid, us[0]), (grid, us[1]), mode="positive-part")
        )
        dist_sup.append(_sup_compact(grid, us[0], us[1]))
        if sandwich is not None:
            _check_sandwich(us[0], us[1], grid, t, sandwich)

    u_fin = RadialField(grid, us[0], t, u0.bc, params=p,
                        stats=accs[0].freeze(u0.t, t, dt_state["dt"]))
    v_fin = RadialField(grid, us[1], t, v0.bc, params=p,
                        stats=accs[1].freeze(v0.t, t, dt_state["dt"]))
    return ContractionResult(
        times=times_arr,
        tau=np.log(times_arr),
        dist_abs=np.asarray(dist_abs),
        dist_pos=np.asarray(dist_pos),
        dist_sup_compact=np.asarray(dist_sup),
        u_final=u_fin,
        v_final=v_fin,
    )


def _tail_slope(grid: np.ndarray, integrand: np.ndarray) -> float:
    """Log-log slope of the weighted integrand near the outer edge; negative
    values mean the truncated integral approximates a convergent one."""
    k = max(4, grid.size // 16)
    seg_r = grid[-k:]
    seg_v = np.maximum(integrand[-k:], 1e-300)
    coef = np.polyfit(np.log(seg_r), np.log(seg_v), 1)
    return float(coef[0])


def convergence_experiment(profile: Profile, a0: float, a1: float, a2: float,
                           u0_spec: Optional[Callable], tau_grid: Sequence[float],
                           cfg: EvolveConfig, weight: Optional[WeightFunction] = None,
                           r_grid: Optional[np.ndarray] = None,
                           t0: float = 1.0) -> ConvergenceResult:
    """Evolve singular power-law-type data and track the rescaled field's
    weighted-L1 and compact-sup distances to the limit profile f_lam0.

    u0_spec = None starts on the attracting orbit itself (data f_lam0 at t0,
    whose t -> 0 trace is exactly a0 |x|^(-gamma)); a callable u0_spec(r) is
    checked against the power-law envelopes a1 r^(-gamma) <= u0 <= a2 r^(-gamma).
    Boundary traces: the inner trace follows the orbit V_lam0 (the inner
    region locks onto the power law), the outer trace is frozen at the initial
    datum for perturbed data, matching the persistence of the far-field power
    law over finite horizons.
    """
    p = profile.params
    if not p.gamma_in_convergence_range:
        raise RangeError(
            f"convergence regime requires n <= gamma < (n-2)/m, got gamma={p.gamma} at n={p.n}"
        )
    if not (0.0 < a1 <= a0 <= a2):
        raise RangeError(f"need 0 < a1 <= a0 <= a2, got ({a1}, {a0}, {a2})")
    if not t0 > 0:
        raise RangeError(f"t0 must be positive, got {t0}")
    tau_arr = np.asarray(list(tau_grid), dtype=float)
    if tau_arr.ndim != 1 or tau_arr.size < 2 or not np.all(np.diff(tau_arr) > 0):
        raise ConfigError("tau_grid must be an increasing sequence of at least two values")
    if tau_arr[0] < math.log(t0) - 1e-12:
        raise RangeError(f"tau_grid starts before log(t0) = {math.log(t0):.6g}")

    if weight is None:
        from .weight import BumpSpec, build_weight

        weight = build_weight(BumpSpec(mu=(p.n - 2) / 2.0, n=p.n))
    if r_grid is None:
        r_grid = log_grid(1e-3, 1e3, 640)
    r_grid = np.asarray(r_grid, dtype=float)

    lam0 = lambda_for_amplitude(profile, a0)
    lam1 = lambda_for_amplitude(profile, a1)
    lam2 = lambda_for_amplitude(profile, a2)
    orbit = make_self_similar_field(profile, lam0, t0, r_grid)

    gamma = p.gamma
    power = a0 * r_grid ** (-gamma)
    if u0_spec is None:
        field0 = orbit
    else:
        u0_vals = np.asarray(u0_spec(r_grid), dtype=float)
        lo_env = a1 * r_grid ** (-gamma)
        hi_env = a2 * r_grid ** (-gamma)
        bad = (u0_vals < lo_env * (1.0 - 1e-12)) | (u0_vals > hi_env * (1.0 + 1e-12))
        if bad.any():
            idx = int(np.argmax(bad))
            raise SandwichViolationError(
                f"initial datum leaves the power-law envelope at r={r_grid[idx]:.6g}: "
                f"{u0_vals[idx]:.6g} not in [{lo_env[idx]:.6g}, {hi_env[idx]:.6g}]"
            )
        right_frozen = float(u0_vals[-1])
        field0 = RadialField(
            r_grid=r_grid,
            u=u0_vals,
            t=t0,
            bc=(orbit.bc[0], lambda tt: right_frozen),
            params=p,
        )

    # the defining integrability condition on u0 - a0 |x|^(-gamma): the
    # weighted integrand must decay at the outer edge, else truncation lies
    diff0 = np.abs(field0.u - power)
    phi_vals = _weight_values(weight, r_grid)
    integrand = r_grid ** (p.n - 1) * diff0 * phi_vals
    u0_l1_gap = weighted_l1_distance(weight, (r_grid, field0.u), (r_grid, power))
    if np.max(integrand) > 0 and np.max(integrand[-r_grid.size // 8:]) > 1e-14 * np.max(integrand):
        slope = _tail_slope(r_grid, integrand)
        if slope > -0.1:
            raise RangeError(
                f"u0 - a0 r^(-gamma) is not integrable against the weight: outer integrand "
                f"slope {slope:.3f} >= -0.1"
            )

    # reference rescaled grid: stays inside the image of [r_in, r_out] for
    # every sampled time, with a 5 percent safety margin at both ends
    tau_max = float(tau_arr[-1])
    t_max = math.exp(tau_max)
    y_lo = r_grid[0] * t_max ** (-p.beta) * 1.05
    y_hi = r_grid[-1] / 1.05
    if not y_lo < y_hi:
        raise RangeError("tau horizon too long for this grid: rescaled window is empty")
    n_ref = max(int(round(r_grid.size * math.log(y_hi / y_lo) / math.log(r_grid[-1] / r_grid[0]))), 16)
    y_grid = log_grid(y_lo, y_hi, n_ref)
    itp0 = profile_interpolator(rescale_profile(profile, lam0))
    f_ref = itp0(y_grid)
    norm_ref = weighted_l1_distance(weight, (y_grid, f_ref), (y_grid, np.zeros_like(f_ref)))

    stepper = _Stepper(r_grid, p, cfg)
    acc = _Acc(field0.u)
    dt_state = {"dt": cfg.dt_init}
    us = [field0.u.copy()]
    t = t0
    dist_l1, dist_sup, t_samples = [], [], []
    for tau in tau_arr:
        t_target = math.exp(float(tau))
        if t_target > t:
            us, t = _advance_lockstep(stepper, us, [field0.bc], t, t_target, cfg, [acc],
                                      dt_state, one_m=1.0 - p.m)
        snapshot = RadialField(r_grid, us[0], t, field0.bc, params=p)
        resc = rescale_field(snapshot, y_grid=y_grid)
        dist_l1.append(weighted_l1_distance(weight, (y_grid, resc.u), (y_grid, f_ref)))
        dist_sup.append(_sup_compact(y_grid, resc.u, f_ref))
        t_samples.append(t)

    final = RadialField(r_grid, us[0], t, field0.bc, params=p,
                        stats=acc.freeze(t0, t, dt_state["dt"]))
    return ConvergenceResult(
        tau_grid=tau_arr,
        t_grid=np.asarray(t_samples),
        dist_l1w=np.asarray(dist_l1),
        dist_sup_compact=np.asarray(dist_sup),
        norm_ref=norm_ref,
        lam0=lam0,
        lam1=lam1,
        lam2=lam2,
        y_grid=y_grid,
        f_ref=f_ref,
        u0_l1_gap=u0_l1_gap,
        field_final=final,
    )


def _weight_values(weight: WeightFunction, r: np.ndarray) -> np.ndarray:
    from .weight import eval_weight

    phi, _ = eval_weight(weight, r)
    return np.asarray(phi, dtype=float)
