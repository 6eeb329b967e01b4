"""Parameter derivations for singular self-similar profiles.

The profile family is indexed by the dimension n >= 3, the exponent
0 < m < (n-2)/n, the origin decay rate gamma with
2/(1-m) < gamma < (n-2)/m, and a time normalization rho1 > 0.  Everything
else (the self-similar exponents, the fixed-point constants, the origin
expansion coefficients) is derived algebra and lives here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DegenerateError, InternalError, RangeError

__all__ = [
    "ParamSet",
    "FPConstants",
    "ExpansionConstants",
    "derive_exponents",
    "derive_params",
    "derive_fp_constants",
    "derive_expansion_constants",
]

# Pole detection for 2 - gamma(1-m); admissible gamma sits strictly above the
# pole, but callers probing the boundary deserve DegenerateError, not a huge
# finite beta from roundoff.
_POLE_TOL = 1e-10


@dataclass(frozen=True)
class ParamSet:
    """Validated parameters plus the derived self-similar exponents.

    alpha and beta are both negative; alpha_p, beta_p are their positive
    mirrors.  gamma_in_convergence_range flags n <= gamma < (n-2)/m, the
    regime in which rescaled solutions converge to the profile.
    """

    n: int
    m: float
    gamma: float
    rho1: float
    alpha: float
    beta: float
    alpha_p: float
    beta_p: float
    gamma_in_convergence_range: bool


@dataclass(frozen=True)
class FPConstants:
    """Constants that drive the tail fixed-point construction."""

    params: ParamSet
    eta_inf: float
    C1: float
    C2: float
    C3: float
    C4: float
    C5: float
    eps1: float
    b0: float
    b1: float


@dataclass(frozen=True)
class ExpansionConstants:
    """Coefficients of the origin expansion equation in the variable rho = r^(rho1/beta')."""

    params: ParamSet
    a1: float
    a2: float
    a3: float


def _validate_base(n: int, m: float, rho1: float) -> None:
    if int(n) != n or n < 3:
        raise RangeError(f"dimension n must be an integer >= 3, got {n}")
    if not 0.0 < m < (n - 2) / n:
        raise RangeError(f"exponent m must satisfy 0 < m < (n-2)/n = {(n - 2) / n}, got {m}")
    if not rho1 > 0.0:
        raise RangeError(f"rho1 must be positive, got {rho1}")


def derive_exponents(n: int, m: float, gamma: float, rho1: float = 1.0) -> tuple[float, float]:
    """Return the self-similar exponents (alpha, beta) for the given parameters.

    beta = rho1 / (2 - gamma(1-m)) and alpha = (2 beta - rho1)/(1-m); the pair
    satisfies alpha/beta = gamma and alpha(1-m) = 2 beta - rho1 exactly.
    """
    _validate_base(n, m, rho1)
    denom = 2.0 - gamma * (1.0 - m)
    if abs(denom) < _POLE_TOL * max(1.0, abs(gamma)):
        raise DegenerateError(
            f"gamma = {gamma} sits on the pole gamma = 2/(1-m) = {2.0 / (1.0 - m)}"
        )
    if not 2.0 / (1.0 - m) < gamma < (n - 2) / m:
        raise RangeError(
            f"gamma must satisfy 2/(1-m) = {2.0 / (1.0 - m)} < gamma < (n-2)/m = {(n - 2) / m}, got {gamma}"
        )
    beta = rho1 / denom
    alpha = (2.0 * beta - rho1) / (1.0 - m)
    if not (alpha < 0.0 and beta < 0.0):
        raise InternalError(f"derived exponents must be negative, got alpha={alpha}, beta={beta}")
    return alpha, beta


def derive_params(n: int, m: float, gamma: float, rho1: float = 1.0) -> ParamSet:
    """Validate parameters and package them with the derived exponents."""
    alpha, beta = derive_exponents(n, m, gamma, rho1)
    return ParamSet(
        n=int(n),
        m=float(m),
        gamma=float(gamma),
        rho1=float(rho1),
        alpha=alpha,
        beta=beta,
        alpha_p=-alpha,
        beta_p=-beta,
        gamma_in_convergence_range=bool(n <= gamma < (n - 2) / m),
    )


def derive_fp_constants(params: ParamSet, eta_inf: float, b1_margin: float = 0.05) -> FPConstants:
    """Derive the contraction constants C1..C5, eps1 and the tail anchors b0, b1.

    eta_inf is the prescribed far-field coefficient lim r^((n-2)/m) f(r).
    b0 is the abscissa beyond which the tail map is a 1/5-contraction on its
    invariant set; b1 = b0 * (1 + b1_margin) is where the construction
    actually starts.
    """
    if not eta_inf > 0.0:
        raise RangeError(f"eta_inf must be positive, got {eta_inf}")
    if not b1_margin > 0.0:
        raise RangeError(f"b1_margin must be positive, got {b1_margin}")
    n, m = params.n, params.m
    bp = params.beta_p
    C1 = (n - 2) / m - params.gamma
    C2 = params.rho1 / bp + (1.0 - m) * C1
    if not (C1 > 0.0 and C2 > 0.0):
        raise InternalError(f"C1, C2 must be positive in the admissible range, got {C1}, {C2}")
    e1m = eta_inf ** (1.0 - m)
    C3 = (bp * C1 * e1m + m) / C2
    C4 = max(
        2.0 * C3 / C2,
        (2.0 ** m) * bp * C1 / (eta_inf ** m * C2),
        (2.0 ** m) * bp / (eta_inf ** m * C2 ** 2) * (bp * C1 * e1m + C3 ** 2),
    )
    eps1 = 0.5 * min(1.0, eta_inf)
    # smallest constant with 1 - exp(-(C3/C2) x) <= C5 x for x >= 0
    C5 = C3 / C2
    b0 = (4.0 / C2) * max(
        1.0,
        math.log(15.0 * C4),
        math.log((10.0 * eta_inf + C3 + bp * e1m) / C2),
        math.log((C3 + C5 * eta_inf) / eps1),
    )
    return FPConstants(
        params=params,
        eta_inf=float(eta_inf),
        C1=C1,
        C2=C2,
        C3=C3,
        C4=C4,
        C5=C5,
        eps1=eps1,
        b0=b0,
        b1=b0 * (1.0 + b1_margin),
    )


def derive_expansion_constants(params: ParamSet) -> ExpansionConstants:
    """Coefficients a1, a2, a3 of the origin expansion equation.

    In the variable rho = r^(rho1/beta') the function wbar(rho) = r^gamma f(r)
    satisfies
        (wbar'/wbar)' + m (wbar'/wbar)^2 + (a1/rho)(wbar'/wbar)
            + (a2/rho^2)(wbar'/wbar^m) = a3/rho^2,
    and a2 < 0 < a3 throughout the admissible range.
    """
    a, b = params.alpha, params.beta
    n, m, rho1 = params.n, params.m, params.rho1
    a1 = (2.0 * m * a - (n - 2) * b + rho1) / rho1
    a2 = -(b * b) / rho1
    a3 = (a * b * (n - 2) - m * a * a) / rho1 ** 2
    if not a2 < 0.0:
        raise InternalError(f"a2 must be negative, got {a2}")
    if not a3 > 0.0:
        raise InternalError(f"a3 must be positive in the admissible range, got {a3}")
    return ExpansionConstants(params=params, a1=a1, a2=a2, a3=a3)
