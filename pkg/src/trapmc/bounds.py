"""Closed-form exponent bounds.

xi_tilde(alpha, gamma, d) = max(3/4, 1/(1+alpha-d), min(1/(1+gamma), (2+d)/(2 alpha)))
is the upper bound on the volume exponent. chi(xi) = max(1/2, (1-gamma)*xi_bar,
(1 + xi_bar*(1 + d - 2 gamma - alpha))/2) with xi_bar = min(xi, d/alpha) is the
concentration exponent of the disorder fluctuations of log Z. The companion
lower-bound display min(1/2, 1/(1+alpha-d), 3/(3+2 gamma+alpha-d)) is reported
literally; in the regime alpha - d = gamma <= 1/3 the upper bound collapses to
1/(1+gamma), which is reported separately as the corollary value (the literal
lower-bound display contains a 1/2 term that contradicts the corollary claim,
so the two are never merged here).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

from .params import ModelParams, ValidationError


@dataclass(frozen=True)
class BoundSet:
    xi_tilde: float
    xi_lower: float
    chi: float
    xi_bar: float
    corollary_applies: bool
    corollary_value: float | None

    def to_dict(self) -> dict:
        return asdict(self)


def theoretical_bounds(params: ModelParams, xi: float) -> BoundSet:
    """Evaluate all closed-form bounds at the given tube exponent."""
    if not (0.5 < xi < 1.0):
        raise ValidationError("xi must lie in (1/2, 1)")
    a, g, d = params.alpha, params.gamma, params.d
    xi_tilde = max(3.0 / 4.0, 1.0 / (1.0 + a - d), min(1.0 / (1.0 + g), (2.0 + d) / (2.0 * a)))
    xi_lower = min(0.5, 1.0 / (1.0 + a - d), 3.0 / (3.0 + 2.0 * g + a - d))
    xi_bar = min(xi, d / a)
    chi = max(0.5, (1.0 - g) * xi_bar, 0.5 * (1.0 + xi_bar * (1.0 + d - 2.0 * g - a)))
    corollary = math.isclose(a - d, g, rel_tol=1e-9, abs_tol=1e-12) and g <= 1.0 / 3.0 + 1e-12
    return BoundSet(
        xi_tilde=xi_tilde,
        xi_lower=xi_lower,
        chi=chi,
        xi_bar=xi_bar,
        corollary_applies=corollary,
        corollary_value=1.0 / (1.0 + g) if corollary else None,
    )
