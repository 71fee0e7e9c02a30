"""Model parameters and potential selection."""

from __future__ import annotations

import math
from dataclasses import dataclass


class ValidationError(ValueError):
    """A parameter or configuration value violates its contract."""


@dataclass(frozen=True)
class ModelParams:
    """Parameters of the trap field and the killing rate.

    d     -- spatial dimension
    alpha -- tail exponent of the trap-radius law, tail r**-alpha on [1, inf)
    gamma -- trap strength exponent, a trap of radius r kills at extra rate r**-gamma
    lam   -- homogeneous base killing rate
    """

    d: int
    alpha: float
    gamma: float
    lam: float

    def __post_init__(self):
        if self.d < 1:
            raise ValidationError("d must be a positive integer")
        if not self.alpha > self.d:
            raise ValidationError(
                f"alpha must exceed d (got alpha={self.alpha}, d={self.d})"
            )
        if not self.gamma > 0:
            raise ValidationError(f"gamma must be positive (got {self.gamma})")
        if not self.lam > 0:
            raise ValidationError(f"lambda must be positive (got {self.lam})")


RAW = "raw"
MODIFIED = "modified"


@dataclass(frozen=True)
class PotentialSpec:
    """Selects the raw potential or its truncated-and-clipped modification.

    In modified mode, traps of radius larger than 2 * L**xi_bar are dropped
    and the contribution of each dyadic radius band n is capped at
    2**(-n*gamma) * log(L), for bands n = 0 .. floor(xi_bar * log2(L)).
    The cap uses the natural logarithm.
    """

    mode: str = RAW
    L: float | None = None
    xi: float | None = None

    def __post_init__(self):
        if self.mode not in (RAW, MODIFIED):
            raise ValidationError(f"unknown potential mode {self.mode!r}")
        if self.mode == MODIFIED:
            if self.L is None or not self.L > 1:
                raise ValidationError("modified potential requires L > 1")
            if self.xi is None or not (0.5 < self.xi < 1.0):
                raise ValidationError("modified potential requires xi in (1/2, 1)")

    @classmethod
    def raw(cls) -> "PotentialSpec":
        return cls(mode=RAW)

    @classmethod
    def modified(cls, L: float, xi: float) -> "PotentialSpec":
        return cls(mode=MODIFIED, L=L, xi=xi)

    def xi_bar(self, params: ModelParams) -> float:
        assert self.mode == MODIFIED
        return min(self.xi, params.d / params.alpha)

    def radius_cutoff(self, params: ModelParams) -> float:
        """Traps with radius above this are ignored in modified mode."""
        assert self.mode == MODIFIED
        return 2.0 * self.L ** self.xi_bar(params)

    def n_max(self, params: ModelParams) -> int:
        assert self.mode == MODIFIED
        return int(math.floor(self.xi_bar(params) * math.log2(self.L)))

    def clip(self, n: int, params: ModelParams) -> float:
        """Per-band cap 2**(-n*gamma) * log(L) (natural log)."""
        assert self.mode == MODIFIED
        return 2.0 ** (-n * params.gamma) * math.log(self.L)
