"""Target geometries and the transversal tube."""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from .params import ValidationError

HYPERPLANE = "hyperplane"
BALL = "ball"

DEFAULT_XI_GRID = tuple(round(0.55 + 0.05 * k, 2) for k in range(9))  # 0.55 .. 0.95


@dataclass(frozen=True, eq=False)
class Geometry:
    """Point-to-plane or point-to-point target at distance L from the origin.

    The tube of exponent xi is the capsule of radius L**xi around the segment
    from the start (origin) to the axis target L*e1 (resp. the ball center y);
    points beyond the segment ends are measured to the nearest endpoint.
    """

    kind: str
    L: float
    d: int
    target: np.ndarray = None  # ball center; defaults to (L, 0, ..., 0)

    def __post_init__(self):
        if self.kind not in (HYPERPLANE, BALL):
            raise ValidationError(f"unknown geometry kind {self.kind!r}")
        if not self.L > 1:
            raise ValidationError("geometry requires L > 1")
        if self.d < 1:
            raise ValidationError("geometry requires d >= 1")
        if self.target is None:
            tgt = np.zeros(self.d)
            tgt[0] = self.L
            object.__setattr__(self, "target", tgt)
        else:
            tgt = np.asarray(self.target, dtype=float)
            if tgt.shape != (self.d,):
                raise ValidationError("target must be a point in R^d")
            if abs(float(np.linalg.norm(tgt)) - self.L) > 1e-9:
                raise ValidationError("ball target must satisfy |y| = L")
            object.__setattr__(self, "target", tgt)
        self.target.setflags(write=False)

    @property
    def axis_end(self) -> np.ndarray:
        """End of the tube axis segment (start is the origin)."""
        return self.target

    def tube_radius(self, xi: float) -> float:
        return self.L ** xi

    def transversal_distance(self, X: np.ndarray) -> np.ndarray:
        """Capsule distance from points X (N, d) to the axis segment [0, end]."""
        e = self.axis_end
        L2 = float(e @ e)
        t = np.clip((X @ e) / L2, 0.0, 1.0)
        proj = t[:, None] * e[None, :]
        return np.linalg.norm(X - proj, axis=1)


def default_window(
    geom: Geometry, xi_max: float = 0.95, extra: float = 0.0
) -> tuple[np.ndarray, np.ndarray]:
    """Window containing the tube at exponent xi_max plus 5*sqrt(L) slack."""
    half = geom.L ** xi_max + 5.0 * math.sqrt(geom.L) + extra
    lo = np.full(geom.d, -half)
    hi = np.full(geom.d, half)
    hi[0] += geom.L
    return lo, hi
