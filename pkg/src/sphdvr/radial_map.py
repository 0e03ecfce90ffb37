"""Maps from the reference interval [-1, 1] onto the radial box [0, r_max]."""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np


class MapKind(str, Enum):
    RATIONAL = "rational"
    LINEAR = "linear"


@dataclass(frozen=True)
class RadialMap:
    """Radial coordinate transform ``r(x)``.

    ``Rational``: ``r = L (1 + x) / (1 - x + alpha)`` with ``alpha = 2 L / r_max``.
    Smaller ``L`` packs more nodes near the origin. ``Linear``: ``r = r_max (x + 1) / 2``.
    """

    kind: MapKind
    r_max: float
    length_param: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", MapKind(self.kind))
        if not (np.isfinite(self.r_max) and self.r_max > 0):
            raise ValueError(f"r_max must be positive, got {self.r_max}")
        if self.kind is MapKind.RATIONAL:
            if self.length_param is None:
                object.__setattr__(self, "length_param", self.r_max / 10.0)
            if not (np.isfinite(self.length_param) and self.length_param > 0):
                raise ValueError(f"L must be positive, got {self.length_param}")

    @classmethod
    def rational(cls, r_max, L=None):
        return cls(MapKind.RATIONAL, float(r_max), None if L is None else float(L))

    @classmethod
    def linear(cls, r_max):
        return cls(MapKind.LINEAR, float(r_max))

    @property
    def alpha(self):
        if self.kind is not MapKind.RATIONAL:
            return None
        return 2.0 * self.length_param / self.r_max

    def __call__(self, x):
        return map_eval(self, x)[0]


def map_eval(rmap, x):
    """Return ``(r, dr/dx, d2r/dx2, d3r/dx3)`` at ``x`` in closed form."""
    x = np.asarray(x, dtype=float)
    if rmap.kind is MapKind.LINEAR:
        half = 0.5 * rmap.r_max
        r = half * (x + 1.0)
        r1 = np.full_like(x, half)
        r2 = np.zeros_like(x)
        r3 = np.zeros_like(x)
    else:
        L, a = rmap.length_param, rmap.alpha
        den = 1.0 - x + a
        r = L * (1.0 + x) / den
        r1 = L * (2.0 + a) / den**2
        r2 = 2.0 * r1 / den
        r3 = 6.0 * L * (2.0 + a) / den**4
    if x.ndim == 0:
        return float(r), float(r1), float(r2), float(r3)
    return r, r1, r2, r3


def extra_potential_from_derivatives(r1, r2, r3):
    return (2.0 * r3 * r1 - 3.0 * r2**2) / (4.0 * r1**4)


def extra_potential(rmap, x):
    """Potential-like term left over by the symmetrizing scaling ``psi = r'^{-1/2} f``.

    Vanishes analytically for both built-in maps; it is still evaluated from
    the derivatives rather than assumed zero.
    """
    _, r1, r2, r3 = map_eval(rmap, x)
    return extra_potential_from_derivatives(r1, r2, r3)
