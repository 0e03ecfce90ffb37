"""Angular channels (l, m) and the dipole coupling matrices.

For a Cartesian derivative written as ``d/dK = alpha_K d/dr + beta_K / r``
the coupling matrices are ``<Y_lm | alpha_K | Y_l'm'>`` and
``<Y_lm | beta_K | Y_l'm'>``. Both are computed with a product rule,
Gauss-Legendre in ``cos(theta)`` times a uniform rule in ``phi``, which is
exact for the band-limited integrands involved.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

# quadrature noise below this is snapped to an exact zero
ZERO_SNAP = 1e-14


class Axis(str, Enum):
    X = "x"
    Y = "y"
    Z = "z"


def channel_index(l, m):
    if l < 0 or abs(m) > l:
        raise ValueError(f"invalid channel (l={l}, m={m})")
    return l * l + l + m


def coeff_a(l, m):
    if l < 0:
        return 0.0
    return _sqrt_checked(((l + 1) ** 2 - m * m) / ((2 * l + 1) * (2 * l + 3)), "a", l, m)


def coeff_b(l, m):
    if l < 0:
        return 0.0
    return _sqrt_checked((l + m + 1) * (l + m + 2) / ((2 * l + 1) * (2 * l + 3)), "b", l, m)


def coeff_c(l, m):
    return _sqrt_checked(l * (l + 1) - m * (m + 1), "c", l, m)


def _sqrt_checked(value, name, l, m):
    if value < 0:
        raise ValueError(f"negative radicand in {name}({l}, {m})")
    return math.sqrt(value)


@dataclass(frozen=True)
class AngularBasis:
    """Set of active (l, m) channels.

    With ``m_restriction=None`` all ``(l_max + 1)**2`` channels are active and
    row ``I`` of a state is channel ``channel_index(l, m)``. With an integer
    ``m_restriction`` only ``m = m_restriction`` channels are kept, indexed by
    ascending ``l``.
    """

    l_max: int
    m_restriction: int | None = None
    channels: tuple = field(init=False, repr=False)

    def __post_init__(self):
        if self.l_max < 0:
            raise ValueError(f"l_max must be >= 0, got {self.l_max}")
        if self.m_restriction is None:
            chans = tuple((l, m) for l in range(self.l_max + 1) for m in range(-l, l + 1))
        else:
            m0 = self.m_restriction
            if abs(m0) > self.l_max:
                raise ValueError(f"m_restriction={m0} exceeds l_max={self.l_max}")
            chans = tuple((l, m0) for l in range(abs(m0), self.l_max + 1))
        object.__setattr__(self, "channels", chans)

    @property
    def n_channels(self):
        return len(self.channels)

    @property
    def l_values(self):
        return np.array([l for l, _ in self.channels], dtype=int)

    def index(self, l, m):
        if self.m_restriction is None:
            return channel_index(l, m)
        if m != self.m_restriction or not abs(m) <= l <= self.l_max:
            raise ValueError(f"channel (l={l}, m={m}) not in restricted basis")
        return l - abs(self.m_restriction)


def _normalized_legendre(l_max, m, x, s=None):
    """Rows l = |m|..l_max of the orthonormal associated Legendre functions
    (Condon-Shortley phase included) so that ``Y_lm = row * exp(i m phi)``.

    Pass ``s = sin(theta)`` when available; ``sqrt(1 - x^2)`` loses it near the poles.
    """
    ma = abs(m)
    if s is None:
        s = np.sqrt(np.maximum(0.0, 1.0 - x * x))
    out = np.zeros((l_max + 1,) + x.shape)
    pmm = np.full_like(x, 1.0 / math.sqrt(4.0 * math.pi))
    for k in range(1, ma + 1):
        pmm = -math.sqrt((2 * k + 1) / (2 * k)) * s * pmm
    if ma > l_max:
        return out
    out[ma] = pmm
    if ma + 1 <= l_max:
        out[ma + 1] = math.sqrt(2 * ma + 3) * x * pmm
    for l in range(ma + 2, l_max + 1):
        a = math.sqrt((4 * l * l - 1) / (l * l - ma * ma))
        b = math.sqrt(((l - 1) ** 2 - ma * ma) / (4 * (l - 1) ** 2 - 1))
        out[l] = a * (x * out[l - 1] - b * out[l - 2])
    return out


def spherical_harmonic(l, m, theta, phi):
    """Complex spherical harmonic with Condon-Shortley phase,
    ``Y_l^{-m} = (-1)^m conj(Y_l^m)``."""
    if abs(m) > l:
        raise ValueError(f"|m| > l for (l={l}, m={m})")
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    plm = _normalized_legendre(l, abs(m), np.cos(theta), np.sin(theta))[l]
    y = plm * np.exp(1j * abs(m) * phi)
    if m < 0:
        y = (-1) ** abs(m) * np.conj(y)
    return complex(y) if y.ndim == 0 else y


def angular_quadrature(n_theta, n_phi):
    """Product rule on the unit sphere: returns ``theta, phi, weights``
    flattened to 1-D arrays."""
    ct, wt = np.polynomial.legendre.leggauss(n_theta)
    phi = 2.0 * np.pi * np.arange(n_phi) / n_phi
    wp = np.full(n_phi, 2.0 * np.pi / n_phi)
    theta = np.arccos(ct)
    T, P = np.meshgrid(theta, phi, indexing="ij")
    W = np.outer(wt, wp)
    return T.ravel(), P.ravel(), W.ravel()


def _harmonics_on(theta, phi, l_top):
    """Y_lm for every (l, m) with l <= l_top on the given points, keyed by (l, m)."""
    x, s = np.cos(theta), np.sin(theta)
    table = {}
    for m in range(0, l_top + 1):
        rows = _normalized_legendre(l_top, m, x, s)
        eimp = np.exp(1j * m * phi)
        for l in range(m, l_top + 1):
            y = rows[l] * eimp
            table[(l, m)] = y
            if m:
                table[(l, -m)] = (-1) ** m * np.conj(y)
    return table


def _dtheta(table, l, m, theta, phi):
    # dY_lm/dtheta = m cot(theta) Y_lm + sqrt((l-m)(l+m+1)) e^{-i phi} Y_{l,m+1}
    out = m * np.cos(theta) / np.sin(theta) * table[(l, m)]
    if m < l:
        out = out + math.sqrt((l - m) * (l + m + 1)) * np.exp(-1j * phi) * table[(l, m + 1)]
    return out


def _alpha_beta_apply(axis, table, l, m, theta, phi):
    y = table[(l, m)]
    st, ct = np.sin(theta), np.cos(theta)
    sp, cp = np.sin(phi), np.cos(phi)
    if axis is Axis.Z:
        return ct * y, -st * _dtheta(table, l, m, theta, phi)
    dphi = 1j * m * y
    dth = _dtheta(table, l, m, theta, phi)
    if axis is Axis.X:
        return cp * st * y, -sp / st * dphi + cp * ct * dth
    return sp * st * y, cp / st * dphi + sp * ct * dth


@dataclass(frozen=True)
class CouplingMatrices:
    axis: Axis
    alpha: np.ndarray = field(repr=False)
    beta_minus_alpha: np.ndarray = field(repr=False)

    @property
    def beta(self):
        return self.beta_minus_alpha + self.alpha


def build_couplings(basis, axis, n_theta=None, n_phi=None):
    """Quadrature-built ``alpha^K`` and ``beta^K - alpha^K`` for the basis."""
    axis = Axis(axis)
    if basis.m_restriction is not None and axis is not Axis.Z:
        raise ValueError("m-restricted bases only close under z polarization")
    l_max = basis.l_max
    n_theta = l_max + 2 if n_theta is None else n_theta
    n_phi = 2 * l_max + 3 if n_phi is None else n_phi
    # integrands are degree <= 2 l_max + 1 in cos(theta) and in the phi frequency
    if n_theta < l_max + 1 or n_phi < 2 * l_max + 2:
        raise ValueError(
            f"angular quadrature ({n_theta} x {n_phi}) too coarse for l_max={l_max}; "
            f"need at least ({l_max + 1} x {2 * l_max + 2})"
        )
    theta, phi, w = angular_quadrature(n_theta, n_phi)
    table = _harmonics_on(theta, phi, l_max)

    chans = basis.channels
    ybra = np.array([np.conj(table[c]) * w for c in chans])
    a_ket = np.empty((len(chans), theta.size), dtype=complex)
    b_ket = np.empty_like(a_ket)
    for J, (l, m) in enumerate(chans):
        a_ket[J], b_ket[J] = _alpha_beta_apply(axis, table, l, m, theta, phi)
    alpha = ybra @ a_ket.T
    beta = ybra @ b_ket.T
    bma = beta - alpha
    for mat in (alpha, bma):
        mat.real[np.abs(mat.real) < ZERO_SNAP] = 0.0
        mat.imag[np.abs(mat.imag) < ZERO_SNAP] = 0.0
        mat.setflags(write=False)
    return CouplingMatrices(axis=axis, alpha=alpha, beta_minus_alpha=bma)


def z_couplings_closed_form(basis):
    """``alpha^z`` and ``beta^z`` read off the action of d/dz on Y_lm."""
    n = basis.n_channels
    alpha = np.zeros((n, n))
    beta = np.zeros((n, n))
    for J, (lp, m) in enumerate(basis.channels):
        for I, (l, mm) in enumerate(basis.channels):
            if mm != m:
                continue
            if l == lp + 1:
                alpha[I, J] = coeff_a(lp, m)
                beta[I, J] = -lp * coeff_a(lp, m)
            elif l == lp - 1:
                alpha[I, J] = coeff_a(lp - 1, m)
                beta[I, J] = (lp + 1) * coeff_a(lp - 1, m)
    return alpha, beta
