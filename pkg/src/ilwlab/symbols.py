"""Fourier multipliers of the KdV / ILW / Benjamin-Ono dispersion family.

Every linear flow here is a Fourier multiplier ``exp(i t omega(xi))``:

* KdV, ``v_t + v_xxx = 0``:           omega = xi^3
* scaled ILW, ``v_t = G~ v_xx``:      omega = xi * Lambda_delta(xi)
* ILW, ``u_t = G u_xx``:              omega = (delta/3) * xi * Lambda_delta(xi)
* BO, ``u_t = H u_xx``:               omega = xi |xi|

with ``Lambda_delta(xi) = 3/delta * (xi coth(delta xi) - 1/delta)``, the
multiplier of ``G~ d/dx`` where ``G~ = (3/delta) (T_delta - delta^{-1} d/dx^{-1})``
and ``T_delta`` has symbol ``-i coth(delta xi)``.  Writing ``x = delta xi``,

    Lambda_delta(xi) = 3 xi^2 g(x),   g(x) = (x coth x - 1) / x^2,
    h(delta, xi)     = 1 - Lambda_delta(xi) / xi^2 = 1 - 3 g(x),

and ``g(x) -> 1/3`` as ``x -> 0`` so that ``Lambda_delta -> xi^2``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import lru_cache
from math import factorial

import numpy as np
from scipy.special import bernoulli

from .errors import ConfigError, DomainError

# |x| below which g and h are summed from the Bernoulli series of x coth x;
# the closed forms lose ~eps/x^2 relative accuracy to cancellation.
SERIES_BRANCH = 0.5
_NTERMS = 14
_B = bernoulli(2 * _NTERMS)
# x coth x - 1 = sum_{n>=1} c_n x^{2n}
_C = np.array([2.0 ** (2 * n) * _B[2 * n] / factorial(2 * n)
               for n in range(1, _NTERMS + 1)])


def _check_delta(delta):
    if not np.all(np.asarray(delta) > 0):
        raise DomainError(f"depth parameter must be positive, got {delta}")


def _poly_x2(coeffs, x2):
    # Horner in x^2 for sum_k coeffs[k] x2^k
    acc = np.zeros_like(x2)
    for c in coeffs[::-1]:
        acc = acc * x2 + c
    return acc


def _g(x):
    """(x coth x - 1) / x^2, even, g(0) = 1/3."""
    x = np.abs(np.asarray(x, dtype=float))
    out = np.empty_like(x)
    small = x < SERIES_BRANCH
    xs = x[small]
    out[small] = _poly_x2(_C, xs * xs)
    xl = x[~small]
    out[~small] = (xl / np.tanh(xl) - 1.0) / (xl * xl)
    return out


def _h_of_x(x):
    """1 - 3 g(x) without cancellation near x = 0."""
    x = np.abs(np.asarray(x, dtype=float))
    out = np.empty_like(x)
    small = x < SERIES_BRANCH
    xs = x[small]
    out[small] = -3.0 * (xs * xs) * _poly_x2(_C[1:], xs * xs)
    xl = x[~small]
    out[~small] = 1.0 - 3.0 * (xl / np.tanh(xl) - 1.0) / (xl * xl)
    return out


def _scalarize(arr, like):
    return float(arr) if np.ndim(like) == 0 else arr


def lambda_delta(xi, delta):
    """Multiplier of ``G~_delta d/dx``; tends to ``xi^2`` as delta -> 0."""
    _check_delta(delta)
    xi_a = np.asarray(xi, dtype=float)
    out = 3.0 * xi_a * xi_a * _g(delta * xi_a)
    return _scalarize(out, xi)


def h_delta(xi, delta):
    """``h(delta, xi) = 1 - Lambda_delta(xi)/xi^2`` with ``h(delta, 0) = 0``."""
    _check_delta(delta)
    xi_a = np.asarray(xi, dtype=float)
    out = _h_of_x(delta * xi_a)
    return _scalarize(out, xi)


def lambda_series(xi, delta, terms=100_000):
    """Truncated series ``6 xi^2 sum_{k<=terms} 1/(k^2 pi^2 + delta^2 xi^2)``
    plus the integral tail estimate; an independent check of
    :func:`lambda_delta`."""
    k = np.arange(1, terms + 1, dtype=float)
    d2 = (delta * xi) ** 2
    # sum from the small terms up for accuracy
    partial = np.sum((1.0 / (k * k * np.pi ** 2 + d2))[::-1])
    b = np.sqrt(d2) / np.pi
    # sum_{k>n} 1/(pi^2 (k^2 + b^2)) ~ integral from n+1/2
    n = terms + 0.5
    tail = ((np.pi / 2 - np.arctan(n / b)) / b if b > 0 else 1.0 / n) / np.pi ** 2
    return 6.0 * xi * xi * (partial + tail)


def h_series(xi, delta, terms=1_000_000):
    """Truncated series ``6 d^2 xi^2 sum 1/(k^2 pi^2 (k^2 pi^2 + d^2 xi^2))``."""
    k2 = np.arange(1, terms + 1, dtype=float) ** 2 * np.pi ** 2
    d2 = (delta * xi) ** 2
    return 6.0 * d2 * np.sum((1.0 / (k2 * (k2 + d2)))[::-1])


def a_delta(xi, delta):
    """Symbol of the inverse free resolvent at kappa = 0:
    ``xi + (exp(-2 delta xi) - 1) / (2 delta)``, non-negative."""
    _check_delta(delta)
    xi_a = np.asarray(xi, dtype=float)
    y = 2.0 * delta * xi_a
    out = np.empty_like(y)
    small = np.abs(y) < SERIES_BRANCH
    ys = y[small]
    # y + expm1(-y) = sum_{n>=2} (-y)^n / n!
    acc = np.zeros_like(ys)
    for n in range(24, 1, -1):
        acc = acc * (-ys) + 1.0 / factorial(n)
    out[small] = acc * ys * ys / (2.0 * delta)
    yl = y[~small]
    with np.errstate(over="ignore"):
        out[~small] = (yl + np.expm1(-yl)) / (2.0 * delta)
    return _scalarize(out, xi)


class Kind(str, enum.Enum):
    KDV = "KdV"
    SCALED_ILW = "ScaledILW"
    ILW = "ILW"
    BO = "BO"


@dataclass(frozen=True)
class DispersionSymbol:
    """A member of the dispersion family.  ``delta`` is required for the two
    ILW kinds and must be absent otherwise."""

    kind: Kind
    delta: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        needs = self.kind in (Kind.SCALED_ILW, Kind.ILW)
        if needs:
            if self.delta is None:
                raise ConfigError(f"{self.kind.value} needs a depth parameter")
            if not (0 < self.delta < np.inf):
                raise DomainError(f"depth must lie in (0, inf), got {self.delta}")
            object.__setattr__(self, "delta", float(self.delta))
        elif self.delta is not None:
            raise ConfigError(f"{self.kind.value} takes no depth parameter")

    @classmethod
    def kdv(cls):
        return cls(Kind.KDV)

    @classmethod
    def scaled_ilw(cls, delta):
        return cls(Kind.SCALED_ILW, delta)

    @classmethod
    def ilw(cls, delta):
        return cls(Kind.ILW, delta)

    @classmethod
    def bo(cls):
        return cls(Kind.BO)

    def label(self) -> str:
        if self.delta is None:
            return self.kind.value
        return f"{self.kind.value}({self.delta:g})"


def phase(symbol: DispersionSymbol, xi):
    """Linear phase ``omega(xi)``: the flow multiplies ``v_hat(xi)`` by
    ``exp(i t omega(xi))``."""
    xi_a = np.asarray(xi, dtype=float)
    k = symbol.kind
    if k is Kind.KDV:
        out = xi_a ** 3
    elif k is Kind.BO:
        out = xi_a * np.abs(xi_a)
    else:
        out = xi_a * lambda_delta(xi_a, symbol.delta)
        if k is Kind.ILW:
            out = out * (symbol.delta / 3.0)
    return _scalarize(out, xi)


def _check_triple(xi, xi1, xi2):
    xi, xi1, xi2 = (np.asarray(v, dtype=float) for v in (xi, xi1, xi2))
    scale = np.maximum(1.0, np.abs(xi1) + np.abs(xi2))
    if np.any(np.abs(xi - xi1 - xi2) > 1e-12 * scale):
        raise DomainError("resonance needs xi = xi1 + xi2")
    return xi, xi1, xi2


def resonance_gap(xi, xi1, xi2, delta):
    """``Xi_delta - Xi_KdV = xi^3 h(xi) - xi1^3 h(xi1) - xi2^3 h(xi2)``."""
    xi_a, xi1_a, xi2_a = _check_triple(xi, xi1, xi2)
    out = (xi_a ** 3 * h_delta(xi_a, delta) - xi1_a ** 3 * h_delta(xi1_a, delta)
           - xi2_a ** 3 * h_delta(xi2_a, delta))
    return _scalarize(out, xi)


def resonance(symbol: DispersionSymbol, xi, xi1, xi2):
    """``Xi = -omega(xi) + omega(xi1) + omega(xi2)`` on ``xi = xi1 + xi2``."""
    xi_a, xi1_a, xi2_a = _check_triple(xi, xi1, xi2)
    k = symbol.kind
    if k is Kind.BO:
        out = -phase(symbol, xi_a) + phase(symbol, xi1_a) + phase(symbol, xi2_a)
        return _scalarize(out, xi)
    out = -3.0 * xi_a * xi1_a * xi2_a
    if k is not Kind.KDV:
        out = out + resonance_gap(xi_a, xi1_a, xi2_a, symbol.delta)
        if k is Kind.ILW:
            out = out * (symbol.delta / 3.0)
    return _scalarize(out, xi)


def phi_delta(t, xi, xi1, xi2, delta):
    """``exp(i t Xi_delta) - exp(i t Xi_KdV)`` in the cancellation-free form
    ``2i sin(t gap / 2) exp(i t (Xi_KdV + gap / 2))``."""
    xi_a, xi1_a, xi2_a = _check_triple(xi, xi1, xi2)
    base = -3.0 * xi_a * xi1_a * xi2_a
    gap = resonance_gap(xi_a, xi1_a, xi2_a, delta)
    out = 2j * np.sin(0.5 * t * gap) * np.exp(1j * t * (base + 0.5 * gap))
    return complex(out) if np.ndim(xi) == 0 else out


@dataclass(frozen=True)
class MultiplierTable:
    """Cached ``omega`` over the stored half lattice of a grid."""

    grid: object
    symbol: DispersionSymbol
    omega: np.ndarray

    @classmethod
    def build(cls, grid, symbol):
        return _table(grid, symbol)


@lru_cache(maxsize=64)
def _table(grid, symbol):
    omega = np.asarray(phase(symbol, grid.xi.astype(float)), dtype=float)
    omega.flags.writeable = False
    return MultiplierTable(grid, symbol, omega)
