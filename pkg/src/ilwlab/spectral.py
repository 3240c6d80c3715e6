"""Periodic fields on the torus of length 2*pi and their Fourier coefficients.

Coefficients use the unitary convention

    f_hat(xi) = (2 pi)^{-1/2} * int_0^{2 pi} f(x) exp(-i x xi) dx,

so Plancherel holds without constants and the Fourier transform of a product
is a lattice convolution carrying one factor (2 pi)^{-1/2}.

Real fields are stored by their non-negative half spectrum xi = 0..M/2 (the
negative half is implied by Hermitian symmetry). The Nyquist coefficient is
always zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

SQRT_2PI = np.sqrt(2.0 * np.pi)


@dataclass(frozen=True)
class Grid:
    """Uniform grid of ``modes`` points on [0, 2 pi)."""

    modes: int

    def __post_init__(self):
        m = self.modes
        if not isinstance(m, (int, np.integer)) or isinstance(m, bool):
            raise ConfigError(f"grid modes must be an integer, got {m!r}")
        if m < 8 or m % 2:
            raise ConfigError(f"grid modes must be even and >= 8, got {m}")

    @property
    def length(self) -> float:
        return 2.0 * np.pi

    @property
    def x(self) -> np.ndarray:
        return np.arange(self.modes) * (2.0 * np.pi / self.modes)

    @property
    def nyquist(self) -> int:
        return self.modes // 2

    @property
    def xi(self) -> np.ndarray:
        """Stored (non-negative) frequencies 0..M/2."""
        return np.arange(self.modes // 2 + 1)

    @property
    def dealias_cut(self) -> int:
        """Largest |xi| kept by the 2/3 rule; products of modes up to this
        cut are alias free on this grid."""
        return (self.modes - 1) // 3


class SpectralField:
    """Real periodic function held as Hermitian Fourier coefficients.

    Instances are immutable: the coefficient array is copied on construction
    and flagged read-only.
    """

    __slots__ = ("grid", "_half", "mean_zero")

    def __init__(self, grid: Grid, half_coeffs, mean_zero: bool = False):
        half = np.array(half_coeffs, dtype=complex)
        if half.shape != (grid.modes // 2 + 1,):
            raise ConfigError(
                f"expected {grid.modes // 2 + 1} half-spectrum coefficients, "
                f"got shape {half.shape}")
        half[0] = half[0].real
        half[-1] = 0.0
        if mean_zero:
            half[0] = 0.0
        half.flags.writeable = False
        self.grid = grid
        self._half = half
        self.mean_zero = bool(mean_zero)

    # -- construction -------------------------------------------------------

    @classmethod
    def zeros(cls, grid: Grid, mean_zero: bool = True) -> "SpectralField":
        return cls(grid, np.zeros(grid.modes // 2 + 1, complex), mean_zero)

    @classmethod
    def from_modes(cls, grid: Grid, modes: dict, mean_zero: bool = False):
        """Build a field from ``{xi: coefficient}``; negative keys are
        conjugated onto the stored half."""
        half = np.zeros(grid.modes // 2 + 1, complex)
        for k, c in modes.items():
            k = int(k)
            if abs(k) >= grid.nyquist:
                raise ConfigError(f"mode {k} outside grid of {grid.modes} modes")
            if k >= 0:
                half[k] = c
            else:
                half[-k] = np.conj(c)
        return cls(grid, half, mean_zero)

    # -- accessors ----------------------------------------------------------

    @property
    def half(self) -> np.ndarray:
        """Read-only coefficients for xi = 0..M/2."""
        return self._half

    def coeff(self, xi: int) -> complex:
        xi = int(xi)
        if abs(xi) > self.grid.nyquist:
            return 0j
        if xi >= 0:
            return complex(self._half[xi])
        return complex(np.conj(self._half[-xi]))

    def full(self) -> np.ndarray:
        """All M coefficients in numpy FFT order (0, 1, ..., -1)."""
        m = self.grid.modes
        out = np.zeros(m, complex)
        out[: m // 2 + 1] = self._half
        out[m // 2 + 1:] = np.conj(self._half[1: m // 2][::-1])
        return out

    def centered(self, cut: int) -> np.ndarray:
        """Coefficients for xi = -cut..cut as a plain array."""
        idx = np.arange(-cut, cut + 1)
        out = np.zeros(idx.size, complex)
        mask = np.abs(idx) < self.grid.nyquist
        k = idx[mask]
        vals = np.where(k >= 0, self._half[np.abs(k)],
                        np.conj(self._half[np.abs(k)]))
        out[mask] = vals
        return out

    def samples(self) -> np.ndarray:
        return inverse(self)

    @property
    def mean(self) -> float:
        return float(self._half[0].real / SQRT_2PI)

    def with_half(self, half, mean_zero=None) -> "SpectralField":
        mz = self.mean_zero if mean_zero is None else mean_zero
        return SpectralField(self.grid, half, mz)

    # -- arithmetic ---------------------------------------------------------

    def _check(self, other):
        if not isinstance(other, SpectralField) or other.grid != self.grid:
            raise ConfigError("fields live on different grids")

    def __add__(self, other):
        self._check(other)
        return SpectralField(self.grid, self._half + other._half,
                             self.mean_zero and other.mean_zero)

    def __sub__(self, other):
        self._check(other)
        return SpectralField(self.grid, self._half - other._half,
                             self.mean_zero and other.mean_zero)

    def __mul__(self, scalar):
        return SpectralField(self.grid, self._half * float(scalar),
                             self.mean_zero)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def __eq__(self, other):
        return (isinstance(other, SpectralField) and other.grid == self.grid
                and other.mean_zero == self.mean_zero
                and np.array_equal(other._half, self._half))

    def __hash__(self):
        return hash((self.grid, self.mean_zero, self._half.tobytes()))

    def __repr__(self):
        return (f"SpectralField(M={self.grid.modes}, mean_zero={self.mean_zero},"
                f" l2={l2_norm(self):.6g})")


# -- transforms -----------------------------------------------------------


def forward(samples, grid: Grid | None = None,
            mean_zero: bool = False) -> SpectralField:
    """Fourier coefficients of real samples taken at ``grid.x``.

    The Nyquist coefficient is dropped, so only samples without Nyquist
    content are reproduced exactly by :func:`inverse`.
    """
    samples = np.asarray(samples, dtype=float)
    if samples.ndim != 1:
        raise ConfigError("samples must be one dimensional")
    if grid is None:
        grid = Grid(samples.size)
    if samples.size != grid.modes:
        raise ConfigError(
            f"got {samples.size} samples for a grid of {grid.modes} modes")
    half = np.fft.rfft(samples) * (SQRT_2PI / grid.modes)
    return SpectralField(grid, half, mean_zero)


def inverse(field: SpectralField) -> np.ndarray:
    m = field.grid.modes
    return np.fft.irfft(field.half * (m / SQRT_2PI), n=m)


def from_function(func, grid: Grid, mean_zero: bool = False) -> SpectralField:
    return forward(func(grid.x), grid, mean_zero)


# -- norms and projectors ---------------------------------------------------


def _half_weights(m: int) -> np.ndarray:
    w = np.full(m // 2 + 1, 2.0)
    w[0] = 1.0
    w[-1] = 0.0
    return w


def l2_norm(f: SpectralField) -> float:
    """L2 norm, computed from the coefficients (Plancherel)."""
    w = _half_weights(f.grid.modes)
    return float(np.sqrt(np.sum(w * np.abs(f.half) ** 2)))


def quadrature_l2_norm(f: SpectralField) -> float:
    """L2 norm from the samples by the rectangle rule (exact for
    trigonometric polynomials of degree < M)."""
    s = inverse(f)
    return float(np.sqrt(np.sum(s * s) * (2.0 * np.pi / f.grid.modes)))


def inner(f: SpectralField, g: SpectralField) -> float:
    """Real L2 inner product."""
    w = _half_weights(f.grid.modes)
    return float(np.sum(w * (f.half * np.conj(g.half)).real))


def project(f: SpectralField, n: float, side: str = "low") -> SpectralField:
    """Dirichlet projector onto |xi| <= n (``low``) or |xi| > n (``high``)."""
    if n <= 0:
        raise ConfigError(f"projector cutoff must be positive, got {n}")
    keep = f.grid.xi <= n
    if side == "high":
        keep = ~keep
    elif side != "low":
        raise ConfigError(f"side must be 'low' or 'high', got {side!r}")
    return f.with_half(np.where(keep, f.half, 0.0))


def dealias(f: SpectralField) -> SpectralField:
    """Zero all modes above the 2/3-rule cut."""
    return f.with_half(np.where(f.grid.xi <= f.grid.dealias_cut, f.half, 0.0))


# -- products ---------------------------------------------------------------


def dealiased_product_half(a: np.ndarray, b: np.ndarray, m: int,
                           mask: np.ndarray) -> np.ndarray:
    """Half-spectrum coefficients of the product of two real fields given by
    half spectra ``a`` and ``b`` (already confined to ``mask``); the result is
    confined to ``mask`` as well."""
    scale = m / SQRT_2PI
    pa = np.fft.irfft(a * scale, n=m)
    pb = pa if b is a else np.fft.irfft(b * scale, n=m)
    out = np.fft.rfft(pa * pb) * (SQRT_2PI / m)
    out *= mask
    return out


def convolve(f: SpectralField, g: SpectralField) -> SpectralField:
    """Coefficients of the pointwise product ``f g``.

    Both factors are first restricted to the 2/3-rule band and so is the
    result; inside that band this is the exact lattice convolution
    ``(2 pi)^{-1/2} sum_eta f_hat(eta) g_hat(xi - eta)``.
    """
    if f.grid != g.grid:
        raise ConfigError("fields live on different grids")
    grid = f.grid
    mask = grid.xi <= grid.dealias_cut
    a = np.where(mask, f.half, 0.0)
    b = a if g is f else np.where(mask, g.half, 0.0)
    out = dealiased_product_half(a, b, grid.modes, mask)
    return SpectralField(grid, out, mean_zero=False)


def galilean_reduce(f: SpectralField) -> tuple[SpectralField, float]:
    """Split off the spatial mean: returns ``(f - mean, mean)``.

    For the quadratic flows treated here the mean is conserved and the
    remaining profile evolves like a mean-zero solution after the moving
    frame change ``x -> x - 2 mean t``.
    """
    mean = f.mean
    half = np.array(f.half)
    half[0] = 0.0
    return SpectralField(f.grid, half, mean_zero=True), mean


# -- random data --------------------------------------------------------------


def random_field(grid: Grid, rng: np.random.Generator, band: int | None = None,
                 mean_zero: bool = True, decay: float = 0.0) -> SpectralField:
    """Random real field supported on 0 < |xi| <= band, optionally with
    coefficient magnitudes weighted by ``(1 + |xi|)^{-decay}``."""
    if band is None:
        band = grid.dealias_cut
    band = min(int(band), grid.nyquist - 1)
    half = np.zeros(grid.modes // 2 + 1, complex)
    k = np.arange(1, band + 1)
    half[1: band + 1] = ((rng.standard_normal(band)
                          + 1j * rng.standard_normal(band))
                         * (1.0 + k) ** (-decay))
    if not mean_zero:
        half[0] = rng.standard_normal()
    return SpectralField(grid, half, mean_zero)


# -- serialization -------------------------------------------------------------


def dumps(f: SpectralField) -> str:
    """Text record: header ``M meanZero`` then ``re im`` per xi = 0..M/2."""
    lines = [f"{f.grid.modes} {int(f.mean_zero)}"]
    lines.extend(f"{c.real:.17g} {c.imag:.17g}" for c in f.half)
    return "\n".join(lines) + "\n"


def loads(text: str) -> SpectralField:
    rows = [ln.split() for ln in text.strip().splitlines()]
    if not rows or len(rows[0]) != 2:
        raise ConfigError("field record has a malformed header")
    m, mz = int(rows[0][0]), bool(int(rows[0][1]))
    grid = Grid(m)
    body = rows[1:]
    if len(body) != m // 2 + 1 or any(len(r) != 2 for r in body):
        raise ConfigError("field record has the wrong number of coefficients")
    half = np.array([float(r[0]) + 1j * float(r[1]) for r in body])
    return SpectralField(grid, half, mz)
