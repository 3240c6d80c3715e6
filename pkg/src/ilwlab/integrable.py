"""Perturbation-determinant probes of the ILW flow on the torus.

The free resolvent ``R_delta(kappa)`` is the Fourier multiplier
``r(xi) = 1 / (a_delta(xi) + kappa)`` and the sandwich operator
``A = sqrt(R) u sqrt(R)`` has, in the Fourier basis,

    A(xi, eta) = r(xi)^{1/2} u_hat(xi - eta) r(eta)^{1/2} / sqrt(2 pi).

Its squared Hilbert-Schmidt norm is ``sum_xi F(xi) |u_hat(xi)|^2`` with

    F(xi; kappa, delta) = (2 pi)^{-1} sum_eta r(eta) r(xi + eta),

and the log of the renormalized perturbation determinant is
``alpha = sum_{j>=2} tr(A^j) / j = sum_i [-log(1 - l_i) - l_i]`` over the
eigenvalues ``l_i`` of ``A``.

Because ``r(eta) ~ 1/eta`` as ``eta -> +inf`` the lattice sums converge like
``1/cut``.  The positive tail of ``F`` is summed in closed form with the
digamma function; the negative tail decays like ``exp(-2 delta |eta|)`` and is
only bounded.  The sandwich matrix itself lives on a finite window and
``alpha`` adds back the missing part of its quadratic term.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import digamma, polygamma

from .errors import ConfigError, DivergenceError, PrecisionError, PreconditionError
from .spectral import SQRT_2PI, SpectralField, l2_norm, project
from .symbols import Kind, a_delta

GATE = 1.0 / 36.0
TAIL_RTOL = 1e-8


def resolvent_weight(eta, kappa, delta):
    """``r(eta) = 1/(a_delta(eta) + kappa)`` (zero where ``a`` overflows)."""
    if not kappa > 0:
        raise ConfigError(f"kappa must be positive, got {kappa}")
    a = np.asarray(a_delta(np.asarray(eta, dtype=float), delta))
    with np.errstate(over="ignore"):
        return 1.0 / (a + kappa)


def default_cut(xi_max, kappa, delta):
    """Direct-summation window for :func:`f_weight`."""
    return int(max(math.ceil(4 * max(abs(xi_max), kappa, 1.0 / delta)),
                   math.ceil(20.0 / delta), 64))


def _negative_tail_bound(cut, kappa, delta):
    # For m > cut with exp(2 delta m)/(4 delta) >= m + 1/(2 delta) we have
    # a(-m) >= exp(2 delta m)/(4 delta), hence r(-m) <= 4 delta exp(-2 delta m);
    # the partner factor r(eta + xi) is at most 1/kappa.
    m = cut + 1
    if math.exp(min(2 * delta * m, 700)) / (4 * delta) < m + 1 / (2 * delta):
        return math.inf
    q = math.exp(-2 * delta)
    return 4 * delta * math.exp(-2 * delta * m) / ((1 - q) * kappa)


def _positive_tail(xi, n, c):
    """``sum_{eta >= n} 1/((eta + c)(eta + xi + c))``."""
    if xi == 0:
        return float(polygamma(1, n + c))
    return float((digamma(n + c + xi) - digamma(n + c)) / xi)


def f_weight(xi, kappa, delta, cut=None, return_bound=False):
    """Resolvent weight ``F(xi; kappa, delta)`` on the integer lattice.

    Sums ``eta`` in ``[-cut, cut]`` directly, adds the closed-form positive
    tail, and raises :class:`PrecisionError` when the remaining tail bound
    exceeds ``1e-8`` of the result.  With ``return_bound`` the bound is
    returned alongside.
    """
    if not (kappa > 0 and delta > 0):
        raise ConfigError("kappa and delta must be positive")
    xis = np.atleast_1d(np.asarray(xi, dtype=float))
    if np.any(xis != np.round(xis)):
        raise ConfigError("F is evaluated on integer frequencies")
    xi_max = int(np.max(np.abs(xis))) if xis.size else 0
    if cut is None:
        cut = default_cut(xi_max, kappa, delta)
    need = 4 * max(xi_max, kappa, 1.0 / delta)
    if cut < need:
        raise ConfigError(f"cut={cut} below 4*max(|xi|, kappa, 1/delta)={need:g}")
    cut = int(cut)
    eta = np.arange(-cut - xi_max, cut + xi_max + 1)
    r = resolvent_weight(eta, kappa, delta)
    base = xi_max  # index of eta = -cut
    c = kappa - 1.0 / (2 * delta)
    n = cut + 1
    neg = _negative_tail_bound(cut, kappa, delta)
    out = np.empty(xis.size)
    bounds = np.empty(xis.size)
    for i, x in enumerate(xis.astype(int)):
        lo = base
        partial = float(np.dot(r[lo: lo + 2 * cut + 1],
                               r[lo + x: lo + x + 2 * cut + 1]))
        if n + c + min(x, 0) <= 1:
            raise PrecisionError(f"cut={cut} too small for the analytic tail")
        tail = _positive_tail(x, n, c)
        # exp(-2 delta eta)/(2 delta) neglected in a(eta) beyond the window
        eps = math.exp(-2 * delta * (n + min(x, 0))) / (2 * delta)
        approx = 2 * eps * tail / (n + c + min(x, 0))
        total = partial + tail
        bound = neg + approx
        if not bound <= TAIL_RTOL * total:
            raise PrecisionError(
                f"tail bound {bound:.3g} exceeds {TAIL_RTOL:g} of F={total:.3g}"
                f" at xi={x}, cut={cut}")
        out[i] = total / (2 * np.pi)
        bounds[i] = bound / (2 * np.pi)
    if np.ndim(xi) == 0:
        out, bounds = float(out[0]), float(bounds[0])
    return (out, bounds) if return_bound else out


def f_weight_window(xi, kappa, delta, lo, hi):
    """``F`` restricted to a finite lattice window: both ``eta`` and
    ``xi + eta`` range over ``[lo, hi]``.  This is the exact weight seen by a
    sandwich matrix on that window."""
    eta = np.arange(lo, hi + 1)
    r = resolvent_weight(eta, kappa, delta)
    xis = np.atleast_1d(np.asarray(xi, dtype=int))
    out = np.empty(xis.size)
    n = eta.size
    for i, x in enumerate(xis):
        if abs(x) >= n:
            out[i] = 0.0
        elif x >= 0:
            out[i] = np.dot(r[: n - x], r[x:])
        else:
            out[i] = np.dot(r[-x:], r[: n + x])
    out /= 2 * np.pi
    return float(out[0]) if np.ndim(xi) == 0 else out


def al7_shape(xi, kappa, delta):
    """Right-hand side of the two-sided comparability bound for ``F``."""
    xi = np.abs(np.asarray(xi, dtype=float))
    num = (np.sqrt((1 + delta * kappa) / (delta * kappa))
           + np.log1p(delta * xi / (1 + delta * kappa)))
    den = delta * xi ** 2 / (1 + delta * xi) + kappa
    return num / den


def comparability_bracket(xis, kappas, deltas):
    """``(min, max)`` of ``F / al7_shape`` over the sampled grid."""
    lo, hi = np.inf, -np.inf
    for d in deltas:
        for k in kappas:
            ratio = f_weight(np.asarray(xis), k, d) / al7_shape(xis, k, d)
            lo, hi = min(lo, float(ratio.min())), max(hi, float(ratio.max()))
    return lo, hi


# -- sandwich operator ----------------------------------------------------------


@dataclass(frozen=True)
class SandwichOperator:
    kappa: float
    delta: float
    lo: int
    hi: int
    matrix: np.ndarray

    @property
    def frequencies(self):
        return np.arange(self.lo, self.hi + 1)

    def frobenius_sq(self) -> float:
        return float(np.sum(np.abs(self.matrix) ** 2))

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)


def default_window(u: SpectralField, kappa, delta, size=384):
    """Matrix window ``[lo, hi]``: short on the negative side where ``r``
    decays exponentially, long on the positive side where it decays like
    ``1/eta``."""
    band = u.grid.nyquist
    lo = -(int(math.ceil(20.0 / delta)) + band)
    hi = max(size, 4 * band, int(4 * kappa))
    return lo, hi


def sandwich(u: SpectralField, kappa, delta, window=None) -> SandwichOperator:
    """Sandwich matrix ``sqrt(R) u sqrt(R)`` on the window ``[lo, hi]``.
    Coefficients of ``u`` outside its stored band are zero."""
    lo, hi = window if window is not None else default_window(u, kappa, delta)
    freqs = np.arange(lo, hi + 1)
    sr = np.sqrt(resolvent_weight(freqs, kappa, delta))
    diff = freqs[:, None] - freqs[None, :]
    nyq = u.grid.nyquist
    inside = np.abs(diff) < nyq
    half = u.half
    idx = np.clip(np.abs(diff), 0, nyq)
    vals = np.where(diff >= 0, half[idx], np.conj(half[idx]))
    uhat = np.where(inside, vals, 0.0)
    mat = sr[:, None] * uhat * sr[None, :] / SQRT_2PI
    mat = 0.5 * (mat + mat.conj().T)
    mat.flags.writeable = False
    return SandwichOperator(float(kappa), float(delta), lo, hi, mat)


def _lattice(u: SpectralField):
    """All stored frequencies -M/2+1..M/2-1 and |u_hat|^2 on them."""
    nyq = u.grid.nyquist
    xis = np.arange(-nyq + 1, nyq)
    p = np.abs(u.centered(nyq - 1)) ** 2
    return xis, p


def hs_norm_sq(u: SpectralField, kappa, delta, window=None, cut=None) -> float:
    """``||sqrt(R) u sqrt(R)||_HS^2 = sum_xi F(xi) |u_hat(xi)|^2``.

    Without ``window`` this is the full-lattice value; with ``window=(lo, hi)``
    it is the value for the sandwich matrix truncated to that window.
    """
    xis, p = _lattice(u)
    keep = p > 0
    if not np.any(keep):
        return 0.0
    xis, p = xis[keep], p[keep]
    if window is None:
        pos = np.unique(np.abs(xis))
        fpos = f_weight(pos, kappa, delta, cut)
        fmap = dict(zip(pos.tolist(), np.atleast_1d(fpos).tolist()))
        weights = np.array([fmap[abs(int(x))] for x in xis])
    else:
        weights = f_weight_window(xis, kappa, delta, *window)
    return float(np.sum(weights * p))


def _tail3(n, c, p, q):
    """``sum_{eta >= n} 1/((eta+c+p)(eta+c)(eta+c-q))`` for integer arrays
    ``p, q`` (partial fractions in digamma, repeated roots in polygamma)."""
    x = n + c
    s = np.stack([p, np.zeros_like(p), -q]).astype(float)
    out = np.empty(p.shape)
    same01, same02, same12 = s[0] == s[1], s[0] == s[2], s[1] == s[2]
    triple = same01 & same12
    out[triple] = -0.5 * polygamma(2, x)
    distinct = ~(same01 | same02 | same12)
    if np.any(distinct):
        a, b, d = s[0][distinct], s[1][distinct], s[2][distinct]
        # 1/((y+a)(y+b)(y+d)) = sum_i w_i/(y+s_i), sum_i w_i = 0
        wa = 1.0 / ((b - a) * (d - a))
        wb = 1.0 / ((a - b) * (d - b))
        wd = 1.0 / ((a - d) * (b - d))
        out[distinct] = -(wa * digamma(x + a) + wb * digamma(x + b)
                          + wd * digamma(x + d))
    double = ~triple & ~distinct
    if np.any(double):
        # repeated shift r, single shift t
        sd = s[:, double]
        rep = np.where(same01[double] | same02[double], sd[0], sd[1])
        single = np.where(same01[double], sd[2],
                          np.where(same02[double], sd[1], sd[0]))
        dd = single - rep
        out[double] = (polygamma(1, x + rep) / dd
                       - (digamma(x + single) - digamma(x + rep)) / dd ** 2)
    return out


@lru_cache(maxsize=32)
def _cubic_tail_weights(kappa, delta, band, lo, hi):
    """``T_full(p, q) - T_window(p, q)`` for the cubic trace
    ``tr A^3 = sum_{p,q} u(p) u(q) u(-p-q) T(p, q)``, where
    ``T(p, q) = (2 pi)^{-3/2} sum_eta r(eta+p) r(eta) r(eta-q)``."""
    rng = np.arange(-band, band + 1)
    P, Q = np.meshgrid(rng, rng, indexing="ij")
    keep = np.abs(P + Q) <= band
    P, Q = P[keep], Q[keep]
    n = max(hi + 2 * band + 1, int(math.ceil(40.0 / delta)) + 2 * band)
    start = lo - 2 * band
    eta = np.arange(start - band, n + band + 1)
    r = resolvent_weight(eta, kappa, delta)
    full = np.zeros(P.size)
    win = np.zeros(P.size)
    for e in range(start, n):
        i = e - eta[0]
        term = r[i + P] * r[i] * r[i - Q]
        full += term
        if lo <= e <= hi:
            inside = (e + P >= lo) & (e + P <= hi) & (e - Q >= lo) & (e - Q <= hi)
            win += np.where(inside, term, 0.0)
    full += _tail3(n, kappa - 1.0 / (2 * delta), P, Q)
    diff = (full - win) / (2 * np.pi) ** 1.5
    diff.flags.writeable = False
    P.flags.writeable = False
    Q.flags.writeable = False
    return P, Q, diff


def _cubic_tail(u: SpectralField, kappa, delta, lo, hi) -> float:
    band = u.grid.nyquist - 1
    P, Q, w = _cubic_tail_weights(float(kappa), float(delta), band, lo, hi)
    c = u.centered(2 * band)
    off = 2 * band
    prod = c[off + P] * c[off + Q] * c[off - P - Q]
    return float(np.sum(prod * w).real)


def alpha(u: SpectralField, kappa, delta, window=None,
          tail_correct: bool = True) -> float:
    """Log of the renormalized perturbation determinant.

    Enforces the smallness gate ``hs_norm_sq < 1/36`` and a spectral radius
    below one.  With ``tail_correct`` the quadratic and cubic trace terms of
    the truncated matrix are replaced by their full-lattice values; the
    remaining truncation error is of quartic order in ``u`` and ``O(hi^-3)``.
    """
    hs = hs_norm_sq(u, kappa, delta)
    if not hs < GATE:
        raise PreconditionError(
            f"smallness gate violated: HS norm^2 = {hs:.6g} >= 1/36", measured=hs)
    if hs == 0.0:
        return 0.0
    op = sandwich(u, kappa, delta, window)
    lam = op.eigenvalues()
    if lam.max() >= 1.0:
        raise DivergenceError(f"eigenvalue {lam.max():.6g} >= 1")
    val = float(np.sum(-np.log1p(-lam) - lam))
    if tail_correct:
        val += 0.5 * (hs - op.frobenius_sq())
        val += _cubic_tail(u, kappa, delta, op.lo, op.hi) / 3.0
    return val


def alpha_trace_series(op: SandwichOperator, jmax: int = 40) -> float:
    """``sum_{j=2}^{jmax} tr(A^j)/j`` by repeated products (test oracle)."""
    a = np.array(op.matrix)
    power = a @ a
    total = 0.0
    for j in range(2, jmax + 1):
        total += np.trace(power).real / j
        power = power @ a
    return float(total)


@dataclass
class AlphaTrack:
    times: np.ndarray
    alpha: np.ndarray
    hs_norm_sq: np.ndarray
    flagged: list

    @property
    def drift(self):
        return self.alpha - self.alpha[0]


def alpha_track(traj, kappa, window=None, sign: int = -1) -> AlphaTrack:
    """``alpha(kappa; sign * u)`` and the gate quantity at every snapshot of an
    unscaled ILW trajectory.

    For ``u_t - G u_xx = (u^2)_x`` the Lax operator carries ``q = -u``, so the
    conserved determinant is ``alpha(kappa; -u)``; ``sign=+1`` evaluates the
    unflipped field.  Snapshots failing the gate are flagged and get ``nan``.
    """
    sym = traj.symbol
    if sym.kind is not Kind.ILW:
        raise ConfigError("alpha is conserved along unscaled ILW trajectories; "
                          f"got {sym.label()}")
    if sign not in (1, -1):
        raise ConfigError(f"sign must be +1 or -1, got {sign}")
    delta = sym.delta
    alphas, hss, flagged = [], [], []
    for k, u in enumerate(traj.states):
        q = u if sign == 1 else -u
        hs = hs_norm_sq(q, kappa, delta)
        hss.append(hs)
        try:
            alphas.append(alpha(q, kappa, delta, window))
        except (PreconditionError, DivergenceError):
            if k == 0:
                raise
            flagged.append(k)
            alphas.append(np.nan)
    return AlphaTrack(np.array(traj.times), np.array(alphas), np.array(hss),
                      flagged)


def alpha_drift(traj, kappa, window=None, sign: int = -1) -> np.ndarray:
    """``alpha(q(t_k)) - alpha(q(0))`` per snapshot, ``q = sign * u``."""
    return alpha_track(traj, kappa, window, sign).drift


# -- equicontinuity functionals ---------------------------------------------------


@dataclass(frozen=True)
class EquicontinuityProbe:
    s: float
    mu: float
    N: float

    def __post_init__(self):
        if not -0.5 < self.s < 0:
            raise ConfigError(f"probe needs -1/2 < s < 0, got s={self.s}")
        if not (self.mu > 0 and self.N > 0):
            raise ConfigError("probe mu and N must be positive")

    def high_weight(self, xi):
        """``|xi|^{2|s|} / (mu^{2|s|} + |xi|^{2|s|})``."""
        p = 2 * abs(self.s)
        a = np.abs(np.asarray(xi, dtype=float)) ** p
        return a / (self.mu ** p + a)

    def low_weight(self, xi):
        return 1.0 - self.high_weight(xi)


def tail_norm(u: SpectralField, n: float) -> float:
    """``||P_{>N} u||_{L^2}``."""
    return l2_norm(project(u, n, "high"))


def weighted_functional(u: SpectralField, probe: EquicontinuityProbe) -> float:
    xis, p = _lattice(u)
    return float(np.sum(probe.high_weight(xis) * p))


def drift_functional(traj, probe: EquicontinuityProbe) -> np.ndarray:
    """``A_delta(t_k) = sum_xi low_weight(xi) (|v_hat(t_k)|^2 - |v_hat(0)|^2)``
    along a scaled ILW trajectory (the amplitude map of the scaling cancels
    the ``9/delta^2`` prefactor of the unscaled expression)."""
    if traj.symbol.kind is not Kind.SCALED_ILW:
        raise ConfigError(f"expected a scaled ILW trajectory, got {traj.symbol.label()}")
    xis, p0 = _lattice(traj.states[0])
    w = probe.low_weight(xis)
    out = np.empty(len(traj.states))
    for k, v in enumerate(traj.states):
        _, p = _lattice(v)
        out[k] = np.sum(w * (p - p0))
    return out
