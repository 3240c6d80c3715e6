"""Checks of the normal-form identities along computed KdV trajectories.

All operators act on the interaction variable ``S(-t) v(t)`` of a trajectory
and are compared on ``0 < xi <= L``, with ``L`` the lattice cut of the
parameters (by default the dealiasing cut, so the identities hold for the
Galerkin system the solver integrates).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, DomainError
from ..spectral import Grid, SpectralField, l2_norm, random_field
from ..symbols import Kind
from .operators import NfParams, OperatorKind, eval_multilinear

THETA = 0.3


def _check_kdv(traj):
    if traj.symbol.kind is not Kind.KDV:
        raise ConfigError(f"normal-form checks need a KdV trajectory, "
                          f"got {traj.symbol.label()}")


def _snapshot_index(traj, t):
    times = np.asarray(traj.times)
    k = int(np.argmin(np.abs(times - t)))
    spacing = np.min(np.diff(times)) if times.size > 1 else 1.0
    if abs(times[k] - t) > 1e-9 * max(1.0, abs(t)) + 1e-6 * spacing:
        raise DomainError(f"t={t} is not a snapshot time")
    return k


def _restrict(f: SpectralField, cut: int) -> np.ndarray:
    return np.where(f.grid.xi <= cut, f.half, 0.0)


def _norm_on(f_half: np.ndarray, grid: Grid) -> float:
    return l2_norm(SpectralField(grid, f_half, mean_zero=True))


def verify_step1(traj, params: NfParams, t: float) -> float:
    """``|| N2^(1) - D_h N0^(1) - N^(2) ||`` at snapshot ``t``, with ``D_h`` the
    centered difference over the neighbouring snapshots."""
    _check_kdv(traj)
    k = _snapshot_index(traj, t)
    if k == 0 or k == len(traj.times) - 1:
        raise DomainError(f"t={t} is at the trajectory boundary")
    t0, tm, tp = traj.times[k], traj.times[k - 1], traj.times[k + 1]
    v = traj.interaction(k)
    grid = v.grid
    cut = params.cut_for(grid)
    n2 = eval_multilinear(OperatorKind.N2, 1, t0, v, params)
    n_next = eval_multilinear(OperatorKind.N, 2, t0, v, params)
    plus = eval_multilinear(OperatorKind.N0, 1, tp, traj.interaction(k + 1), params)
    minus = eval_multilinear(OperatorKind.N0, 1, tm, traj.interaction(k - 1), params)
    deriv = (plus.half - minus.half) / (tp - tm)
    res = _restrict(n2, cut) - np.where(grid.xi <= cut, deriv, 0.0) - _restrict(n_next, cut)
    return _norm_on(res, grid)


@dataclass(frozen=True)
class Reconstruction:
    t: float
    J: int
    residual: float
    quadrature_error: float


def _trapezoid(times, values):
    return np.trapezoid(values, times, axis=0)


def reconstruct(traj, J: int, params: NfParams, t: float) -> Reconstruction:
    """Right-hand side of the ``J``-step normal-form formulation at ``t``
    against the interaction variable ``v(t)``.

    ``v(0) + sum_{j<J} N0^(j)|_0^t + int_0^t (sum_{j<=J} N1^(j) + N2^(J))``
    with trapezoid quadrature over the snapshots in ``[0, t]``.  The
    quadrature error estimate is ``|I_h - I_2h| / 3`` from every other
    snapshot; for an odd snapshot count it is taken on ``[0, t_{k-1}]`` and
    scaled by ``k/(k-1)`` (zero below three intervals).
    """
    _check_kdv(traj)
    J = int(J)
    if not 1 <= J <= params.max_gen:
        raise ConfigError(f"J must lie in 1..{params.max_gen}, got {J}")
    k = _snapshot_index(traj, t)
    grid = traj.states[0].grid
    cut = params.cut_for(grid)
    v0 = traj.interaction(0)
    vt = traj.interaction(k)
    if k == 0:
        return Reconstruction(float(traj.times[0]), J, 0.0, 0.0)
    rhs = _restrict(v0, cut)
    for j in range(1, J):
        end = eval_multilinear(OperatorKind.N0, j, traj.times[k], vt, params)
        start = eval_multilinear(OperatorKind.N0, j, traj.times[0], v0, params)
        rhs = rhs + _restrict(end, cut) - _restrict(start, cut)
    times = np.asarray(traj.times[: k + 1])
    integrand = []
    for i, ti in enumerate(times):
        vi = traj.interaction(i)
        acc = eval_multilinear(OperatorKind.N2, J, ti, vi, params).half
        for j in range(1, J + 1):
            acc = acc + eval_multilinear(OperatorKind.N1, j, ti, vi, params).half
        integrand.append(np.where(grid.xi <= cut, acc, 0.0))
    integrand = np.array(integrand)
    fine = _trapezoid(times, integrand)
    rhs = rhs + fine
    if k >= 2 and k % 2 == 0:
        coarse = _trapezoid(times[::2], integrand[::2])
        qerr = _norm_on((fine - coarse) / 3.0, grid)
    elif k >= 3:
        # Richardson on [0, t_{k-1}], scaled up to the full interval
        m = k - 1
        part = _trapezoid(times[: m + 1], integrand[: m + 1])
        coarse = _trapezoid(times[: m + 1: 2], integrand[: m + 1: 2])
        qerr = _norm_on((part - coarse) / 3.0, grid) * k / m
    else:
        qerr = 0.0
    residual = _norm_on(rhs - _restrict(vt, cut), grid)
    return Reconstruction(float(traj.times[k]), J, residual, qerr)


@dataclass(frozen=True)
class BoundRow:
    j: int
    K: float
    operator: str
    ratio: float
    samples: int


BOUND_COLUMNS = ("j", "K", "operator", "empirical ratio", "sample count")


def measure_bounds(j: int, params: NfParams, samples: int, seed: int = 0,
                   t: float = 0.0, theta: float = THETA) -> list:
    """Empirical constants over random unit-norm mean-zero fields:
    ``max ||N0^(j)|| / K^{-4 j theta}``, ``max ||N1^(j)|| / K^{6 - 4 j theta}``
    and ``max sup_xi |N2^(j)(xi)| / |xi|``, all at time ``t``."""
    if samples < 1:
        raise ConfigError("samples must be positive")
    cut = params.lattice_cut
    if cut is None:
        raise ConfigError("measure_bounds needs an explicit lattice_cut")
    modes = 2 * cut + 2
    modes += modes % 2
    grid = Grid(max(modes, 8))
    rng = np.random.default_rng(seed)
    K = params.K
    best = {"N0": 0.0, "N1": 0.0, "N2tilde": 0.0}
    xi = np.arange(grid.nyquist + 1, dtype=float)
    xi[0] = 1.0
    for _ in range(samples):
        u = random_field(grid, rng, band=cut)
        norm = l2_norm(u)
        if norm > 0:
            u = u * (1.0 / norm)
        n0 = eval_multilinear(OperatorKind.N0, j, t, u, params)
        n1 = eval_multilinear(OperatorKind.N1, j, t, u, params)
        n2 = eval_multilinear(OperatorKind.N2, j, t, u, params)
        best["N0"] = max(best["N0"], l2_norm(n0) / K ** (-4 * j * theta))
        best["N1"] = max(best["N1"], l2_norm(n1) / K ** (6 - 4 * j * theta))
        best["N2tilde"] = max(best["N2tilde"], float(np.max(np.abs(n2.half) / xi)))
    return [BoundRow(j, float(K), name, val, samples) for name, val in best.items()]
