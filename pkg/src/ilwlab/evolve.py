"""Time integration of ``v_t = L v + (v^2)_x`` for the dispersion family.

The linear part is removed exactly by the interaction representation
``bold_v(t) = S(-t) v(t)``, which satisfies

    d/dt bold_v_hat(xi) = i xi exp(-i t omega(xi)) FT[(S(t) bold_v)^2](xi),

and classical RK4 is applied to that ODE (integrating-factor RK4).  Each step
is taken in the interaction frame anchored at the start of the step, which is
the same scheme with the phase origin shifted, and the profile ``v`` is
returned.  Quadratic products are dealiased with the 2/3 rule, so the state
lives on ``|xi| <= grid.dealias_cut``.
"""

from __future__ import annotations

import json
import logging
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import BlowUpError, ConfigError
from .spectral import (Grid, SpectralField, dealiased_product_half, dumps,
                       l2_norm, loads)
from .symbols import DispersionSymbol, Kind, MultiplierTable

log = logging.getLogger(__name__)

BLOWUP_THRESHOLD = 1e12
CFL_LIMIT = 0.5


@dataclass(frozen=True)
class EvolutionProblem:
    symbol: DispersionSymbol
    initial: SpectralField
    horizon: float
    dt: float
    record_every: int = 1
    nonlinear: bool = True  # test hook: False integrates the linear flow only

    def __post_init__(self):
        if not self.initial.mean_zero:
            raise ConfigError("evolution needs mean-zero initial data; "
                              "apply galilean_reduce first")
        if self.horizon < 0:
            raise ConfigError(f"horizon must be non-negative, got {self.horizon}")
        if not self.dt > 0:
            raise ConfigError(f"dt must be positive, got {self.dt}")
        if self.horizon > 0 and self.dt > self.horizon * (1 + 1e-12):
            raise ConfigError(f"dt={self.dt} exceeds horizon {self.horizon}")
        if int(self.record_every) < 1:
            raise ConfigError("record_every must be a positive integer")

    @property
    def steps(self) -> int:
        if self.horizon == 0:
            return 0
        return max(1, int(math.ceil(self.horizon / self.dt - 1e-9)))

    @property
    def step_size(self) -> float:
        """Actual step: ``horizon / steps`` (at most ``dt``)."""
        n = self.steps
        return self.horizon / n if n else 0.0


@dataclass
class Trajectory:
    problem: EvolutionProblem
    times: np.ndarray
    states: list
    l2: np.ndarray
    means: np.ndarray
    warnings: list = field(default_factory=list)
    failed_at: float | None = None

    @property
    def symbol(self):
        return self.problem.symbol

    def __len__(self):
        return len(self.states)

    def interaction(self, k: int) -> SpectralField:
        """Interaction variable ``S(-t_k) v(t_k)`` of snapshot ``k``."""
        return to_interaction(self.states[k], self.times[k], self.symbol)

    def l2_drift(self) -> float:
        """Largest relative change of the L2 norm over the snapshots."""
        n0 = self.l2[0]
        if n0 == 0:
            return float(np.max(np.abs(self.l2)))
        return float(np.max(np.abs(self.l2 - n0)) / n0)


class _Stepper:
    """Precomputed multipliers for one (grid, symbol, dt)."""

    def __init__(self, grid: Grid, symbol: DispersionSymbol, dt: float,
                 nonlinear: bool = True):
        self.grid = grid
        self.m = grid.modes
        self.mask = grid.xi <= grid.dealias_cut
        omega = MultiplierTable.build(grid, symbol).omega
        self.ik = 1j * grid.xi * self.mask
        self.e_half = np.exp(0.5j * dt * omega) * self.mask
        self.e_full = np.exp(1j * dt * omega) * self.mask
        self.e_half_inv = np.conj(self.e_half)
        self.e_full_inv = np.conj(self.e_full)
        self.dt = dt
        self.nonlinear = nonlinear

    def nonlin(self, c):
        # FT of (v^2)_x, dealiased
        return self.ik * dealiased_product_half(c, c, self.m, self.mask)

    def step(self, c):
        h = self.dt
        if not self.nonlinear:
            return self.e_full * c
        k1 = self.nonlin(c)
        k2 = self.e_half_inv * self.nonlin(self.e_half * (c + 0.5 * h * k1))
        k3 = self.e_half_inv * self.nonlin(self.e_half * (c + 0.5 * h * k2))
        k4 = self.e_full_inv * self.nonlin(self.e_full * (c + h * k3))
        return self.e_full * (c + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4))


def _check_finite(c, t):
    mag = np.max(np.abs(c)) if c.size else 0.0
    if not np.isfinite(mag) or mag > BLOWUP_THRESHOLD:
        raise BlowUpError(f"coefficients blew up (max |c| = {mag:.3g}) at t={t:g}",
                          time=t)


def step(state: SpectralField, t: float, dt: float, symbol: DispersionSymbol,
         nonlinear: bool = True) -> SpectralField:
    """One integrating-factor RK4 step from ``t`` to ``t + dt`` (the flow is
    autonomous, so ``t`` only labels errors)."""
    if not state.mean_zero:
        raise ConfigError("step needs a mean-zero state")
    st = _Stepper(state.grid, symbol, dt, nonlinear)
    c = st.step(np.where(st.mask, state.half, 0.0))
    _check_finite(c, t + dt)
    return SpectralField(state.grid, c, mean_zero=True)


def to_interaction(v: SpectralField, t: float,
                   symbol: DispersionSymbol) -> SpectralField:
    omega = MultiplierTable.build(v.grid, symbol).omega
    return v.with_half(v.half * np.exp(-1j * t * omega))


def from_interaction(vb: SpectralField, t: float,
                     symbol: DispersionSymbol) -> SpectralField:
    omega = MultiplierTable.build(vb.grid, symbol).omega
    return vb.with_half(vb.half * np.exp(1j * t * omega))


def propagate(v: SpectralField, t: float,
              symbol: DispersionSymbol) -> SpectralField:
    """Linear propagator ``S(t)`` of the symbol."""
    return from_interaction(v, t, symbol)


def interaction_rhs(t: float, vb: SpectralField,
                    symbol: DispersionSymbol) -> SpectralField:
    """Right-hand side of the interaction-representation ODE at time ``t``."""
    grid = vb.grid
    st = _Stepper(grid, symbol, 0.0)
    omega = MultiplierTable.build(grid, symbol).omega
    c = np.where(st.mask, vb.half * np.exp(1j * t * omega), 0.0)
    out = np.exp(-1j * t * omega) * st.nonlin(c)
    return SpectralField(grid, out, mean_zero=True)


def solve(problem: EvolutionProblem) -> Trajectory:
    """Integrate ``problem`` over ``[0, horizon]``.

    Snapshots are stored every ``record_every`` steps and at the final time.
    On blow-up a :class:`BlowUpError` is raised whose ``partial`` attribute
    holds the trajectory up to the last good snapshot.
    """
    init = problem.initial
    grid = init.grid
    mask = grid.xi <= grid.dealias_cut
    warnings = []
    c = np.array(init.half)
    scale = float(np.max(np.abs(c))) if c.size else 0.0
    # transform round-off leaves ~1e-17 noise on every mode
    if np.any(np.abs(c[~mask]) > 1e-13 * max(scale, 1e-300)):
        warnings.append(f"initial data has modes above the dealiasing cut "
                        f"{grid.dealias_cut}; they were removed")
        c = np.where(mask, c, 0.0)
    first = SpectralField(grid, c, mean_zero=True)

    n = problem.steps
    h = problem.step_size
    every = int(problem.record_every)
    times = [0.0]
    states = [first]
    st = _Stepper(grid, problem.symbol, h, problem.nonlinear)

    vmax = float(np.max(np.abs(first.samples()))) if n else 0.0
    if n and h * grid.modes * vmax >= CFL_LIMIT:
        msg = (f"nonlinear CFL guard: dt*M*max|v| = {h * grid.modes * vmax:.3g}"
               f" >= {CFL_LIMIT}")
        log.warning(msg)
        warnings.append(msg)

    def _finish(failed_at=None):
        l2 = np.array([l2_norm(s) for s in states])
        means = np.array([s.mean for s in states])
        return Trajectory(problem, np.array(times), states, l2, means,
                          warnings, failed_at)

    for i in range(1, n + 1):
        c = st.step(c)
        t = i * h
        try:
            _check_finite(c, t)
        except BlowUpError as exc:
            exc.partial = _finish(failed_at=t)
            raise
        if i % every == 0 or i == n:
            times.append(t)
            states.append(SpectralField(grid, c, mean_zero=True))
    return _finish()


def measured_order(symbol: DispersionSymbol, initial: SpectralField,
                   horizon: float, dt: float | None = None) -> float:
    """Empirical convergence order from runs with ``dt``, ``dt/2``, ``dt/4``.

    Returns ``log2(|y_dt - y_dt/2| / |y_dt/2 - y_dt/4|)`` on the final
    states.
    """
    if dt is None:
        dt = horizon / 16
    finals = []
    for k in range(3):
        p = EvolutionProblem(symbol, initial, horizon, dt / 2 ** k,
                             record_every=10 ** 9)
        finals.append(solve(p).states[-1])
    e1 = l2_norm(finals[0] - finals[1])
    e2 = l2_norm(finals[1] - finals[2])
    return float(np.log2(e1 / e2))


# -- persistence ------------------------------------------------------------------


def _symbol_json(symbol):
    return {"kind": symbol.kind.value, "delta": symbol.delta}


def save_trajectory(traj: Trajectory, directory) -> list:
    """Write ``manifest.json`` plus one field record per snapshot; returns the
    written paths."""
    os.makedirs(directory, exist_ok=True)
    paths = []
    names = []
    for k, s in enumerate(traj.states):
        name = f"snapshot_{k:05d}.txt"
        path = os.path.join(directory, name)
        with open(path, "w") as fh:
            fh.write(dumps(s))
        names.append(name)
        paths.append(path)
    p = traj.problem
    manifest = {
        "symbol": _symbol_json(p.symbol),
        "horizon": p.horizon,
        "dt": p.dt,
        "record_every": p.record_every,
        "nonlinear": p.nonlinear,
        "times": [float(t) for t in traj.times],
        "l2": [float(x) for x in traj.l2],
        "means": [float(x) for x in traj.means],
        "warnings": list(traj.warnings),
        "failed_at": traj.failed_at,
        "snapshots": names,
    }
    mpath = os.path.join(directory, "manifest.json")
    with open(mpath, "w") as fh:
        json.dump(manifest, fh, indent=2)
    paths.append(mpath)
    return paths


def load_trajectory(directory) -> Trajectory:
    with open(os.path.join(directory, "manifest.json")) as fh:
        m = json.load(fh)
    states = []
    for name in m["snapshots"]:
        with open(os.path.join(directory, name)) as fh:
            states.append(loads(fh.read()))
    sym = DispersionSymbol(Kind(m["symbol"]["kind"]), m["symbol"]["delta"])
    problem = EvolutionProblem(sym, states[0], m["horizon"], m["dt"],
                               m["record_every"], m["nonlinear"])
    return Trajectory(problem, np.array(m["times"]), states, np.array(m["l2"]),
                      np.array(m["means"]), m["warnings"], m["failed_at"])
