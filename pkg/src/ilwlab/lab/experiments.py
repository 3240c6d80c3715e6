"""Experiment runners.  Each takes a validated :class:`RunConfig`, writes CSV
files and a manifest into the output directory, and returns the manifest.

The manifest is written even when a runner fails; the exception is then
re-raised for the caller to map to an exit status.
"""

from __future__ import annotations

import logging
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from ..errors import BlowUpError, ConfigError, CostGuardError, LabError
from ..evolve import EvolutionProblem, solve
from ..integrable import (GATE, EquicontinuityProbe, alpha_track,
                          comparability_bracket, drift_functional, hs_norm_sq,
                          tail_norm, weighted_functional)
from ..normalform import (BOUND_COLUMNS, NfParams, count_trees, measure_bounds,
                          reconstruct, verify_step1)
from ..spectral import l2_norm, project
from ..symbols import (DispersionSymbol, h_delta, lambda_delta, phase,
                       resonance_gap)
from .config import Experiment, RunConfig
from .manifest import RunManifest

log = logging.getLogger(__name__)

CONVERGE_COLUMNS = ("delta", "sup_t_L2_error", "initial_L2_difference",
                    "max_L2_drift", "flagged")
SPLIT_COLUMNS = ("t", "low_interaction_L2", "high_L2")
TAIL_COLUMNS = ("delta", "t", "tail", "W", "A_delta")
ALPHA_COLUMNS = ("delta", "t", "alpha", "drift", "hsNormSq")
SYMBOL_COLUMNS = ("xi", "delta", "Lambda", "xi2", "h", "omega_KdV",
                  "omega_ScaledILW", "omega_ILW", "omega_BO")
SYMBOL_SUMMARY_COLUMNS = ("delta", "max_resonance_gap", "max_abs_Xi_KdV")
VERIFY_COLUMNS = ("t", "residual")
RECONSTRUCT_COLUMNS = ("t", "J", "residual", "quadrature_error")
TREE_COLUMNS = ("j", "tree_count")


def _map_deltas(config: RunConfig, fn):
    """Apply ``fn`` to every delta, concurrently when threads > 1; results
    come back in grid order."""
    deltas = list(config.delta_grid)
    if config.threads > 1 and len(deltas) > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            return list(pool.map(fn, deltas))
    return [fn(d) for d in deltas]


def _initial(config: RunConfig):
    return config.initial_data.build(config.grid)


def _perturbed(v0, delta, c):
    """``v0 (1 + c delta / ||v0||)`` so that ``||v0_delta - v0|| = c delta``."""
    n = l2_norm(v0)
    if c == 0 or n == 0:
        return v0
    return v0 * (1.0 + c * delta / n)


def _problem(config, symbol, v0):
    return EvolutionProblem(symbol, v0, config.horizon, config.dt,
                            record_every=config.record_every)


def _solve(config, symbol, v0, manifest, tag):
    t0 = time.perf_counter()
    traj = solve(_problem(config, symbol, v0))
    manifest.timings[tag] = time.perf_counter() - t0
    manifest.drifts[tag] = traj.l2_drift()
    manifest.warnings.extend(f"{tag}: {w}" for w in traj.warnings)
    return traj


def _delta_tag(delta):
    # shortest repr that round-trips
    return repr(float(delta))


def _run(config: RunConfig, body) -> RunManifest:
    os.makedirs(config.output_dir, exist_ok=True)
    manifest = RunManifest(config.experiment.value, config.echo(),
                           config.output_dir)
    start = time.perf_counter()
    try:
        body(config, manifest)
        manifest.status = "ok"
    except LabError as exc:
        manifest.status = "failed"
        manifest.error = f"{type(exc).__name__}: {exc}"
        raise
    finally:
        manifest.timings["total"] = time.perf_counter() - start
        manifest.write()
    return manifest


# -- converge-shallow -----------------------------------------------------------


def _converge_body(config: RunConfig, manifest: RunManifest):
    v0 = _initial(config)
    ref = _solve(config, DispersionSymbol.kdv(), v0, manifest, "KdV")
    n_split = config.split_cutoff

    def one(delta):
        sym = DispersionSymbol.scaled_ilw(delta)
        v0d = _perturbed(v0, delta, config.perturbation)
        tag = f"ScaledILW({_delta_tag(delta)})"
        init_diff = l2_norm(v0d - v0)
        try:
            traj = _solve(config, sym, v0d, manifest, tag)
        except BlowUpError as exc:
            manifest.warnings.append(f"{tag}: {exc}")
            return (delta, math.nan, init_diff, math.nan, True), []
        errs, split = [], []
        for k, t in enumerate(traj.times):
            diff = ref.states[k] - traj.states[k]
            errs.append(l2_norm(diff))
            bold = ref.interaction(k) - traj.interaction(k)
            split.append((float(t), l2_norm(project(bold, n_split, "low")),
                          l2_norm(project(diff, n_split, "high"))))
        return (delta, max(errs), init_diff, traj.l2_drift(), False), split

    results = _map_deltas(config, one)
    rows = sorted((r for r, _ in results), key=lambda r: -r[0])
    manifest.emit_csv("converge.csv", CONVERGE_COLUMNS, rows)
    for (row, split) in results:
        if split:
            manifest.emit_csv(f"split_delta_{_delta_tag(row[0])}.csv",
                              SPLIT_COLUMNS, split)
    manifest.notes["hypothesis"] = ("smooth data: error expected to scale like "
                                    "delta^2 (not asserted)")
    manifest.notes["splitCutoff"] = n_split


def run_converge_shallow(config: RunConfig) -> RunManifest:
    _expect(config, Experiment.CONVERGE_SHALLOW)
    return _run(config, _converge_body)


# -- tail-track -------------------------------------------------------------------


def _tail_body(config: RunConfig, manifest: RunManifest):
    p = config.probe
    probe = EquicontinuityProbe(p.s, p.mu, p.N)
    v0 = _initial(config)

    def one(delta):
        sym = DispersionSymbol.scaled_ilw(delta)
        tag = f"ScaledILW({_delta_tag(delta)})"
        v0d = _perturbed(v0, delta, config.perturbation)
        try:
            traj = _solve(config, sym, v0d, manifest, tag)
        except BlowUpError as exc:
            manifest.warnings.append(f"{tag}: {exc}")
            traj = exc.partial
        drift = drift_functional(traj, probe)
        return [(delta, float(t), tail_norm(v, probe.N),
                 weighted_functional(v, probe), float(a))
                for t, v, a in zip(traj.times, traj.states, drift)]

    rows = [r for block in _map_deltas(config, one) for r in block]
    rows.sort(key=lambda r: (-r[0], r[1]))
    manifest.emit_csv("tail.csv", TAIL_COLUMNS, rows)


def run_tail_track(config: RunConfig) -> RunManifest:
    _expect(config, Experiment.TAIL_TRACK)
    return _run(config, _tail_body)


# -- alpha-conserve ---------------------------------------------------------------


def gate_scale(v0, kappa, delta, max_halvings=10):
    """Halve the amplitude until ``hs_norm_sq < 1/36``; returns the scaled
    field and the factor applied."""
    factor = 1.0
    v = v0
    for _ in range(max_halvings + 1):
        if hs_norm_sq(v, kappa, delta) < GATE:
            return v, factor
        factor *= 0.5
        v = v0 * factor
    raise ConfigError(f"smallness gate not met after {max_halvings} halvings "
                      f"(kappa={kappa}, delta={delta})")


def _alpha_body(config: RunConfig, manifest: RunManifest):
    v0 = _initial(config)
    kappa = config.kappa

    def one(delta):
        u0, factor = gate_scale(v0, kappa, delta)
        tag = f"ILW({_delta_tag(delta)})"
        manifest.notes[f"amplitudeScale {tag}"] = factor
        traj = _solve(config, DispersionSymbol.ilw(delta), u0, manifest, tag)
        track = alpha_track(traj, kappa)
        if track.flagged:
            manifest.warnings.append(f"{tag}: gate violated at snapshots "
                                     f"{track.flagged}")
        a0 = track.alpha[0]
        rel = (float(np.nanmax(np.abs(track.drift))) / abs(a0)) if a0 else 0.0
        manifest.drifts[f"alpha {tag}"] = rel
        return [(delta, float(t), float(a), float(d), float(h))
                for t, a, d, h in zip(track.times, track.alpha, track.drift,
                                      track.hs_norm_sq)]

    rows = [r for block in _map_deltas(config, one) for r in block]
    rows.sort(key=lambda r: (-r[0], r[1]))
    manifest.emit_csv("alpha.csv", ALPHA_COLUMNS, rows)
    xis = np.arange(0, 65, 4)
    lo, hi = comparability_bracket(xis, [kappa, 2 * kappa, 4 * kappa],
                                   list(config.delta_grid))
    manifest.notes["comparabilityBracket"] = [lo, hi]


def run_alpha_conserve(config: RunConfig) -> RunManifest:
    _expect(config, Experiment.ALPHA_CONSERVE)
    return _run(config, _alpha_body)


# -- nf-verify -------------------------------------------------------------------


def _nf_body(config: RunConfig, manifest: RunManifest):
    nf = config.nf
    params = NfParams(K=nf.K, delta=nf.delta, lattice_cut=nf.lattice_cut,
                      max_gen=nf.max_gen)
    v0 = _initial(config)
    traj = _solve(config, DispersionSymbol.kdv(), v0, manifest, "KdV")
    n = len(traj.times)
    interior = np.unique(np.linspace(1, n - 2, nf.verify_times).round().astype(int))
    rows = [(float(traj.times[k]), verify_step1(traj, params, traj.times[k]))
            for k in interior if 0 < k < n - 1]
    manifest.emit_csv("verify_step1.csv", VERIFY_COLUMNS, rows)

    rec = []
    picks = np.unique(np.linspace(0, n - 1, nf.verify_times).round().astype(int))
    for J in (1, 2):
        if J > params.max_gen:
            continue
        for k in picks:
            try:
                r = reconstruct(traj, J, params, traj.times[k])
            except CostGuardError as exc:
                manifest.warnings.append(f"reconstruct J={J}: {exc}")
                break
            rec.append((r.t, r.J, r.residual, r.quadrature_error))
    manifest.emit_csv("reconstruct.csv", RECONSTRUCT_COLUMNS, rec)

    bounds = []
    bparams = NfParams(K=nf.K, delta=nf.delta,
                       lattice_cut=nf.lattice_cut or config.grid.dealias_cut,
                       max_gen=nf.max_gen)
    for j in range(1, params.max_gen + 1):
        try:
            rows_j = measure_bounds(j, bparams, nf.samples, seed=j)
        except CostGuardError as exc:
            manifest.warnings.append(f"measure_bounds j={j}: {exc}")
            continue
        bounds.extend((b.j, b.K, b.operator, b.ratio, b.samples) for b in rows_j)
    manifest.emit_csv("bounds.csv", BOUND_COLUMNS, bounds)
    manifest.emit_csv("trees.csv", TREE_COLUMNS,
                      [(j, count_trees(j)) for j in range(1, params.max_gen + 1)])
    manifest.notes["theta"] = 0.3


def run_nf_verify(config: RunConfig) -> RunManifest:
    _expect(config, Experiment.NF_VERIFY)
    return _run(config, _nf_body)


# -- symbol-table ----------------------------------------------------------------


def _symbol_body(config: RunConfig, manifest: RunManifest):
    xis = np.arange(0, config.xi_max + 1, dtype=float)
    rows = []
    summary = []
    a = np.arange(-config.xi_max, config.xi_max + 1, dtype=float)
    x1, x2 = np.meshgrid(a, a, indexing="ij")
    ok = np.abs(x1 + x2) <= config.xi_max
    x1, x2 = x1[ok], x2[ok]
    xi_kdv = np.max(np.abs(-3.0 * (x1 + x2) * x1 * x2))
    for delta in config.delta_grid:
        lam = lambda_delta(xis, delta)
        h = h_delta(xis, delta)
        om = {k: phase(s, xis) for k, s in (
            ("kdv", DispersionSymbol.kdv()),
            ("sc", DispersionSymbol.scaled_ilw(delta)),
            ("ilw", DispersionSymbol.ilw(delta)),
            ("bo", DispersionSymbol.bo()))}
        for i, xi in enumerate(xis):
            rows.append((int(xi), delta, float(lam[i]), float(xi * xi), float(h[i]),
                         float(om["kdv"][i]), float(om["sc"][i]),
                         float(om["ilw"][i]), float(om["bo"][i])))
        gap = np.max(np.abs(resonance_gap(x1 + x2, x1, x2, delta)))
        summary.append((delta, float(gap), float(xi_kdv)))
    manifest.emit_csv("symbols.csv", SYMBOL_COLUMNS, rows)
    manifest.emit_csv("resonance_summary.csv", SYMBOL_SUMMARY_COLUMNS, summary)


def run_symbol_table(config: RunConfig) -> RunManifest:
    _expect(config, Experiment.SYMBOL_TABLE)
    return _run(config, _symbol_body)


RUNNERS = {
    Experiment.CONVERGE_SHALLOW: run_converge_shallow,
    Experiment.TAIL_TRACK: run_tail_track,
    Experiment.ALPHA_CONSERVE: run_alpha_conserve,
    Experiment.NF_VERIFY: run_nf_verify,
    Experiment.SYMBOL_TABLE: run_symbol_table,
}


def _expect(config: RunConfig, kind: Experiment):
    if config.experiment is not kind:
        raise ConfigError(f"config is for {config.experiment.value}, "
                          f"not {kind.value}")


def run(config: RunConfig) -> RunManifest:
    return RUNNERS[config.experiment](config)
