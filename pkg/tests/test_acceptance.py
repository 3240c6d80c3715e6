"""Acceptance criteria 1-9.  Each test records a PASS/FAIL line that is printed
in the terminal summary; failures are re-raised so the run goes red."""

import csv
import math
from contextlib import contextmanager
from pathlib import Path

import numpy as np
import pytest

from conftest import ACCEPTANCE
from ilwlab.evolve import EvolutionProblem, measured_order, solve
from ilwlab.integrable import (alpha_track, default_window, hs_norm_sq,
                               sandwich)
from ilwlab.lab.config import parse_config
from ilwlab.lab.experiments import run
from ilwlab.normalform import (NfParams, count_trees, enumerate_trees,
                               eval_bilinear, eval_multilinear, reconstruct,
                               verify_step1)
from ilwlab.spectral import (SQRT_2PI, Grid, from_function, galilean_reduce,
                             l2_norm, random_field)
from ilwlab.symbols import (DispersionSymbol, h_delta, lambda_delta,
                            lambda_series, resonance_gap)

ANCHOR = Path(__file__).parent / "data" / "converge_shallow_anchor.csv"
CONVERGE = {"experiment": "converge-shallow", "modes": 128, "horizon": 0.5,
            "dt": 1e-3, "recordEvery": 10, "initialData": {"profile": "cos"},
            "deltaGrid": [0.2, 0.1, 0.05, 0.025]}


def _record(n, ok, text):
    # parametrized criteria accumulate: one failing case fails the criterion
    prev_ok, prev_text = ACCEPTANCE.get(n, (True, ""))
    ACCEPTANCE[n] = (prev_ok and ok, "; ".join(t for t in (prev_text, text) if t))


@contextmanager
def criterion(n):
    detail = {}
    try:
        yield detail
    except AssertionError:
        _record(n, False, detail.get("text", ""))
        raise
    _record(n, True, detail.get("text", ""))


def cos_field(m):
    return galilean_reduce(from_function(np.cos, Grid(m)))[0]


def test_multiplier_consistency():
    with criterion(1) as d:
        worst, violations = 0.0, 0
        for delta in (1.0, 0.5, 0.1, 0.01):
            for xi in [s * k for k in range(1, 65) for s in (1, -1)]:
                lam = lambda_delta(float(xi), delta)
                ref = lambda_series(float(xi), delta, terms=100_000)
                worst = max(worst, abs(lam - ref) / ref)
                violations += not 0 < lam <= xi * xi
                violations += not h_delta(float(xi), delta) <= (delta * xi) ** 2
        d["text"] = f"max relative series mismatch {worst:.2e}; bound violations {violations}"
        assert worst < 1e-10
        assert violations == 0


def test_resonance_limit():
    with criterion(2) as d:
        a = np.arange(-32, 33, dtype=float)
        x1, x2 = np.meshgrid(a, a, indexing="ij")
        ok = np.abs(x1 + x2) <= 32
        x1, x2 = x1[ok], x2[ok]
        kdv = np.max(np.abs(3 * (x1 + x2) * x1 * x2))
        gaps = [float(np.max(np.abs(resonance_gap(x1 + x2, x1, x2, 2.0 ** -k))))
                for k in range(1, 13)]
        d["text"] = f"max gap at 2^-12: {gaps[-1]:.3e} (KdV scale {kdv:.0f})"
        assert all(b < a for a, b in zip(gaps, gaps[1:]))
        assert gaps[-1] < 1e-3 * kdv


def test_solver_validity():
    with criterion(3) as d:
        f = cos_field(128)
        orders = {s.label(): measured_order(s, f, 0.1)
                  for s in (DispersionSymbol.kdv(), DispersionSymbol.scaled_ilw(0.5))}
        drifts = {s.label(): solve(EvolutionProblem(s, f, 1.0, 1e-4, 1000)).l2_drift()
                  for s in (DispersionSymbol.kdv(), DispersionSymbol.scaled_ilw(0.5))}
        # scaled ILW from f against (3/delta) * ILW from (delta/3) f at 3t/delta
        delta, T, dt = 0.5, 0.5, 1e-3
        every = 100
        runs = []
        for h in (dt, dt / 2):
            v = solve(EvolutionProblem(DispersionSymbol.scaled_ilw(delta), f, T, h,
                                       round(every * dt / h)))
            u = solve(EvolutionProblem(DispersionSymbol.ilw(delta), f * (delta / 3),
                                       3 * T / delta, 3 * h / delta,
                                       round(every * dt / h)))
            runs.append((v, u))
        (v, u), (v2, _) = runs
        assert np.allclose(u.times, 3 * v.times / delta)
        mismatch = max(l2_norm(a * (3 / delta) - b) for a, b in zip(u.states, v.states))
        tol = max(l2_norm(a - b) for a, b in zip(v.states, v2.states))
        d["text"] = (f"orders {', '.join(f'{k} {o:.3f}' for k, o in orders.items())}; "
                     f"max drift {max(drifts.values()):.1e}; "
                     f"scaling mismatch {mismatch:.1e} vs solver tol {tol:.1e}")
        assert all(3.8 <= o <= 4.2 for o in orders.values())
        assert all(x < 1e-8 for x in drifts.values())
        assert mismatch <= 10 * tol


@pytest.mark.parametrize("kappa, delta", [(2.0, 1.0), (5.0, 0.5), (20.0, 0.1)])
def test_hilbert_schmidt_identity(kappa, delta):
    with criterion(4) as d:
        rng = np.random.default_rng(404)
        worst = 0.0
        for _ in range(20):
            u = random_field(Grid(64), rng)
            u = u * (1 / l2_norm(u))
            w = default_window(u, kappa, delta)
            frob = sandwich(u, kappa, delta, w).frobenius_sq()
            spectral = hs_norm_sq(u, kappa, delta, window=w)
            worst = max(worst, abs(frob - spectral) / spectral)
        d["text"] = f"(kappa={kappa:g}, delta={delta:g}) max rel {worst:.1e}"
        assert worst < 1e-8


def _alpha_drift(dt):
    f = cos_field(64)
    scale = math.sqrt((1 / 72) / hs_norm_sq(-f, 5.0, 0.5))
    traj = solve(EvolutionProblem(DispersionSymbol.ilw(0.5), f * scale, 1.0, dt))
    track = alpha_track(traj, 5.0)
    assert not track.flagged
    assert np.all(track.hs_norm_sq < 1 / 36)
    return float(np.max(np.abs(track.drift)) / abs(track.alpha[0]))


def test_alpha_conservation():
    with criterion(5) as d:
        coarse, fine = _alpha_drift(0.05), _alpha_drift(0.025)
        ratio = coarse / fine
        d["text"] = f"relative drift {coarse:.2e} -> {fine:.2e}, ratio {ratio:.1f}"
        assert coarse < 1e-6 and fine < 1e-6
        assert 12 <= ratio <= 20


def _read(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_shallow_water_convergence(tmp_path):
    with criterion(6) as d:
        run(parse_config({**CONVERGE, "outputDir": str(tmp_path / "out")}))
        got = _read(tmp_path / "out" / "converge.csv")
        want = _read(ANCHOR)
        assert got[0] == want[0]
        errs = [float(r[1]) for r in got[1:]]
        ratio = errs[-1] / errs[0]
        d["text"] = f"err {' > '.join(f'{e:.3e}' for e in errs)}; ratio {ratio:.4f}"
        assert [float(r[0]) for r in got[1:]] == CONVERGE["deltaGrid"]
        assert all(b < a for a, b in zip(errs, errs[1:]))
        assert ratio < 0.1
        assert all(r[4] == "0" for r in got[1:])
        for g, w in zip(got[1:], want[1:]):
            assert float(g[1]) == pytest.approx(float(w[1]), rel=1e-9)


def test_normal_form_identities():
    with criterion(7) as d:
        # first-generation partition
        u = random_field(Grid(32), np.random.default_rng(7), band=10)
        p = NfParams(K=1.0)
        parts = (eval_multilinear("N1", 1, 0.3, u, p)
                 + eval_multilinear("N2", 1, 0.3, u, p))
        whole = eval_bilinear(0.3, u)
        s1 = l2_norm(parts - whole) / l2_norm(whole)

        # differentiation by parts, centered difference in time
        res = []
        for h in (1e-4, 5e-5):
            tr = solve(EvolutionProblem(DispersionSymbol.kdv(), cos_field(32), 0.01, h))
            res.append(verify_step1(tr, p, 0.005))
        shrink = res[0] / res[1]

        # one normal-form reduction against the raw Duhamel formulation
        T, dt = 0.25, 1e-3
        tr = solve(EvolutionProblem(DispersionSymbol.kdv(), cos_field(32), T, dt))
        tr_half = solve(EvolutionProblem(DispersionSymbol.kdv(), cos_field(32), T, dt / 2, 2))
        r0 = reconstruct(tr, 2, p, 0.0)
        r2 = reconstruct(tr, 2, p, T)
        r1 = reconstruct(tr, 1, p, T)
        solver_err = l2_norm(tr.states[-1] - tr_half.states[-1])
        budget = 10 * (r2.quadrature_error + solver_err)

        counts = [len(enumerate_trees(j)) for j in range(1, 7)]
        d["text"] = (f"partition {s1:.1e}; step-1 residual {res[0]:.2e} "
                     f"(shrink {shrink:.2f}); J=2 residual {r2.residual:.2e} "
                     f"<= budget {budget:.2e}; J=1 {r1.residual:.2e}; "
                     f"tree counts {counts}")
        assert s1 < 1e-12
        assert res[0] < 1e-4
        assert 3.5 <= shrink <= 4.5
        assert r0.residual == 0
        assert r2.residual <= budget
        assert r2.residual <= r1.residual
        assert counts == [math.factorial(j) for j in range(1, 7)]
        assert counts == [count_trees(j) for j in range(1, 7)]


def _magnitude_sum(u, cut):
    # (2 pi)^{-1/2} sum_{xi1 + xi2 = xi} |xi| |u(xi1)| |u(xi2)| by direct loop
    c = np.abs(u.centered(cut))
    out = np.zeros(cut + 1)
    for xi in range(1, cut + 1):
        for x1 in range(-cut, cut + 1):
            x2 = xi - x1
            if x1 and x2 and abs(x2) <= cut:
                out[xi] += xi * c[x1 + cut] * c[x2 + cut]
    return out / SQRT_2PI


def test_error_operator_vanishing():
    with criterion(8) as d:
        grid, cut, t = Grid(16), 7, 0.1
        u = random_field(grid, np.random.default_rng(8), band=cut)
        mag = _magnitude_sum(u, cut)
        # the half spectrum carries each |xi| once; the L2 norm doubles it
        mag_norm = math.sqrt(2 * np.sum(mag ** 2))
        a = np.arange(-cut, cut + 1, dtype=float)
        x1, x2 = np.meshgrid(a, a, indexing="ij")
        ok = (x1 != 0) & (x2 != 0) & (x1 + x2 != 0) & (np.abs(x1 + x2) <= cut)
        norms, margins = [], []
        for delta in (0.4, 0.2, 0.1, 0.05):
            e = eval_multilinear("Edelta", 1, t, u,
                                 NfParams(delta=delta, lattice_cut=cut))
            gap = np.abs(resonance_gap(x1[ok] + x2[ok], x1[ok], x2[ok], delta))
            bound = t * gap.max() * mag
            assert np.all(np.abs(e.half[: cut + 1]) <= bound * (1 + 1e-12))
            norm = l2_norm(e)
            assert norm <= t * gap.max() * mag_norm * (1 + 1e-12)
            norms.append(norm)
            margins.append(norm / (t * gap.max() * mag_norm))
        d["text"] = (f"||E|| {' > '.join(f'{n:.3e}' for n in norms)}; "
                     f"max norm/majorant {max(margins):.3f}")
        assert all(b < a for a, b in zip(norms, norms[1:]))


def test_determinism(tmp_path):
    with criterion(9) as d:
        outs = []
        for tag in ("first", "second"):
            out = tmp_path / tag
            run(parse_config({**CONVERGE, "outputDir": str(out)}))
            outs.append(out)
        names = sorted(p.name for p in outs[0].glob("*.csv"))
        assert names == sorted(p.name for p in outs[1].glob("*.csv"))
        same = [(outs[0] / n).read_bytes() == (outs[1] / n).read_bytes() for n in names]
        d["text"] = f"{sum(same)}/{len(names)} CSV files byte-identical"
        assert all(same)
