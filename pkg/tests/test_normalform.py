import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ilwlab.errors import ConfigError, CostGuardError, DomainError
from ilwlab.evolve import EvolutionProblem, interaction_rhs, solve
from ilwlab.normalform import (BOUND_COLUMNS, NfParams, OperatorKind,
                               edelta_majorant, estimate_terms, eval_bilinear,
                               eval_multilinear, measure_bounds, reconstruct,
                               verify_step1)
from ilwlab.spectral import (SQRT_2PI, Grid, SpectralField, from_function,
                             galilean_reduce, l2_norm, random_field)
from ilwlab.symbols import DispersionSymbol

KDV = DispersionSymbol.kdv()


def field(m=32, seed=0, band=10):
    return random_field(Grid(m), np.random.default_rng(seed), band=band)


def kdv_run(m=32, horizon=0.01, dt=1e-4, every=1):
    u = galilean_reduce(from_function(np.cos, Grid(m)))[0]
    return solve(EvolutionProblem(KDV, u, horizon, dt, every))


class TestParams:
    @pytest.mark.parametrize("kw", [{"K": 0.5}, {"delta": 0.0}, {"lattice_cut": 0},
                                    {"max_gen": 5}, {"max_gen": 0}])
    def test_rejects(self, kw):
        with pytest.raises(ConfigError):
            NfParams(**kw)

    def test_cut(self):
        assert NfParams().cut_for(Grid(32)) == 10
        assert NfParams(lattice_cut=7).cut_for(Grid(16)) == 7
        with pytest.raises(ConfigError):
            NfParams(lattice_cut=8).cut_for(Grid(16))


class TestBilinear:
    def test_zero(self):
        assert l2_norm(eval_bilinear(0.3, SpectralField.zeros(Grid(16)))) == 0

    def test_single_pairing(self):
        c = 0.7 - 0.2j
        u = SpectralField.from_modes(Grid(16), {1: c}, mean_zero=True)
        out = eval_bilinear(0.0, u)
        assert out.coeff(2) == pytest.approx(2j * c * c / SQRT_2PI, abs=1e-15)
        # xi = 1 + (-1) hits the excluded zero mode
        assert out.coeff(0) == 0

    @settings(max_examples=5)
    @given(seed=st.integers(0, 2**32 - 1), t=st.floats(-1, 1))
    def test_matches_solver_rhs(self, seed, t):
        u = field(seed=seed)
        ref = interaction_rhs(t, u, KDV)
        assert l2_norm(eval_bilinear(t, u) - ref) < 1e-10 * max(l2_norm(ref), 1e-300)

    def test_rejects_mean(self):
        with pytest.raises(ConfigError):
            eval_bilinear(0.0, from_function(lambda x: 1 + np.cos(x), Grid(16)))


class TestMultilinear:
    @pytest.mark.parametrize("t", [0.0, 0.37])
    @pytest.mark.parametrize("K", [1.0, 3.0])
    def test_first_generation_partition(self, t, K):
        u = field()
        p = NfParams(K=K)
        n1 = eval_multilinear(OperatorKind.N1, 1, t, u, p)
        n2 = eval_multilinear(OperatorKind.N2, 1, t, u, p)
        ref = eval_bilinear(t, u)
        assert l2_norm(n1 + n2 - ref) < 1e-12 * l2_norm(ref)

    @pytest.mark.parametrize("j", [2, 3])
    def test_generation_partition(self, j):
        u = field(m=16, band=5)
        p = NfParams(lattice_cut=5)
        whole = eval_multilinear("N", j, 0.2, u, p)
        parts = (eval_multilinear("N1", j, 0.2, u, p)
                 + eval_multilinear("N2", j, 0.2, u, p))
        assert l2_norm(whole - parts) <= 1e-12 * max(l2_norm(whole), 1e-300)

    @pytest.mark.parametrize("kind", ["N0", "N1", "N2", "N", "Edelta"])
    def test_zero_input(self, kind):
        p = NfParams(delta=0.1, lattice_cut=5)
        out = eval_multilinear(kind, 2, 0.3, SpectralField.zeros(Grid(16)), p)
        assert l2_norm(out) == 0

    @pytest.mark.parametrize("j", [1, 2, 3])
    def test_edelta_vanishes_at_zero_time(self, j):
        p = NfParams(delta=0.3, lattice_cut=5)
        assert l2_norm(eval_multilinear("Edelta", j, 0.0, field(m=16, band=5), p)) == 0

    def test_edelta_shallow_limit(self):
        u = field(m=16, band=7)
        out = eval_multilinear("Edelta", 1, 0.1, u, NfParams(delta=1e-6, lattice_cut=7))
        assert l2_norm(out) < 1e-6

    def test_edelta_completes_ilw_rhs(self):
        # bilinear KdV term plus the first error operator is the scaled ILW term
        u, t, d = field(), 0.3, 0.5
        lhs = eval_bilinear(t, u) + eval_multilinear("Edelta", 1, t, u, NfParams(delta=d))
        ref = interaction_rhs(t, u, DispersionSymbol.scaled_ilw(d))
        assert l2_norm(lhs - ref) < 1e-12 * l2_norm(ref)

    def test_edelta_needs_depth(self):
        with pytest.raises(ConfigError):
            eval_multilinear("Edelta", 1, 0.1, field(), NfParams())

    def test_generation_cap(self):
        with pytest.raises(ConfigError):
            eval_multilinear("N0", 3, 0.0, field(), NfParams(max_gen=2))

    def test_cost_guard(self):
        p = NfParams(lattice_cut=100, max_gen=4)
        assert estimate_terms(4, 100) > 1e9
        with pytest.raises(CostGuardError) as info:
            eval_multilinear("N0", 4, 0.0, field(m=256), p)
        assert info.value.estimate == estimate_terms(4, 100)

    def test_majorant_dominates(self):
        u, t, d = field(m=16, band=7), 0.1, 0.2
        p = NfParams(delta=d, lattice_cut=7)
        e = eval_multilinear("Edelta", 1, t, u, p)
        m = edelta_majorant(t, u, d, cut=7)
        assert np.all(np.abs(e.half) <= m.half.real * (1 + 1e-12) + 1e-300)


class TestVerify:
    def test_zero_trajectory(self):
        z = SpectralField.zeros(Grid(32))
        tr = solve(EvolutionProblem(KDV, z, 0.001, 1e-4))
        assert verify_step1(tr, NfParams(), 0.0005) == 0

    def test_boundary_rejected(self):
        tr = kdv_run(horizon=0.001)
        with pytest.raises(DomainError):
            verify_step1(tr, NfParams(), 0.0)
        with pytest.raises(DomainError):
            verify_step1(tr, NfParams(), 0.001)
        with pytest.raises(DomainError):
            verify_step1(tr, NfParams(), 0.00045)

    def test_needs_kdv(self):
        u = galilean_reduce(from_function(np.cos, Grid(32)))[0]
        tr = solve(EvolutionProblem(DispersionSymbol.scaled_ilw(0.5), u, 0.001, 1e-4))
        with pytest.raises(ConfigError):
            verify_step1(tr, NfParams(), 0.0005)
        with pytest.raises(ConfigError):
            reconstruct(tr, 1, NfParams(), 0.0005)

    def test_step1_second_order(self):
        res = []
        for h in (1e-4, 5e-5):
            tr = kdv_run(horizon=0.01, dt=h)
            res.append(verify_step1(tr, NfParams(), 0.005))
        assert res[0] < 1e-4
        assert 3.5 < res[0] / res[1] < 4.5

    @pytest.mark.parametrize("J", [1, 2])
    def test_reconstruct_at_zero_time(self, J):
        r = reconstruct(kdv_run(horizon=0.001), J, NfParams(), 0.0)
        assert r.residual == 0 and r.quadrature_error == 0

    def test_reconstruct_converges(self):
        rows = []
        for dt in (2e-3, 1e-3):
            tr = kdv_run(horizon=0.05, dt=dt)
            rows.append(reconstruct(tr, 1, NfParams(), 0.05))
        assert 3.5 < rows[0].residual / rows[1].residual < 4.5
        assert rows[1].quadrature_error == pytest.approx(rows[1].residual, rel=0.05)

    def test_reconstruct_rejects_generation(self):
        with pytest.raises(ConfigError):
            reconstruct(kdv_run(horizon=0.001), 4, NfParams(), 0.0)


class TestBounds:
    def test_columns(self):
        rows = measure_bounds(1, NfParams(lattice_cut=8), samples=2)
        assert BOUND_COLUMNS == ("j", "K", "operator", "empirical ratio", "sample count")
        assert [r.operator for r in rows] == ["N0", "N1", "N2tilde"]
        assert all(r.samples == 2 and r.ratio >= 0 for r in rows)

    def test_deterministic(self):
        p = NfParams(lattice_cut=8)
        assert measure_bounds(1, p, 3, seed=5) == measure_bounds(1, p, 3, seed=5)

    def test_needs_explicit_cut(self):
        with pytest.raises(ConfigError):
            measure_bounds(1, NfParams(), 2)
        with pytest.raises(ConfigError):
            measure_bounds(1, NfParams(lattice_cut=8), 0)

    def test_second_generation_smaller(self):
        p = NfParams(K=2, lattice_cut=16)
        one = {r.operator: r.ratio for r in measure_bounds(1, p, 4)}
        two = {r.operator: r.ratio for r in measure_bounds(2, p, 4)}
        assert two["N2tilde"] < one["N2tilde"]

    def test_doubling_threshold_shrinks_n0(self):
        u = field(m=64, band=16)
        norms = [l2_norm(eval_multilinear("N0", 1, 0.0, u, NfParams(K=K, lattice_cut=16)))
                 for K in (1, 2, 4)]
        assert norms[0] >= norms[1] >= norms[2]
        assert norms[0] > 0
