"""Tree-indexed multilinear operators on a truncated torus lattice.

Every node frequency is restricted to ``0 < |xi_a| <= L`` (``L`` the lattice
cut), which is exactly the Galerkin system integrated by the solver when
``L`` equals the dealiasing cut.  Each pairing carries one ``(2 pi)^{-1/2}``,
so a ``(j+1)``-linear operator carries ``(2 pi)^{-j/2}``.

Kinds, on the trees of ``j`` generations with sign ``(-1)^{j-1}`` and the
derivative product ``prod_k xi^(k)``:

========  ===================================  ==========================  ==================
kind      indicator                            multiplier                  denominator
========  ===================================  ==========================  ==================
N0        all ``A_k^c``, ``k <= j``            ``exp(i t mu~_j)``          ``prod_{k<=j} mu~_k``
N1        ``A_j`` and ``A_k^c``, ``k < j``     ``i exp(i t mu~_j)``        ``prod_{k<j} mu~_k``
N2        all ``A_k^c``, ``k <= j``            ``i exp(i t mu~_j)``        ``prod_{k<j} mu~_k``
N         ``A_k^c``, ``k < j``                 ``i exp(i t mu~_j)``        ``prod_{k<j} mu~_k``
Edelta    ``A_k^c``, ``k < j``                 ``i phi_delta exp(i t mu~_{j-1})``  ``prod_{k<j} mu~_k``
========  ===================================  ==========================  ==================

where ``phi_delta`` is evaluated on the last generation.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ..errors import ConfigError, CostGuardError
from ..spectral import SQRT_2PI, Grid, SpectralField
from ..symbols import phi_delta
from .trees import enumerate_trees, threshold_exceeded

MAX_GENERATIONS = 4
COST_LIMIT = 1e9


class OperatorKind(str, enum.Enum):
    N0 = "N0"
    N1 = "N1"
    N2 = "N2"
    N = "N"
    EDELTA = "Edelta"


@dataclass(frozen=True)
class NfParams:
    """``K`` is the size threshold of the first resonant set, ``lattice_cut``
    the frequency cut ``L`` (``None``: the dealiasing cut of the input grid)."""

    K: float = 1.0
    delta: float | None = None
    lattice_cut: int | None = None
    max_gen: int = 3

    def __post_init__(self):
        if not self.K >= 1:
            raise ConfigError(f"K must be >= 1, got {self.K}")
        if self.delta is not None and not self.delta > 0:
            raise ConfigError(f"delta must be positive, got {self.delta}")
        if self.lattice_cut is not None and int(self.lattice_cut) < 1:
            raise ConfigError("lattice_cut must be a positive integer")
        if not 1 <= int(self.max_gen) <= MAX_GENERATIONS:
            raise ConfigError(f"max_gen must lie in 1..{MAX_GENERATIONS}, "
                              f"got {self.max_gen}")

    def cut_for(self, grid: Grid) -> int:
        if self.lattice_cut is None:
            return grid.dealias_cut
        cut = int(self.lattice_cut)
        if cut >= grid.nyquist:
            raise ConfigError(f"lattice cut {cut} needs a grid with more than "
                              f"{2 * cut} modes, got {grid.modes}")
        return cut


def estimate_terms(j: int, cut: int) -> float:
    """Upper bound on summed terms: ``j!`` trees times ``(2L)^(j+1)``
    leaf assignments."""
    return math.factorial(j) * float(2 * cut) ** (j + 1)


@dataclass(frozen=True)
class _TreeTable:
    """Static data of one tree on one lattice: every valid assignment with a
    positive root frequency."""

    root: np.ndarray        # (n,) root frequency
    leaves: np.ndarray      # (n, j+1) leaf frequencies, planar order
    triples: np.ndarray     # (n, j, 3) generation triples
    mu_tilde: np.ndarray    # (n, j)
    xi_prod: np.ndarray     # (n,) prod_k xi^(k)


def _expand(freqs, node, a, b, cut):
    vals = np.concatenate([np.arange(-cut, 0), np.arange(1, cut + 1)])
    f = freqs[:, node]
    n = f.size
    f1 = np.tile(vals, n)
    rows = np.repeat(np.arange(n), vals.size)
    f2 = f[rows] - f1
    ok = (f2 != 0) & (np.abs(f2) <= cut)
    rows, f1, f2 = rows[ok], f1[ok], f2[ok]
    out = freqs[rows].copy()
    out[:, a] = f1
    out[:, b] = f2
    return out


@lru_cache(maxsize=16)
def _tree_table(chronicle: tuple, j: int, cut: int) -> _TreeTable:
    from .trees import OrderedTree

    tree = OrderedTree(j, chronicle)
    freqs = np.zeros((cut, 2 * j + 1), dtype=np.int64)
    freqs[:, 0] = np.arange(1, cut + 1)
    for g, node in enumerate(tree.expanded, start=1):
        freqs = _expand(freqs, node, 2 * g - 1, 2 * g, cut)
    parents = np.array(tree.expanded)
    kids = np.array([tree.children(p) for p in tree.expanded])
    triples = np.stack([freqs[:, parents], freqs[:, kids[:, 0]],
                        freqs[:, kids[:, 1]]], axis=-1)
    mu = -3 * np.prod(triples, axis=-1)
    mu_tilde = np.cumsum(mu, axis=1).astype(float)
    xi_prod = np.prod(freqs[:, parents].astype(float), axis=1)
    table = _TreeTable(freqs[:, 0], freqs[:, list(tree.terminals)],
                       triples, mu_tilde, xi_prod)
    for arr in (table.root, table.leaves, table.triples, table.mu_tilde,
                table.xi_prod):
        arr.flags.writeable = False
    return table


def _far_masks(table: _TreeTable, K: float):
    """``far[:, k-1]`` is membership in ``A_k^c``."""
    mt = table.mu_tilde
    j = mt.shape[1]
    far = np.empty(mt.shape, dtype=bool)
    for k in range(1, j + 1):
        prev = mt[:, k - 2] if k >= 2 else 0.0
        far[:, k - 1] = threshold_exceeded(mt[:, k - 1], prev, k, K)
    return far


def _check_cost(j, cut):
    est = estimate_terms(j, cut)
    if est > COST_LIMIT:
        raise CostGuardError(f"estimated {est:.3g} terms exceeds {COST_LIMIT:.0e}",
                             estimate=est)


def _leaf_product(u: SpectralField, leaves, cut):
    c = u.centered(cut)
    return np.prod(c[leaves + cut], axis=1)


def eval_multilinear(kind, j: int, t: float, u: SpectralField,
                     params: NfParams) -> SpectralField:
    """Evaluate the ``(j+1)``-linear operator ``kind`` at time ``t`` on the
    interaction variable ``u``; the output lives on ``0 < xi <= L``."""
    kind = OperatorKind(kind)
    j = int(j)
    if not 1 <= j <= params.max_gen:
        raise ConfigError(f"generation {j} outside 1..{params.max_gen}")
    if kind is OperatorKind.EDELTA and params.delta is None:
        raise ConfigError("Edelta needs params.delta")
    grid = u.grid
    cut = params.cut_for(grid)
    _check_cost(j, cut)
    out = np.zeros(grid.nyquist + 1, dtype=complex)
    sign = (-1) ** (j - 1)
    norm = sign / SQRT_2PI ** j
    for tree in enumerate_trees(j):
        tab = _tree_table(tree.chronicle, j, cut)
        if tab.root.size == 0:
            continue
        far = _far_masks(tab, params.K)
        prior = np.all(far[:, : j - 1], axis=1)
        if kind in (OperatorKind.N0, OperatorKind.N2):
            ind = prior & far[:, j - 1]
        elif kind is OperatorKind.N1:
            ind = prior & ~far[:, j - 1]
        else:
            ind = prior
        if not np.any(ind):
            continue
        mt = tab.mu_tilde[ind]
        # nonzero on the selected sets: every A_k^c forces |mu~_k| > 0
        assert np.all(mt[:, : j - 1] != 0)
        den = np.prod(mt[:, : j - 1], axis=1)
        if kind is OperatorKind.N0:
            assert np.all(mt[:, j - 1] != 0)
            den = den * mt[:, j - 1]
            mult = np.exp(1j * t * mt[:, j - 1])
        elif kind is OperatorKind.EDELTA:
            tr = tab.triples[ind, j - 1]
            prev = mt[:, j - 2] if j >= 2 else 0.0
            mult = 1j * np.asarray(phi_delta(t, tr[:, 0].astype(float),
                                             tr[:, 1].astype(float),
                                             tr[:, 2].astype(float),
                                             params.delta)) * np.exp(1j * t * prev)
        else:
            mult = 1j * np.exp(1j * t * mt[:, j - 1])
        vals = mult * tab.xi_prod[ind] / den * _leaf_product(u, tab.leaves[ind], cut)
        root = tab.root[ind]
        out += np.bincount(root, weights=vals.real, minlength=out.size)[: out.size]
        out += 1j * np.bincount(root, weights=vals.imag, minlength=out.size)[: out.size]
    return SpectralField(grid, norm * out, mean_zero=True)


def eval_bilinear(t: float, u: SpectralField, cut: int | None = None) -> SpectralField:
    """``N^(1)(t)(u)(xi) = (2 pi)^{-1/2} sum_{xi1 + xi2 = xi}
    exp(i t Xi_KdV) i xi u(xi1) u(xi2)`` by direct double loop over the
    lattice ``0 < |xi|, |xi1|, |xi2| <= cut``."""
    if not u.mean_zero:
        raise ConfigError("eval_bilinear needs a mean-zero field")
    grid = u.grid
    cut = grid.dealias_cut if cut is None else int(cut)
    c = u.centered(cut)
    out = np.zeros(grid.nyquist + 1, dtype=complex)
    for xi in range(1, cut + 1):
        acc = 0j
        for xi1 in range(-cut, cut + 1):
            xi2 = xi - xi1
            if xi1 == 0 or xi2 == 0 or abs(xi2) > cut:
                continue
            acc += np.exp(-3j * t * xi * xi1 * xi2) * c[xi1 + cut] * c[xi2 + cut]
        out[xi] = 1j * xi * acc / SQRT_2PI
    return SpectralField(grid, out, mean_zero=True)


def edelta_majorant(t: float, u: SpectralField, delta: float,
                    cut: int | None = None) -> SpectralField:
    """Pointwise bound ``(2 pi)^{-1/2} sum |t gap| |xi| |u(xi1)| |u(xi2)|`` on
    the first error operator, from ``|phi_delta| <= |t| |Xi_delta - Xi_KdV|``."""
    from ..symbols import resonance_gap

    grid = u.grid
    cut = grid.dealias_cut if cut is None else int(cut)
    c = np.abs(u.centered(cut))
    out = np.zeros(grid.nyquist + 1)
    xi1 = np.arange(-cut, cut + 1)
    for xi in range(1, cut + 1):
        xi2 = xi - xi1
        ok = (xi1 != 0) & (xi2 != 0) & (np.abs(xi2) <= cut)
        gap = np.abs(resonance_gap(np.full(ok.sum(), float(xi)), xi1[ok].astype(float),
                                   xi2[ok].astype(float), delta))
        out[xi] = abs(t) * xi * np.sum(gap * c[xi1[ok] + cut] * c[xi2[ok] + cut])
    return SpectralField(grid, out / SQRT_2PI, mean_zero=True)
