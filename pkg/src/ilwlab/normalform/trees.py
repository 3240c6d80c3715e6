"""Ordered binary trees and their frequency assignments.

A tree of ``J`` generations has nodes ``0..2J``.  Node 0 is the root and is
expanded in generation 1 into children ``(1, 2)``; generation ``j >= 2``
expands one terminal node of the current tree into children
``(2j - 1, 2j)``.  The chronicle records, for each ``j = 2..J``, the planar
(left-to-right) index of the terminal that was expanded, so ``chronicle[j-2]``
ranges over ``0..j-1`` and there are exactly ``J!`` ordered trees.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from ..errors import ConfigError, CostGuardError, DomainError

MAX_ENUMERATED_GENERATIONS = 6


@dataclass(frozen=True)
class OrderedTree:
    generations: int
    chronicle: tuple = ()

    def __post_init__(self):
        j = int(self.generations)
        if j < 1:
            raise ConfigError(f"a tree has at least one generation, got {j}")
        ch = tuple(int(c) for c in self.chronicle)
        if len(ch) != j - 1:
            raise ConfigError(f"chronicle of a {j}-generation tree has {j - 1} "
                              f"entries, got {len(ch)}")
        for g, c in enumerate(ch, start=2):
            if not 0 <= c < g:
                raise ConfigError(f"generation {g} expands terminal {c}, "
                                  f"but only {g} terminals exist")
        object.__setattr__(self, "generations", j)
        object.__setattr__(self, "chronicle", ch)

    @cached_property
    def _structure(self):
        left, right, parent = {0: 1}, {0: 2}, {1: 0, 2: 0}
        expanded = [0]
        terminals = [1, 2]
        for g, c in enumerate(self.chronicle, start=2):
            node = terminals[c]
            a, b = 2 * g - 1, 2 * g
            left[node], right[node] = a, b
            parent[a] = parent[b] = node
            expanded.append(node)
            terminals[c: c + 1] = [a, b]
        return left, right, parent, tuple(expanded), tuple(terminals)

    @property
    def nodes(self) -> tuple:
        return tuple(range(2 * self.generations + 1))

    @property
    def left(self) -> dict:
        return dict(self._structure[0])

    @property
    def right(self) -> dict:
        return dict(self._structure[1])

    @property
    def parent(self) -> dict:
        return dict(self._structure[2])

    @property
    def expanded(self) -> tuple:
        """Node turned non-terminal in generation ``1..J`` (the j-th root)."""
        return self._structure[3]

    @property
    def terminals(self) -> tuple:
        """Terminal nodes in planar left-to-right order."""
        return self._structure[4]

    @property
    def nonterminals(self) -> tuple:
        return tuple(sorted(self.expanded))

    def sibling(self, node: int) -> int:
        if node == 0:
            raise DomainError("the root has no sibling")
        return node + 1 if node % 2 else node - 1

    def children(self, node: int) -> tuple:
        left, right = self._structure[0], self._structure[1]
        if node not in left:
            return ()
        return left[node], right[node]

    def generation_of(self, node: int) -> int:
        """Generation in which a non-terminal node acquired its children."""
        try:
            return self.expanded.index(node) + 1
        except ValueError:
            raise DomainError(f"node {node} is terminal") from None

    def truncate(self, j: int) -> "OrderedTree":
        """The tree ``T_j`` of the chronicle."""
        if not 1 <= j <= self.generations:
            raise DomainError(f"generation {j} outside 1..{self.generations}")
        return OrderedTree(j, self.chronicle[: j - 1])

    @cached_property
    def leaf_matrix(self) -> np.ndarray:
        """0/1 matrix ``S`` with ``node_freqs = S @ leaf_freqs`` (leaves in
        planar order)."""
        n = 2 * self.generations + 1
        pos = {leaf: i for i, leaf in enumerate(self.terminals)}
        s = np.zeros((n, len(pos)), dtype=np.int64)

        def fill(node):
            kids = self.children(node)
            if not kids:
                s[node, pos[node]] = 1
            else:
                s[node] = fill(kids[0]) + fill(kids[1])
            return s[node]

        fill(0)
        s.flags.writeable = False
        return s


def count_trees(j: int) -> int:
    return math.factorial(j)


def enumerate_trees(j: int) -> list:
    """All ordered trees of ``j`` generations in canonical chronicle order."""
    j = int(j)
    if j < 1:
        raise ConfigError(f"generations must be positive, got {j}")
    if j > MAX_ENUMERATED_GENERATIONS:
        raise CostGuardError(f"refusing to enumerate {j}! trees "
                             f"(limit J <= {MAX_ENUMERATED_GENERATIONS})",
                             estimate=math.factorial(j))
    ranges = [range(g) for g in range(2, j + 1)]
    return [OrderedTree(j, ch) for ch in itertools.product(*ranges)]


@dataclass(frozen=True)
class IndexAssignment:
    """Nonzero integer frequencies on the terminal nodes of a tree, in planar
    order; every other node carries the sum over its subtree."""

    tree: OrderedTree
    leaf_freqs: tuple

    def __post_init__(self):
        lf = tuple(int(x) for x in self.leaf_freqs)
        if len(lf) != len(self.tree.terminals):
            raise ConfigError(f"{len(self.tree.terminals)} leaf frequencies "
                              f"needed, got {len(lf)}")
        object.__setattr__(self, "leaf_freqs", lf)
        if np.any(self.node_freqs == 0):
            raise DomainError("all node frequencies must be nonzero")

    @cached_property
    def node_freqs(self) -> np.ndarray:
        return self.tree.leaf_matrix @ np.array(self.leaf_freqs, dtype=np.int64)

    def frequency(self, node: int) -> int:
        return int(self.node_freqs[node])

    def triple(self, j: int) -> tuple:
        """``(xi^(j), xi1^(j), xi2^(j))`` of generation ``j``."""
        node = self.tree.expanded[j - 1]
        a, b = self.tree.children(node)
        f = self.node_freqs
        return int(f[node]), int(f[a]), int(f[b])

    @cached_property
    def mu(self) -> np.ndarray:
        """``mu_j = -3 xi^(j) xi1^(j) xi2^(j)`` for ``j = 1..J``."""
        return np.array([-3 * np.prod(self.triple(j), dtype=np.int64)
                         for j in range(1, self.tree.generations + 1)],
                        dtype=np.int64)

    @cached_property
    def mu_tilde(self) -> np.ndarray:
        return np.cumsum(self.mu)


class Membership(str, enum.Enum):
    NEAR = "A"
    FAR = "A^c"


def threshold_exceeded(mu_tilde_j, mu_tilde_prev, j: int, K: float):
    """True on ``A_j^c``: ``|mu_1| > (3K)^4`` for ``j = 1``, else
    ``|mu~_j| > (j+2)^4 |mu~_{j-1}|``.  Vectorized over array inputs."""
    if j == 1:
        return np.abs(mu_tilde_j) > (3.0 * K) ** 4
    return np.abs(mu_tilde_j) > (j + 2.0) ** 4 * np.abs(mu_tilde_prev)


def set_membership(assignment: IndexAssignment, j: int, params) -> Membership:
    """Whether generation ``j`` of ``assignment`` lies in ``A_j`` or its
    complement."""
    if not 1 <= j <= assignment.tree.generations:
        raise DomainError(f"generation {j} outside 1..{assignment.tree.generations}")
    mt = assignment.mu_tilde
    prev = mt[j - 2] if j >= 2 else 0
    far = threshold_exceeded(mt[j - 1], prev, j, params.K)
    return Membership.FAR if far else Membership.NEAR
