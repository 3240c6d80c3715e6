"""Ordered trees, tree-indexed multilinear operators and checks of the
normal-form identities."""

from .operators import (NfParams, OperatorKind, edelta_majorant, eval_bilinear,
                        eval_multilinear, estimate_terms)
from .trees import (IndexAssignment, Membership, OrderedTree, count_trees,
                    enumerate_trees, set_membership)
from .verify import (BOUND_COLUMNS, BoundRow, Reconstruction, measure_bounds,
                     reconstruct, verify_step1)

__all__ = [
    "NfParams", "OperatorKind", "edelta_majorant", "eval_bilinear",
    "eval_multilinear", "estimate_terms", "IndexAssignment", "Membership",
    "OrderedTree", "count_trees", "enumerate_trees", "set_membership",
    "BOUND_COLUMNS", "BoundRow", "Reconstruction", "measure_bounds",
    "reconstruct", "verify_step1",
]
