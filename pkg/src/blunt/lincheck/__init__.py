"""Linearizability, strong and tail strong linearizability checks."""

from __future__ import annotations

from .canonical import NotComplete, abd_canonical_linearization, canonical_prefix_check
from .fuzz import FuzzResult, fuzz_linearizability, fuzz_runs, random_program
from .history import LinEntry, Linearization, MalformedHistory, Op, is_linearization_of, operations
from .linear import KERNEL, check_all_objects, check_linearizable
from .strong import StrongVerdict, check_strong_linearizable, check_tail_strong, completion_test
from .trees import ExecutionTree, TreeNode, TreeTooLarge, enumerate_tree, writers_reader_program

__all__ = [
    "KERNEL", "ExecutionTree", "FuzzResult", "LinEntry", "Linearization", "MalformedHistory", "NotComplete",
    "Op", "StrongVerdict", "TreeNode", "TreeTooLarge", "abd_canonical_linearization",
    "canonical_prefix_check", "check_all_objects", "check_linearizable", "check_strong_linearizable",
    "check_tail_strong", "completion_test", "enumerate_tree", "fuzz_linearizability", "fuzz_runs",
    "is_linearization_of", "operations", "random_program", "writers_reader_program",
]
