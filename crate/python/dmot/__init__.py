"""Preprocess-then-query toolkit for doubling metrics.

Build a :class:`Structure` once from points or a distance matrix, persist it,
and answer approximate network-design queries (Steiner trees and forests,
TSP tours, k-center, facility location) over arbitrary subsets without the
original distances. :class:`DynamicMst` maintains an approximate spanning
tree under insertions and deletions.
"""

from ._native import DynamicMst, Structure, mst_bound_constant, stretch_constant

__all__ = ["Structure", "DynamicMst", "stretch_constant", "mst_bound_constant"]
