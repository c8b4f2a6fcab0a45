"""Integral cellular chains and multi-scale isoperimetric fillings on
computable CAT(0) model complexes."""

from .complexes import (
    GridComplex,
    TreeProductComplex,
    RootedTree,
    CustomCubeComplex,
    build_grid,
    build_tree_product,
    load_custom_complex,
    neighborhood,
    distance,
    distance_sq,
)
from .chains import Chain, geodesic_path, slice_min, pushforward_cellular

__all__ = [
    "GridComplex",
    "TreeProductComplex",
    "RootedTree",
    "CustomCubeComplex",
    "build_grid",
    "build_tree_product",
    "load_custom_complex",
    "neighborhood",
    "distance",
    "distance_sq",
    "Chain",
    "geodesic_path",
    "slice_min",
    "pushforward_cellular",
]

__version__ = "0.1.0"
