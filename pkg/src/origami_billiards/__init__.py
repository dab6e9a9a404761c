"""Billiards in convex polytopes, bevelings, origami lifts and stable bouquet constructions."""

from .beveling import Beveling, bevel, cross_section, rho
from .billiards import BilliardTrajectory, simulate, transport
from .constructions import (
    ConstructionResult,
    certify,
    fagnano_seed,
    figure_eight_3d,
    figure_eight_4d,
    figure_eight_5d,
    figure_eight_n,
    twisted_tower,
)
from .geom_core import HalfSpace, Isometry, Polytope, box, convex_union, make_polytope, polygon, product
from .origami import OrigamiModel, build_origami_model, deviation_report, flatten
from .transport_stability import BouquetSpec, LoopInDouble, certify_bouquet, defect_operator, direct_sum, kernel

__all__ = [
    "Beveling",
    "BilliardTrajectory",
    "BouquetSpec",
    "ConstructionResult",
    "HalfSpace",
    "Isometry",
    "LoopInDouble",
    "OrigamiModel",
    "Polytope",
    "bevel",
    "box",
    "build_origami_model",
    "certify",
    "certify_bouquet",
    "convex_union",
    "cross_section",
    "defect_operator",
    "deviation_report",
    "direct_sum",
    "fagnano_seed",
    "figure_eight_3d",
    "figure_eight_4d",
    "figure_eight_5d",
    "figure_eight_n",
    "flatten",
    "kernel",
    "make_polytope",
    "polygon",
    "product",
    "rho",
    "simulate",
    "transport",
    "twisted_tower",
]
