"""Verification and demonstration drivers on the sampled spaces."""

from .counterexamples import (
    BranchingBundle,
    NoMapVerdict,
    StrictSearchReport,
    branching_demo,
    default_restrictions,
    no_map_demo,
    strict_cd_restriction_search,
    structured_family,
)
from .dimension import DimensionEstimate, box_dimension
from .mgh import MghTrace, hausdorff_vertical, mgh_harness
from .pointwise import (
    CdReport,
    EntropyVerdict,
    jacobian_terms,
    midpoint_entropy_test,
    pointwise_cd_check,
    push_midpoint,
)

__all__ = [
    "BranchingBundle", "CdReport", "DimensionEstimate", "EntropyVerdict", "MghTrace", "NoMapVerdict",
    "StrictSearchReport", "box_dimension", "branching_demo", "default_restrictions", "hausdorff_vertical",
    "jacobian_terms", "mgh_harness", "midpoint_entropy_test", "no_map_demo", "pointwise_cd_check",
    "push_midpoint", "strict_cd_restriction_search", "structured_family",
]
