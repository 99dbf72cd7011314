"""Topology graph consistency losses: region graphs, spectra, gradients and a toy trainer."""

from ._core import (
    GradCheckReport,
    LossBreakdown,
    RegionGraph,
    build_graph,
    centroids,
    connected_components,
    dice_ce_loss,
    dice_jaccard,
    eig_sym,
    estimate_sigma,
    featurize,
    forward,
    generate_scene,
    hard_component_count,
    load_map,
    rampup_weight,
    run_gradcheck,
    soft_component_count,
    tgc_grad_centroids,
    tgc_loss,
    threshold,
)

__all__ = [
    "GradCheckReport",
    "LossBreakdown",
    "RegionGraph",
    "build_graph",
    "centroids",
    "connected_components",
    "dice_ce_loss",
    "dice_jaccard",
    "eig_sym",
    "estimate_sigma",
    "featurize",
    "forward",
    "generate_scene",
    "hard_component_count",
    "load_map",
    "rampup_weight",
    "run_gradcheck",
    "soft_component_count",
    "tgc_grad_centroids",
    "tgc_loss",
    "threshold",
]
