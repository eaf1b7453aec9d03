"""Automatic modeling of a whole vascular tree starting at the optic disk."""

from .junctions import (
    BIFURCATION,
    CROSSING,
    Candidate,
    Draft,
    Junction,
    JunctionParams,
    classify_junction,
    cluster_junctions,
    detect_junction_candidates,
    resolve_overlap,
)
from .model import VasculatureModel, VasculatureParams, build_vasculature, model_features, paint_segment
from .optic_disk import DiskParams, OpticDisk, avg_caliber, detect_optic_disk
from .seeds import detect_seeds, initial_edges, overlap_steps, seed_threshold, stop_policy, vessel_likelihood

__all__ = [
    "BIFURCATION", "CROSSING", "Candidate", "Draft", "Junction", "JunctionParams", "classify_junction",
    "cluster_junctions", "detect_junction_candidates", "resolve_overlap", "VasculatureModel",
    "VasculatureParams", "build_vasculature", "model_features", "paint_segment", "DiskParams", "OpticDisk",
    "avg_caliber", "detect_optic_disk", "detect_seeds", "initial_edges", "overlap_steps", "seed_threshold",
    "stop_policy", "vessel_likelihood",
]
