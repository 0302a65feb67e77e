"""Geometric accuracy evaluation of reconstructed meshes."""

from .align import IcpResult, SimilarityTransform, icp_refine, umeyama_align
from .bvh import BvhAccel, build_bvh, closest_point_triangle, closest_points_linear
from .core import TriangleMesh, box, clean, component_labels, concatenate, torus, uv_sphere
from .distance import (BidirectionalReport, DistanceReport, bidirectional_report, c2m_signed,
                       default_missing_threshold, pseudonormals, signed_distances)
from .heatmap import export_heatmap, read_heatmap
from .io import load_mesh, read_ply, save_obj, save_ply
from .sampling import SampledCloud, sample_surface
from .stats import GaussianFit, WeibullFit, fit_gaussian, fit_weibull, histogram, summary_stats

__all__ = [
    "BidirectionalReport", "BvhAccel", "DistanceReport", "GaussianFit", "IcpResult",
    "SampledCloud", "SimilarityTransform", "TriangleMesh", "WeibullFit",
    "bidirectional_report", "box", "build_bvh", "c2m_signed", "clean", "closest_point_triangle",
    "closest_points_linear", "component_labels", "concatenate", "default_missing_threshold",
    "export_heatmap", "fit_gaussian", "fit_weibull", "histogram", "icp_refine", "load_mesh",
    "pseudonormals", "read_heatmap", "read_ply", "sample_surface", "save_obj", "save_ply",
    "signed_distances", "summary_stats", "torus", "umeyama_align", "uv_sphere",
]
