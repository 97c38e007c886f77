"""Dense depth maps from single sparse LIDAR scans.

The pipeline projects a point cloud into the image plane, slides a square
mask over every pixel below the sensor horizon, and estimates depth with
local interpolators; the cluster-gated bilateral filter keeps foreground
and background separated where they collide inside one window. An
evaluation harness scores results against disparity ground truth.
"""

from .bfstar import (BfStarParams, Cluster, RangeClusterSet, bf_star,
                     cluster_ranges, df_distance, select_cluster_pair)
from .delaunay import (DegenerateInputError, Triangulation,
                       interpolate_delaunay, triangulate)
from .depthmap import (DenseDepthMap, DensityStats, SparseDepthMap,
                       WindowSample, density_stats, gather_window,
                       round_half_away_from_zero, upsample)
from .evaluation import (EvalReport, d1_metrics, depth_to_disparity,
                         disparity_to_depth, render_error_map)
from .interpolators import (IdwParams, VariogramParams, bilateral, idw,
                            kriging, kriging_weights, op_basic, semivariogram)
from .kitti_io import (Calibration, DisparityMap, FormatError, PointCloud,
                       load_calibration, load_depth_image,
                       load_groundtruth_disparity, load_point_cloud,
                       write_calibration, write_depth_image)
from .methods import (ALL_METHODS, DELAUNAY_METHODS, WINDOW_METHODS,
                      Interpolator, make_interpolator)
from .pipeline import (FrameSpec, PipelineError, RunConfig, load_config,
                       run_pipeline, run_sweep)
from .projection import (CaseStats, compute_horizon_line, occupancy_stats,
                         project)
from .synthetic import Box, SyntheticScene, build_scene, gen_synthetic

__version__ = "0.1.0"

__all__ = [
    "ALL_METHODS", "BfStarParams", "Box", "Calibration", "CaseStats",
    "Cluster", "DELAUNAY_METHODS", "DegenerateInputError", "DenseDepthMap",
    "DensityStats", "DisparityMap", "EvalReport", "FormatError", "FrameSpec",
    "IdwParams", "Interpolator", "PipelineError", "PointCloud",
    "RangeClusterSet", "RunConfig", "SparseDepthMap", "SyntheticScene",
    "Triangulation", "VariogramParams", "WINDOW_METHODS", "WindowSample",
    "bf_star", "bilateral", "build_scene", "cluster_ranges",
    "compute_horizon_line", "d1_metrics", "density_stats",
    "depth_to_disparity", "df_distance", "disparity_to_depth",
    "gather_window", "gen_synthetic", "idw", "interpolate_delaunay",
    "kriging", "kriging_weights", "load_calibration", "load_config",
    "load_depth_image", "load_groundtruth_disparity", "load_point_cloud",
    "make_interpolator", "occupancy_stats", "op_basic", "project",
    "render_error_map", "round_half_away_from_zero", "run_pipeline",
    "run_sweep", "select_cluster_pair", "semivariogram", "triangulate",
    "upsample", "write_calibration", "write_depth_image",
]
