"""Quantitative-rectifiability toolbox.

Multiscale flatness analysis for finite point clouds: separated nets and
dyadic-style cube trees, Hausdorff-content estimates with Choquet
integration, several flavors of beta number, two-sided traveling-salesman
reports with bilateral weak-geometric-lemma classification, affine
approximation (omega) numbers for sampled maps, and an iterative
Reifenberg-style parametrization engine with runtime certificates.
"""

from .beta import (AngleControl, BetaValue, PackingCheck, PlaneSearchConfig,
                   TSTReport, angle_control_check, bbeta, beta_dp, beta_inf,
                   bwgl_classify, critical_exponent, cube_row,
                   env_packing_check, eta_inf, tst_report)
from .content import (ChoquetConfig, ContentEstimate, ContentIndex,
                      ball_volume, choquet_integral, hausdorff_content)
from .cubes import (Cube, CubeAxiomError, CubeTree, NetHierarchy,
                    StoppingTimeRegion, build_cubes, build_nets,
                    build_stopping_time, cube_distance, validate_ball_axioms)
from .datasets import (cantor4, circle, fourier_profile, koch, koch_dimension,
                       lipschitz_graph, make_dataset, perturbed_plane,
                       segment)
from .dorronsoro import (AffineMap, BoundPair, OmegaBetaBound, OmegaReport,
                         OmegaValue, SampledFunction, beta_from_omega,
                         omega_infty_bound_check, omega_p, omega_sum)
from .experiment import (DatasetSpec, ExperimentConfig, ExperimentResult,
                         run_experiment, write_report_tables)
from .geometry import (AffinePlane, Ball, GeometryError, PointCloud,
                       UndefinedSideError, local_hausdorff_distance,
                       orthonormal_frame, plane_angle, plane_pair_distance)
from .io import (load_points, read_points_csv, read_points_tstl, save_points,
                 write_points_csv, write_points_tstl)
from .reifenberg import (CCBP, CCBPError, CCBPLayer, CertificateReport,
                         EpsilonProfile, NotAGraphError, SurfaceIterate,
                         apply_sigma, bilip_certificate, ccbp_from_dict,
                         ccbp_from_tree, ccbp_to_dict, certify, iterate,
                         local_graph_fit, partition_of_unity, sigma_k,
                         smooth_bump, validate_ccbp)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
