"""Voxel-connectivity parcellation and structural brain network analysis.

The pipeline runs downstream of tractography: a sparse voxel
connectivity matrix is clustered into spatially contiguous regions by
iterated spectral clustering of a profile-correlation similarity graph;
region networks built on top are analyzed with classical graph measures
and normalized-Laplacian spectra; evaluation statistics (regional
consistency, Welch tests, LOOCV linear SVM) and a synthetic phantom
generator close the loop.
"""

from .core import (
    FormatError,
    Parcellation,
    Rng,
    SparseSymMatrix,
    VoxelMask,
    read_mask,
    read_parcellation,
    read_sparse,
    write_mask,
    write_parcellation,
    write_sparse,
)
from .eigensolve import (
    ConvergenceError,
    EigResult,
    dense_sym_eig,
    smallest_k,
    sym_normalized_laplacian,
)
from .metrics import (
    MetricsReport,
    clustering_coefficient,
    connected_components,
    cpl,
    global_efficiency,
    metrics_report,
    shortest_paths,
    sparsity,
)
from .network import (
    BinaryNetwork,
    BrainNetwork,
    build_network_max,
    build_network_normalized,
    preprocess,
    read_network,
    threshold_weighted,
    write_network,
)
from .parcellate import (
    KMeansResult,
    ParcellationRun,
    RegionCollapseError,
    adjusted_rand_index,
    discontiguous_regions,
    kmeans,
    parcellate_iterative,
    parcellation_similarity,
    random_parcellation,
    spectral_cluster,
)
from .spatial import (
    SimilarityGraph,
    build_adjacency,
    build_similarity,
    compute_profiles,
    neighbor_offsets,
    pearson,
)
from .spectral import (
    Spectrum,
    spectral_distance,
    spectral_histogram,
    spectrum,
    wasserstein_1d,
)
from .stats import (
    ComparisonReport,
    GroupSample,
    LoocvResult,
    Phantom,
    compare_parcellations,
    generate_phantom,
    loocv_linear_svm,
    read_group_csv,
    regional_consistency,
    regional_consistency_report,
    regularized_incomplete_beta,
    welch_t_test,
)

__version__ = "0.1.0"
