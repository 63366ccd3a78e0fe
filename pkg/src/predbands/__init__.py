"""Distribution-free nonparametric prediction bands.

Conformal sets from kernel density estimates, the marginally valid slicer
band, the locally valid COPS band, bandwidth tuning by sample splitting, and
Monte Carlo tools for checking coverage against known models.
"""

from .baseline import linear_baseline
from .conformal import (
    conformal_pvalue,
    full_conformal_set,
    sandwich_joint_set,
    sandwich_threshold,
    slicer_band,
)
from .cops import (
    Partition,
    build_partition,
    conformity_variant,
    cops_band,
    local_conformity_rank,
    local_slicer_band,
)
from .density import (
    Dataset,
    EmptyBin,
    LocalSample,
    augmented_joint_kde,
    augmented_local_kde,
    joint_kde,
    local_kde,
)
from .kernels import KernelSpec, evaluate, kernel_span, product_evaluate
from .sets import GridSpec, IntervalUnion, PredictionBand, measure
from .simulation import (
    CoverageReport,
    SyntheticModel,
    band_distance,
    coverage_report,
    monte_carlo_coverage,
    oracle_band,
    rate_trend,
    sample,
)
from .tuning import TuningGrid, TuningInfeasible, TuningResult, split, tune_cops

__version__ = "0.1.0"

__all__ = [
    "conformal_pvalue",
    "full_conformal_set",
    "sandwich_joint_set",
    "sandwich_threshold",
    "slicer_band",
    "Partition",
    "build_partition",
    "conformity_variant",
    "cops_band",
    "local_conformity_rank",
    "local_slicer_band",
    "Dataset",
    "EmptyBin",
    "LocalSample",
    "augmented_joint_kde",
    "augmented_local_kde",
    "joint_kde",
    "local_kde",
    "CoverageReport",
    "SyntheticModel",
    "band_distance",
    "coverage_report",
    "monte_carlo_coverage",
    "oracle_band",
    "rate_trend",
    "sample",
    "linear_baseline",
    "KernelSpec",
    "evaluate",
    "kernel_span",
    "product_evaluate",
    "GridSpec",
    "IntervalUnion",
    "PredictionBand",
    "measure",
    "TuningGrid",
    "TuningInfeasible",
    "TuningResult",
    "split",
    "tune_cops",
]
