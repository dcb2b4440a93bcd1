"""Time-series kernels, isolation-forest outlier scoring, climatology-preserving
undersampling targets, kernel SVM training and skill-score evaluation.

The heavy lifting lives in the compiled extension ``flarecast._core``; this
package re-exports its public surface.
"""

from flarecast._core import (
    ComputeError,
    ConfigError,
    Error,
    SvmModel,
    climatology_targets,
    dtw,
    flag_outliers,
    gak,
    gram,
    hss2,
    iforest_scores,
    kernel_value,
    min_eigenvalue,
    svm_train,
    tss,
    version,
)

__version__ = version()

__all__ = [
    "ComputeError",
    "ConfigError",
    "Error",
    "SvmModel",
    "climatology_targets",
    "dtw",
    "flag_outliers",
    "gak",
    "gram",
    "hss2",
    "iforest_scores",
    "kernel_value",
    "min_eigenvalue",
    "svm_train",
    "tss",
    "version",
    "__version__",
]
