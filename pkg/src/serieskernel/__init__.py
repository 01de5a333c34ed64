"""Series kernels for irregularly-spaced multivariate time series."""

from .errors import (
    ConfigError,
    DataFormatError,
    NumericError,
    RankError,
    SeriesKernelError,
    SingularKernelError,
    SingularShiftError,
)
from .skernel import (
    GramBundle,
    PreparedSeries,
    SeriesKernelConfig,
    bundle,
    cross_gram,
    cross_gram_shared_grid,
    eval_multivariate,
    eval_univariate,
    inverse_gram_shared_grid,
    prepare,
    shifted_solve,
)
from .tsdata import Dataset, SeriesSplit, TimeSeries, load_jsonl, load_ucr_tsv, split_forecast
from .vkernels import VectorKernel

__version__ = "0.1.0"
