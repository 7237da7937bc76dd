from .kriging import KrigingConfig, ModelError, dedup_points, krige_points, simple_krige
from .maps import (
    ClassingError,
    EmptyRasterError,
    RasterStats,
    ShapeError,
    UndefinedCorrelationError,
    classify,
    histogram,
    quantile_classes,
    raster_pearson,
    raster_stats,
)
from .variogram import (
    EmpiricalVariogram,
    FitError,
    InsufficientDataError,
    VariogramModel,
    empirical_variogram,
    fit_exponential,
    variogram_json,
)
