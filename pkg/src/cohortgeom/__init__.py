"""Cohort effects in mortality surfaces via discrete normal curvature."""

from .cohort_index import (CEISeries, TruncationPolicy, cei_mean_series, cei_series,
                           detect_plateaus, smooth_cei_oracle, truncate_series)
from .errors import (CohortGeomError, DataQualityError, DegenerateCurveError, InputError,
                     ModelError, NumericError, ParseError, StructureError)
from .geometry import (CurvatureField, curvature_field, curvature_vector, discrete_parameters,
                       estimate_normal, neighborhood_curves, normal_curvature, tangent_endpoint,
                       tangent_mid)
from .mlc import MLCFit, estimate_scale, mlc_fit, mlc_forecast, remove_cohort_effect
from .models import (APCFit, Forecast, LeeCarterFit, apc_fit, apc_forecast, fit_metrics,
                     lc_fit, lc_forecast)
from .surface_io import (MortalitySurface, MortalityTable, build_surface, load_surface,
                         parse_hmd_mx, read_hmd_mx, read_surface_csv, write_surface_csv)

__version__ = "0.1.0"
