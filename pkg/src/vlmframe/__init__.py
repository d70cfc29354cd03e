"""Tie InSAR vertical land motion maps to a global reference frame.

The local map is compared with a coarse global VLM raster, a degree 1-3
polynomial is fitted to the difference and added back. GNSS collocation
metrics and radially averaged power spectra check the result.
"""
from .errors import (AlignmentError, DegenerateExtentError, EmptyCollocationError,
                     EmptyOverlapError, EmptySpectrumError, FieldValidationError, ParseError,
                     RankDeficientError, VLMError)
from .fields import (GnssStationSet, RasterGrid, VelocityField, los_to_vertical,
                     parse_gnss_table, parse_grid, parse_point_field, read_gnss_table,
                     read_grid, read_point_field, vertical_to_los, write_gnss_table,
                     write_grid, write_point_field)
from .frame_fit import (NormalizationParams, PolynomialModel, build_design_matrix,
                        condition_number, evaluate_polynomial, fit_polynomial,
                        normalize_coords, transform_field)
from .pipeline import FrameTie, tie_frame
from .resample import DifferenceField, bilinear_sample, difference_field, oversample_model
from .spectral import (SpectrumCurve, normalize_spectrum, power_spectrum, preprocess,
                       radial_average, rasterize_points, spectral_slope)
from .synth import Scenario, ScenarioSpec, make_scenario, scenario_error
from .validation import (ModelReport, collocate, compare_models, ecdf,
                         information_criteria, residual_metrics)

__version__ = "0.1.0"
