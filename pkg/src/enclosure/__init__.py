"""Travel-time extraction for 1-D heat and wave problems by the enclosure method.

Submodules: ``core`` (types, spectral parameter), ``forward`` (data
synthesis), ``transform`` (weighted integrals), ``indicator``,
``extraction``, ``specfun`` and ``cli``.
"""
from .core import Kind, ProblemConfig, SpectralPoint, spectral_parameter, wave_spectral_point
from .extraction import (
    NoiseSpec,
    TravelTimeEstimate,
    enclosure_classify,
    noise_schedule,
    noisy_estimate,
    robin_extract_heat,
    robin_extract_wave,
    refine_length,
    travel_time_corrected,
    travel_time_normalized,
    travel_time_raw,
)
from .forward import PolyFlux, boundary_trace_series, continuous_data, heat_fd_solve, image_trace, wave_fd_solve
from .indicator import IndicatorCurve, IndicatorSample, heat_curve, heat_indicator, wave_curve, wave_indicator
from .transform import BoundaryData, ContinuousData, Precision, weighted_integral_poly, weighted_integral_sampled

__version__ = "0.1.0"
