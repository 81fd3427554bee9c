"""Land-clutter amplitude statistics and CFAR detection for SAR imagery."""

from .cfar import CfarConfig, DetectionResult, LocalStats, detect, threshold_rayleigh, threshold_weibull
from .gof import EmpiricalHistogram, FitReport, build_histogram, kl_distance, select_model
from .ingest import AmplitudeImage, PixelSeries, SceneSpec, read_mstar, read_pgm, synth_scene, write_pgm
from .models import (
    GammaParams,
    LogNormalParams,
    RayleighParams,
    WeibullParams,
    fit_gamma,
    fit_lognormal,
    fit_rayleigh,
    fit_weibull,
    model_mean,
    pdf,
    sample,
)

__version__ = "0.1.0"

__all__ = [
    "AmplitudeImage",
    "CfarConfig",
    "DetectionResult",
    "EmpiricalHistogram",
    "FitReport",
    "GammaParams",
    "LocalStats",
    "LogNormalParams",
    "PixelSeries",
    "RayleighParams",
    "SceneSpec",
    "WeibullParams",
    "build_histogram",
    "detect",
    "fit_gamma",
    "fit_lognormal",
    "fit_rayleigh",
    "fit_weibull",
    "kl_distance",
    "model_mean",
    "pdf",
    "read_mstar",
    "read_pgm",
    "sample",
    "select_model",
    "synth_scene",
    "threshold_rayleigh",
    "threshold_weibull",
    "write_pgm",
]
