"""Analytic CFAR thresholds and the 2-D sliding-window detector.

The detector declares a target at a cell when its amplitude strictly
exceeds ``mu_c + sigma_c * Q``. ``mu_c`` and ``sigma_c`` are the mean and
population standard deviation of the local background, and ``Q`` is the
model threshold divided by the model mean. The background is a square
training ring around the cell under test, with the guard square removed.
It can also be one global clutter region.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np

from . import models
from .errors import BorderError, ConfigError, DomainError, UnsupportedModelError

Rect = Tuple[int, int, int, int]


class StatsMode(str, enum.Enum):
    WINDOWED = "windowed"
    GLOBAL = "global"
    #: Compare each cell with the model threshold ``t_a`` alone. Used to
    #: validate the false-alarm rate of the analytic thresholds.
    MODEL_THRESHOLD = "model-threshold"


class BorderPolicy(str, enum.Enum):
    SHRINK = "shrink"
    STRICT = "strict"
    SKIP = "skip"


@dataclass(frozen=True)
class CfarConfig:
    """Detector configuration.

    Parameters
    ----------
    train_per_wing : int
        Training cells on each side of the guard band.
    guard_per_wing : int
        Guard cells on each side of the cell under test.
    pfa : float
        Design probability of false alarm, in (0, 1).
    stats_mode : StatsMode
        Where ``mu_c`` and ``sigma_c`` come from.
    q_override : float, optional
        Use this design parameter instead of ``t_a / model_mean``.
    border : BorderPolicy
        Windowed-mode handling of cells whose window leaves the image.
    clutter_rect : tuple of int, optional
        ``(r0, c0, r1, c1)`` half-open region for global statistics;
        defaults to the whole image.
    """

    train_per_wing: int = 15
    guard_per_wing: int = 5
    pfa: float = 1e-6
    stats_mode: StatsMode = StatsMode.WINDOWED
    q_override: Optional[float] = None
    border: BorderPolicy = BorderPolicy.SHRINK
    clutter_rect: Optional[Rect] = None

    def __post_init__(self):
        object.__setattr__(self, "stats_mode", StatsMode(self.stats_mode))
        object.__setattr__(self, "border", BorderPolicy(self.border))
        if int(self.train_per_wing) != self.train_per_wing or self.train_per_wing < 1:
            raise ConfigError("train_per_wing must be a positive integer")
        if int(self.guard_per_wing) != self.guard_per_wing or self.guard_per_wing < 0:
            raise ConfigError("guard_per_wing must be a non-negative integer")
        if not 0 < self.pfa < 1:
            raise ConfigError(f"pfa must lie in (0, 1), got {self.pfa}")
        if self.q_override is not None and not (math.isfinite(self.q_override) and self.q_override > 0):
            raise ConfigError("q_override must be a finite positive number")
        if self.clutter_rect is not None:
            object.__setattr__(self, "clutter_rect", tuple(int(v) for v in self.clutter_rect))

    @property
    def half_width(self) -> int:
        return self.train_per_wing + self.guard_per_wing

    @property
    def window_size(self) -> int:
        return 2 * self.half_width + 1

    @property
    def ring_size(self) -> int:
        return self.window_size**2 - (2 * self.guard_per_wing + 1) ** 2

    def check_shape(self, shape):
        if self.stats_mode is StatsMode.WINDOWED and min(shape) < self.window_size:
            raise ConfigError(
                f"{self.window_size}x{self.window_size} window does not fit a {shape[0]}x{shape[1]} image"
            )

    def to_dict(self) -> dict:
        return {
            "train_per_wing": self.train_per_wing,
            "guard_per_wing": self.guard_per_wing,
            "pfa": self.pfa,
            "stats_mode": self.stats_mode.value,
            "q_override": self.q_override,
            "border": self.border.value,
            "clutter_rect": list(self.clutter_rect) if self.clutter_rect else None,
        }


@dataclass(frozen=True)
class LocalStats:
    """Background mean and standard deviation (scalars or per-cell maps)."""

    mu_c: Union[float, np.ndarray]
    sigma_c: Union[float, np.ndarray]


@dataclass(frozen=True, eq=False)
class DetectionResult:
    mask: np.ndarray
    threshold_map: np.ndarray
    t_a: float
    q: float
    stats: Optional[LocalStats]
    border_policy: BorderPolicy
    config: CfarConfig
    skipped: Optional[np.ndarray] = None

    @property
    def detections(self) -> int:
        return int(self.mask.sum())

    def to_dict(self) -> dict:
        """JSON sidecar: thresholds, statistics, config echo and counts."""
        doc = {
            "t_a": self.t_a,
            "q": self.q,
            "mu_c": None,
            "sigma_c": None,
            "border_policy": self.border_policy.value,
            "config": self.config.to_dict(),
            "detections": self.detections,
            "cells": int(self.mask.size),
            "skipped_cells": int(self.skipped.sum()) if self.skipped is not None else 0,
        }
        if self.stats is not None:
            if np.ndim(self.stats.mu_c) == 0:
                doc["mu_c"] = float(self.stats.mu_c)
                doc["sigma_c"] = float(self.stats.sigma_c)
            else:
                # per-cell maps are summarised by their average over evaluated cells
                doc["mu_c"] = float(np.nanmean(self.stats.mu_c))
                doc["sigma_c"] = float(np.nanmean(self.stats.sigma_c))
        return doc


def _check_pfa(pfa):
    if not 0 < pfa < 1:
        raise DomainError(f"pfa must lie in (0, 1), got {pfa}")


def threshold_weibull(params: models.WeibullParams, pfa: float) -> float:
    """``beta * log(1/pfa)**(1/alpha)``."""
    _check_pfa(pfa)
    return params.beta * (-math.log(pfa)) ** (1.0 / params.alpha)


def threshold_rayleigh(params: models.RayleighParams, pfa: float) -> float:
    """``sqrt(-2 sigma**2 log(pfa))``."""
    _check_pfa(pfa)
    return math.sqrt(-2.0 * params.sigma**2 * math.log(pfa))


def adaptive_threshold(model: models.ClutterModel, pfa: float) -> float:
    """Model threshold for the two families with a closed form.

    Gamma and Log-normal clutter raise :class:`UnsupportedModelError`.
    """
    if isinstance(model, models.WeibullParams):
        return threshold_weibull(model, pfa)
    if isinstance(model, models.RayleighParams):
        return threshold_rayleigh(model, pfa)
    raise UnsupportedModelError(
        f"CFAR thresholds are only defined for Weibull and Rayleigh clutter, not {model.family}"
    )


def design_q(t_a: float, model: models.ClutterModel) -> float:
    mean = models.model_mean(model)
    if not mean > 0:
        raise DomainError("model mean must be positive to form Q")
    return t_a / mean


def _image_array(image) -> np.ndarray:
    arr = getattr(image, "pixels", image)
    arr = np.asarray(arr, dtype=np.float64)
    if arr.ndim != 2 or arr.size == 0:
        raise DomainError("expected a non-empty 2-D image")
    return arr


def check_rect(rect, shape) -> Rect:
    """Validate a half-open ``(r0, c0, r1, c1)`` rectangle against ``shape``."""
    r0, c0, r1, c1 = (int(v) for v in rect)
    if not (0 <= r0 < r1 <= shape[0] and 0 <= c0 < c1 <= shape[1]):
        raise DomainError(f"rectangle {rect} outside image of shape {tuple(shape)}")
    return r0, c0, r1, c1


def local_stats(image, row: int, col: int, config: CfarConfig) -> LocalStats:
    """Training-ring statistics for one cell under test.

    The ring holds every cell within Chebyshev distance ``train + guard`` of
    ``(row, col)`` and beyond distance ``guard``. Under the shrink policy the
    ring is truncated at the image edge; the other policies raise
    :class:`BorderError` when the window does not fit.
    """
    img = _image_array(image)
    rows, cols = img.shape
    if not (0 <= row < rows and 0 <= col < cols):
        raise DomainError(f"cell ({row}, {col}) outside image")
    h, g = config.half_width, config.guard_per_wing
    fits = row - h >= 0 and col - h >= 0 and row + h < rows and col + h < cols
    if not fits and config.border is not BorderPolicy.SHRINK:
        raise BorderError(f"window around ({row}, {col}) exceeds the image bounds")
    r0, r1 = max(row - h, 0), min(row + h + 1, rows)
    c0, c1 = max(col - h, 0), min(col + h + 1, cols)
    block = img[r0:r1, c0:c1]
    rr, cc = np.ogrid[r0:r1, c0:c1]
    ring = np.maximum(np.abs(rr - row), np.abs(cc - col)) > g
    values = block[ring]
    return LocalStats(float(values.mean()), float(values.std()))


def _box_sums(a: np.ndarray, h: int) -> np.ndarray:
    """Sum of ``a`` over the ``(2h+1)`` square around each cell, clipped."""
    rows, cols = a.shape
    sat = np.zeros((rows + 1, cols + 1))
    np.cumsum(np.cumsum(a, axis=0), axis=1, out=sat[1:, 1:])
    r = np.arange(rows)
    c = np.arange(cols)
    r0, r1 = np.clip(r - h, 0, rows), np.clip(r + h + 1, 0, rows)
    c0, c1 = np.clip(c - h, 0, cols), np.clip(c + h + 1, 0, cols)
    return sat[np.ix_(r1, c1)] - sat[np.ix_(r0, c1)] - sat[np.ix_(r1, c0)] + sat[np.ix_(r0, c0)]


def _box_counts(shape, h):
    rows, cols = shape
    r = np.arange(rows)
    c = np.arange(cols)
    nr = np.minimum(r + h + 1, rows) - np.maximum(r - h, 0)
    nc = np.minimum(c + h + 1, cols) - np.maximum(c - h, 0)
    return np.outer(nr, nc).astype(np.float64)


def windowed_stats(image, config: CfarConfig) -> LocalStats:
    """Training-ring mean and standard deviation for every cell at once.

    Uses summed-area tables of the mean-centred image, so the cost does not
    depend on the window size. Windows are truncated at the image edge.
    """
    img = _image_array(image)
    offset = img.mean()
    a = img - offset
    h, g = config.half_width, config.guard_per_wing
    n = _box_counts(img.shape, h) - _box_counts(img.shape, g)
    s1 = _box_sums(a, h) - _box_sums(a, g)
    s2 = _box_sums(a * a, h) - _box_sums(a * a, g)
    m = s1 / n
    var = np.maximum(s2 / n - m * m, 0.0)
    return LocalStats(m + offset, np.sqrt(var))


def interior_mask(shape, h) -> np.ndarray:
    """Cells whose full ``(2h+1)`` window lies inside the image."""
    rows, cols = shape
    ok_r = (np.arange(rows) >= h) & (np.arange(rows) < rows - h)
    ok_c = (np.arange(cols) >= h) & (np.arange(cols) < cols - h)
    return np.outer(ok_r, ok_c)


def resolve_q(config: CfarConfig, t_a: float, model: models.ClutterModel) -> float:
    if config.q_override is not None:
        return float(config.q_override)
    return design_q(t_a, model)


def detect(image, model: models.ClutterModel, config: CfarConfig = CfarConfig()) -> DetectionResult:
    """Run the CFAR detector over an image.

    Parameters
    ----------
    image : AmplitudeImage or array_like
        2-D amplitudes.
    model : WeibullParams or RayleighParams
        Fitted clutter model providing ``t_a`` and the model mean.
    config : CfarConfig

    Returns
    -------
    DetectionResult
        ``mask`` is true exactly where ``image > threshold_map``.
    """
    img = _image_array(image)
    config.check_shape(img.shape)
    t_a = adaptive_threshold(model, config.pfa)
    q = resolve_q(config, t_a, model)
    skipped = None

    if config.stats_mode is StatsMode.MODEL_THRESHOLD:
        stats = None
        threshold = np.full(img.shape, t_a)
    elif config.stats_mode is StatsMode.GLOBAL:
        r0, c0, r1, c1 = check_rect(config.clutter_rect or (0, 0, *img.shape), img.shape)
        region = img[r0:r1, c0:c1]
        stats = LocalStats(float(region.mean()), float(region.std()))
        threshold = np.full(img.shape, stats.mu_c + stats.sigma_c * q)
    else:
        h = config.half_width
        inside = interior_mask(img.shape, h)
        if config.border is BorderPolicy.STRICT and not inside.all():
            raise BorderError(
                f"{config.window_size}x{config.window_size} window exceeds the image at border cells; "
                "use the shrink or skip policy"
            )
        stats = windowed_stats(img, config)
        threshold = stats.mu_c + stats.sigma_c * q
        if config.border is BorderPolicy.SKIP:
            skipped = ~inside
            threshold = np.where(inside, threshold, np.nan)
            stats = LocalStats(
                np.where(inside, stats.mu_c, np.nan), np.where(inside, stats.sigma_c, np.nan)
            )

    mask = img > threshold
    return DetectionResult(
        mask=mask,
        threshold_map=threshold,
        t_a=t_a,
        q=q,
        stats=stats,
        border_policy=config.border,
        config=config,
        skipped=skipped,
    )
