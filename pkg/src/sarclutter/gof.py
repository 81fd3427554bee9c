"""Empirical histograms, KL distance against fitted models, model ranking."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from . import models
from .errors import ClutterError, DegenerateDataError, DomainError

log = logging.getLogger(__name__)

#: Floor for model bin masses where the empirical histogram has mass.
EPSILON_Q = 1e-12
DEFAULT_BINS = 256
GRAY_RANGE = (0.0, 255.0)
#: Significance level of the Weibull-versus-Rayleigh likelihood-ratio check.
NESTED_LEVEL = 0.05


@dataclass(frozen=True, eq=False)
class EmpiricalHistogram:
    """Equal-width histogram of amplitudes.

    ``probs`` is derived from ``counts`` and always sums to one.
    """

    bin_edges: np.ndarray
    counts: np.ndarray
    probs: np.ndarray = field(init=False)

    def __post_init__(self):
        edges = np.array(self.bin_edges, dtype=np.float64)
        counts = np.array(self.counts, dtype=np.int64)
        if edges.ndim != 1 or counts.ndim != 1 or edges.size != counts.size + 1:
            raise DomainError("need K+1 edges for K counts")
        if np.any(np.diff(edges) <= 0):
            raise DomainError("bin edges must be strictly increasing")
        if np.any(counts < 0):
            raise DomainError("counts must be non-negative")
        total = counts.sum()
        if total == 0:
            raise DegenerateDataError("histogram is empty")
        for arr in (edges, counts):
            arr.flags.writeable = False
        probs = counts / total
        probs.flags.writeable = False
        object.__setattr__(self, "bin_edges", edges)
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "probs", probs)

    @property
    def bins(self) -> int:
        return self.counts.size

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.bin_edges[:-1] + self.bin_edges[1:])

    def __eq__(self, other):
        if not isinstance(other, EmpiricalHistogram):
            return NotImplemented
        return np.array_equal(self.bin_edges, other.bin_edges) and np.array_equal(
            self.counts, other.counts
        )


@dataclass(frozen=True)
class FitReport:
    model: models.ClutterModel
    kl: float
    rank: int

    @property
    def family(self) -> str:
        return self.model.family

    def to_dict(self) -> dict:
        doc = models.model_to_dict(self.model)
        doc.update(kl=self.kl, rank=self.rank)
        return doc

    @classmethod
    def from_dict(cls, doc):
        return cls(models.model_from_dict(doc), float(doc["kl"]), int(doc["rank"]))


def build_histogram(samples, bins=DEFAULT_BINS, range=None) -> EmpiricalHistogram:
    """Bin amplitudes into ``bins`` equal-width cells.

    The default range is ``[0, max(samples)]``. The last bin includes its
    right edge, so every sample inside the range is counted exactly once.
    Samples outside an explicit range are rejected rather than dropped.
    """
    x = models.as_samples(samples, min_count=1)
    bins = int(bins)
    if bins < 2:
        raise DomainError("need at least two bins")
    if range is None:
        lo, hi = 0.0, float(x.max())
        if hi <= lo:
            raise DegenerateDataError("zero-width histogram range; pass an explicit range")
    else:
        lo, hi = (float(v) for v in range)
        if not lo < hi:
            raise DomainError(f"histogram range must satisfy lo < hi, got ({lo}, {hi})")
        if x.min() < lo or x.max() > hi:
            raise DomainError(f"samples fall outside the histogram range [{lo}, {hi}]")
    counts, edges = np.histogram(x, bins=bins, range=(lo, hi))
    return EmpiricalHistogram(edges, counts)


def binned_masses(hist: EmpiricalHistogram, model: models.ClutterModel) -> np.ndarray:
    """Model probability of each histogram bin, renormalized over the range.

    Masses come from CDF differences, not midpoint densities.
    """
    c = models.cdf(model, hist.bin_edges)
    q = np.diff(c)
    total = c[-1] - c[0]
    if total <= 0:
        return np.zeros_like(q)
    return q / total


def kl_distance(hist: EmpiricalHistogram, model: models.ClutterModel, raw_frequency=False) -> float:
    """Discrete KL distance ``sum p log(p / q)`` in nats.

    ``p`` is the empirical bin probability and ``q`` the model bin mass.
    Where ``p > 0`` the model mass is floored at :data:`EPSILON_Q` and the
    masses are renormalized, which keeps the result finite and non-negative.

    With ``raw_frequency`` the unnormalized counts stand in for ``p``. That
    mode exists only for comparing magnitudes against frequency-scaled
    tables; rankings are unaffected.
    """
    p = hist.counts.astype(np.float64) if raw_frequency else hist.probs
    q = binned_masses(hist, model)
    support = hist.counts > 0
    q = np.where(support, np.maximum(q, EPSILON_Q), q)
    q = q / q.sum()
    ps, qs = p[support], q[support]
    value = float(np.sum(ps * np.log(ps / qs)))
    if raw_frequency:
        return value
    return max(value, 0.0)


def fit_all(samples, tol=models.DEFAULT_TOL, max_iter=models.DEFAULT_MAX_ITER):
    """Fit every family, collecting failures instead of raising.

    Returns
    -------
    fitted : dict
        family name -> fitted model, in :data:`models.FAMILIES` order.
    skipped : dict
        family name -> error message for families whose fit failed.
    """
    fitted, skipped = {}, {}
    for family in models.FAMILIES:
        try:
            fitted[family] = models.fit(family, samples, tol, max_iter)
        except ClutterError as exc:
            log.info("skipping %s fit: %s", family, exc)
            skipped[family] = f"{type(exc).__name__}: {exc}"
    return fitted, skipped


def nested_weibull_significant(hist, kl_weibull, kl_rayleigh, level=NESTED_LEVEL) -> bool:
    """Whether a Weibull fit beats the Rayleigh it contains by more than chance.

    Rayleigh is the Weibull with shape fixed at two, so the free Weibull fit
    almost always scores a slightly lower KL even on Rayleigh data. The
    binned log-likelihood ratio ``2 N (KL_R - KL_W)`` is compared with the
    chi-square (one degree of freedom) critical value at ``level``.
    """
    statistic = 2.0 * hist.total * (kl_rayleigh - kl_weibull)
    return statistic > stats.chi2.isf(level, df=1)


def rank_models(hist: EmpiricalHistogram, fitted, raw_frequency=False, nested_level=NESTED_LEVEL):
    """Rank fitted models by KL distance against ``hist``.

    Ties keep the fixed family order Weibull, Rayleigh, Gamma, Log-normal.
    When both Weibull and Rayleigh are present and ``nested_level`` is not
    None, a Weibull fit whose advantage fails
    :func:`nested_weibull_significant` is ranked directly after the Rayleigh
    fit. Pass ``nested_level=None`` for a pure KL ordering.
    """
    order = {name: float(i) for i, name in enumerate(models.FAMILIES)}
    fitted = list(fitted)
    kl = {m.family: kl_distance(hist, m, raw_frequency) for m in fitted}
    keys = {m.family: (kl[m.family], order[m.family]) for m in fitted}
    if nested_level is not None and "weibull" in kl and "rayleigh" in kl:
        by_family = {m.family: m for m in fitted}
        if raw_frequency:
            kw = kl_distance(hist, by_family["weibull"])
            kr = kl_distance(hist, by_family["rayleigh"])
        else:
            kw, kr = kl["weibull"], kl["rayleigh"]
        if kw < kr and not nested_weibull_significant(hist, kw, kr, nested_level):
            keys["weibull"] = (kl["rayleigh"], order["rayleigh"] + 0.5)
    fitted.sort(key=lambda m: keys[m.family])
    return [FitReport(m, kl[m.family], rank) for rank, m in enumerate(fitted, start=1)]


def require_spread(x) -> None:
    """Raise :class:`DegenerateDataError` for zero-variance samples.

    A ranking against a point mass says nothing about the clutter, so it is
    refused rather than reported from whichever family happens to fit.
    """
    if np.ptp(x) == 0:
        raise DegenerateDataError(f"all {x.size} samples equal {x[0]!r}; nothing to rank")


def select_model(
    samples,
    bins=DEFAULT_BINS,
    range=None,
    raw_frequency=False,
    tol=models.DEFAULT_TOL,
    max_iter=models.DEFAULT_MAX_ITER,
    nested_level=NESTED_LEVEL,
) -> list[FitReport]:
    """Fit all four families and rank them by KL distance.

    Families whose fit fails are skipped (and logged); if none can be fitted
    a :class:`DegenerateDataError` lists every failure. Zero-variance input
    is rejected up front. See :func:`rank_models` for the ordering rule.
    """
    x = models.as_samples(samples)
    require_spread(x)
    hist = build_histogram(x, bins, range)
    fitted, skipped = fit_all(x, tol, max_iter)
    if not fitted:
        raise DegenerateDataError("no clutter family could be fitted: " + "; ".join(skipped.values()))
    return rank_models(hist, fitted.values(), raw_frequency, nested_level)


# ---------------------------------------------------------------------------
# serialization

HISTOGRAM_COLUMNS = ("bin_lo", "bin_hi", "count", "prob")


def write_histogram_csv(hist: EmpiricalHistogram, fh) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(HISTOGRAM_COLUMNS)
    for lo, hi, n, p in zip(hist.bin_edges[:-1], hist.bin_edges[1:], hist.counts, hist.probs):
        writer.writerow([repr(float(lo)), repr(float(hi)), int(n), repr(float(p))])


def read_histogram_csv(fh) -> EmpiricalHistogram:
    rows = list(csv.DictReader(fh))
    if not rows:
        raise DomainError("histogram CSV has no rows")
    edges = [float(r["bin_lo"]) for r in rows] + [float(rows[-1]["bin_hi"])]
    counts = [int(r["count"]) for r in rows]
    return EmpiricalHistogram(edges, counts)


def reports_to_dicts(reports) -> list[dict]:
    return [r.to_dict() for r in reports]


def reports_from_dicts(docs) -> list[FitReport]:
    return [FitReport.from_dict(d) for d in docs]
