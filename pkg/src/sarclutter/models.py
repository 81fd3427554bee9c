"""Candidate amplitude distributions for land clutter.

Four families are supported: Weibull, Log-normal, Gamma and Rayleigh. Each
is represented by a small frozen dataclass holding its parameters; the union
of the four is what the rest of the package calls a *clutter model*.

Every function here is pure. Sample sets are plain 1-D ``numpy`` arrays.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import ClassVar, NamedTuple, Union

import numpy as np
from scipy import special

from .errors import ConvergenceError, DegenerateDataError, DivergenceError, DomainError

#: Fixed family order, also used to break KL ties.
FAMILIES = ("weibull", "rayleigh", "gamma", "lognormal")

DEFAULT_TOL = 1e-9
DEFAULT_MAX_ITER = 200

# Shape bracket for the Weibull profile-likelihood root.
WEIBULL_ALPHA_BRACKET = (0.02, 50.0)


def _positive(name, value):
    value = float(value)
    if not (math.isfinite(value) and value > 0):
        raise DomainError(f"{name} must be a finite positive number, got {value!r}")
    return value


@dataclass(frozen=True)
class WeibullParams:
    """Weibull shape ``alpha`` and scale ``beta``."""

    alpha: float
    beta: float
    family: ClassVar[str] = "weibull"

    def __post_init__(self):
        object.__setattr__(self, "alpha", _positive("alpha", self.alpha))
        object.__setattr__(self, "beta", _positive("beta", self.beta))


@dataclass(frozen=True)
class LogNormalParams:
    """Log-normal with log-domain spread ``eta`` and location ``gamma_loc``."""

    eta: float
    gamma_loc: float
    family: ClassVar[str] = "lognormal"

    def __post_init__(self):
        object.__setattr__(self, "eta", _positive("eta", self.eta))
        gamma_loc = float(self.gamma_loc)
        if not math.isfinite(gamma_loc):
            raise DomainError(f"gamma_loc must be finite, got {gamma_loc!r}")
        object.__setattr__(self, "gamma_loc", gamma_loc)


@dataclass(frozen=True)
class GammaParams:
    """Gamma shape ``a`` and scale ``b``."""

    a: float
    b: float
    family: ClassVar[str] = "gamma"

    def __post_init__(self):
        object.__setattr__(self, "a", _positive("a", self.a))
        object.__setattr__(self, "b", _positive("b", self.b))


@dataclass(frozen=True)
class RayleighParams:
    """Rayleigh scale ``sigma``."""

    sigma: float
    family: ClassVar[str] = "rayleigh"

    def __post_init__(self):
        object.__setattr__(self, "sigma", _positive("sigma", self.sigma))


ClutterModel = Union[WeibullParams, LogNormalParams, GammaParams, RayleighParams]

_PARAM_TYPES = {
    "weibull": WeibullParams,
    "lognormal": LogNormalParams,
    "gamma": GammaParams,
    "rayleigh": RayleighParams,
}


def model_to_dict(model: ClutterModel) -> dict:
    """Return ``{"family": ..., "params": {...}}`` for serialization."""
    return {"family": model.family, "params": asdict(model)}


def model_from_dict(doc: dict) -> ClutterModel:
    try:
        cls = _PARAM_TYPES[doc["family"]]
    except KeyError:
        raise DomainError(f"unknown clutter family {doc.get('family')!r}") from None
    return cls(**doc["params"])


def model_type(family: str):
    """Map a family name to its parameter class."""
    try:
        return _PARAM_TYPES[family.lower()]
    except KeyError:
        raise DomainError(f"unknown clutter family {family!r}; expected one of {FAMILIES}") from None


def as_samples(values, *, positive=False, min_count=1) -> np.ndarray:
    """Validate and flatten a sample set.

    Parameters
    ----------
    values : array_like
        Amplitudes.
    positive : bool
        Require strictly positive values (log-domain estimators).
    min_count : int
        Minimum number of samples.

    Returns
    -------
    numpy.ndarray
        1-D float64 copy of the samples.
    """
    x = np.asarray(values, dtype=np.float64).ravel()
    if x.size < min_count:
        raise DegenerateDataError(f"need at least {min_count} samples, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise DomainError("samples must be finite")
    if positive:
        if np.any(x <= 0):
            raise DomainError("samples must be strictly positive; floor zeros explicitly first")
    elif np.any(x < 0):
        raise DomainError("amplitude samples must be non-negative")
    return x


def _as_support(x):
    x = np.asarray(x, dtype=np.float64)
    if np.any(x < 0):
        raise DomainError("amplitude must be non-negative")
    return x


def _scalar_or_array(out, x):
    return float(out) if np.ndim(x) == 0 else out


# ---------------------------------------------------------------------------
# densities, distribution functions, quantiles


def pdf(model: ClutterModel, x):
    """Probability density of ``model`` at amplitude(s) ``x``.

    The log-normal density is taken as 0 at ``x = 0`` by continuity. At the
    origin the Weibull and Gamma densities are infinite for shapes below one.
    Negative amplitudes raise :class:`DomainError`.
    """
    xa = _as_support(x)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        if isinstance(model, WeibullParams):
            z = xa / model.beta
            out = (model.alpha / model.beta) * z ** (model.alpha - 1.0) * np.exp(-(z**model.alpha))
        elif isinstance(model, RayleighParams):
            s2 = model.sigma**2
            out = xa / s2 * np.exp(-(xa**2) / (2.0 * s2))
        elif isinstance(model, LogNormalParams):
            safe = np.where(xa > 0, xa, 1.0)
            dens = np.exp(-((np.log(safe) - model.gamma_loc) ** 2) / (2.0 * model.eta**2)) / (
                safe * model.eta * math.sqrt(2.0 * math.pi)
            )
            out = np.where(xa > 0, dens, 0.0)
        elif isinstance(model, GammaParams):
            logp = (
                special.xlogy(model.a - 1.0, xa)
                - xa / model.b
                - model.a * math.log(model.b)
                - special.gammaln(model.a)
            )
            out = np.exp(logp)
        else:
            raise TypeError(f"not a clutter model: {model!r}")
    return _scalar_or_array(out, x)


def cdf(model: ClutterModel, x):
    """Cumulative distribution function; 0 for ``x <= 0``."""
    xa = np.maximum(np.asarray(x, dtype=np.float64), 0.0)
    with np.errstate(divide="ignore"):
        if isinstance(model, WeibullParams):
            out = -np.expm1(-((xa / model.beta) ** model.alpha))
        elif isinstance(model, RayleighParams):
            out = -np.expm1(-(xa**2) / (2.0 * model.sigma**2))
        elif isinstance(model, LogNormalParams):
            safe = np.where(xa > 0, xa, 1.0)
            out = np.where(xa > 0, special.ndtr((np.log(safe) - model.gamma_loc) / model.eta), 0.0)
        elif isinstance(model, GammaParams):
            out = special.gammainc(model.a, xa / model.b)
        else:
            raise TypeError(f"not a clutter model: {model!r}")
    return _scalar_or_array(out, x)


def sf(model: ClutterModel, x):
    """Survival function ``P(X > x)``, computed without cancellation."""
    xa = np.maximum(np.asarray(x, dtype=np.float64), 0.0)
    if isinstance(model, WeibullParams):
        out = np.exp(-((xa / model.beta) ** model.alpha))
    elif isinstance(model, RayleighParams):
        out = np.exp(-(xa**2) / (2.0 * model.sigma**2))
    elif isinstance(model, LogNormalParams):
        with np.errstate(divide="ignore"):
            safe = np.where(xa > 0, xa, 1.0)
            out = np.where(xa > 0, special.ndtr(-(np.log(safe) - model.gamma_loc) / model.eta), 1.0)
    elif isinstance(model, GammaParams):
        out = special.gammaincc(model.a, xa / model.b)
    else:
        raise TypeError(f"not a clutter model: {model!r}")
    return _scalar_or_array(out, x)


def quantile(model: ClutterModel, p):
    """Inverse CDF for probabilities in ``[0, 1)``."""
    pa = np.asarray(p, dtype=np.float64)
    if np.any((pa < 0) | (pa >= 1)):
        raise DomainError("quantile probability must lie in [0, 1)")
    if isinstance(model, WeibullParams):
        out = model.beta * (-np.log1p(-pa)) ** (1.0 / model.alpha)
    elif isinstance(model, RayleighParams):
        out = model.sigma * np.sqrt(-2.0 * np.log1p(-pa))
    elif isinstance(model, LogNormalParams):
        out = np.exp(model.gamma_loc + model.eta * special.ndtri(pa))
    elif isinstance(model, GammaParams):
        out = model.b * special.gammaincinv(model.a, pa)
    else:
        raise TypeError(f"not a clutter model: {model!r}")
    return _scalar_or_array(out, p)


def model_mean(model: ClutterModel) -> float:
    """Mean amplitude of a fitted model."""
    if isinstance(model, WeibullParams):
        return model.beta * math.gamma(1.0 + 1.0 / model.alpha)
    if isinstance(model, RayleighParams):
        return model.sigma * math.sqrt(math.pi / 2.0)
    if isinstance(model, LogNormalParams):
        return math.exp(model.gamma_loc + model.eta**2 / 2.0)
    if isinstance(model, GammaParams):
        return model.a * model.b
    raise TypeError(f"not a clutter model: {model!r}")


def sample(model: ClutterModel, n: int, seed: int) -> np.ndarray:
    """Draw ``n`` i.i.d. amplitudes, deterministic for a given ``seed``.

    Weibull and Rayleigh variates use inverse-transform sampling of a
    uniform stream; Log-normal exponentiates a normal stream and Gamma uses
    numpy's generator.
    """
    n = int(n)
    if n < 1:
        raise DomainError("sample size must be at least 1")
    rng = np.random.default_rng(seed)
    if isinstance(model, WeibullParams):
        u = rng.random(n)
        return model.beta * (-np.log1p(-u)) ** (1.0 / model.alpha)
    if isinstance(model, RayleighParams):
        u = rng.random(n)
        return model.sigma * np.sqrt(-2.0 * np.log1p(-u))
    if isinstance(model, LogNormalParams):
        return np.exp(model.gamma_loc + model.eta * rng.standard_normal(n))
    if isinstance(model, GammaParams):
        return rng.gamma(model.a, model.b, n)
    raise TypeError(f"not a clutter model: {model!r}")


# ---------------------------------------------------------------------------
# maximum likelihood


class FitInfo(NamedTuple):
    iterations: int
    converged: bool


def _weibull_profile(logs, mean_log):
    """Return a callable giving the profile score and its derivative in alpha.

    ``logs`` must be ``log(x / max(x))`` so every weight ``x**alpha`` is
    bounded by one and the sums cannot overflow.
    """

    def score(alpha):
        w = np.exp(alpha * logs)
        s0 = w.sum()
        s1 = np.dot(w, logs) / s0
        s2 = np.dot(w, logs * logs) / s0
        g = s1 - mean_log - 1.0 / alpha
        dg = s2 - s1 * s1 + 1.0 / (alpha * alpha)
        return g, dg

    return score


def fit_weibull(samples, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER, return_info=False):
    """Maximum-likelihood Weibull fit.

    The scale is eliminated through ``beta**alpha = mean(x**alpha)``, which
    leaves a single monotone equation in the shape::

        1/alpha = sum(x**alpha * log x) / sum(x**alpha) - mean(log x)

    Its root is bracketed on ``[0.02, 50]`` and located by bisection, then
    polished with safeguarded Newton steps until the relative step drops
    below ``tol``.

    Parameters
    ----------
    samples : array_like
        Strictly positive amplitudes, at least two distinct.
    tol : float
        Relative convergence tolerance on the shape.
    max_iter : int
        Total iteration budget (bisection plus Newton).
    return_info : bool
        Also return a :class:`FitInfo` with the iteration count.

    Returns
    -------
    WeibullParams or (WeibullParams, FitInfo)

    Raises
    ------
    DivergenceError
        Identical or nearly identical samples: the likelihood keeps growing
        with the shape and no finite estimate exists inside the bracket.
    ConvergenceError
        Iteration budget exhausted; ``last_iterate`` holds the shape.
    """
    x = as_samples(samples, positive=True, min_count=2)
    top = x.max()
    if x.min() == top:
        raise DivergenceError("identical samples have no finite Weibull MLE", last_iterate=math.inf)
    logs = np.log(x / top)
    mean_log = logs.mean()
    score = _weibull_profile(logs, mean_log)

    lo, hi = WEIBULL_ALPHA_BRACKET
    g_lo, _ = score(lo)
    g_hi, _ = score(hi)
    if g_lo > 0:
        raise ConvergenceError("Weibull shape root lies below the search bracket", last_iterate=lo)
    if g_hi < 0:
        raise DivergenceError(
            "Weibull shape root lies above the search bracket; data are nearly degenerate",
            last_iterate=hi,
        )

    iterations = 0
    # bisection until the bracket is narrow enough for Newton to be safe
    while (hi - lo) > 1e-2 * lo:
        iterations += 1
        if iterations > max_iter:
            raise ConvergenceError("Weibull bisection did not converge", 0.5 * (lo + hi), iterations)
        mid = 0.5 * (lo + hi)
        g_mid, _ = score(mid)
        if g_mid < 0:
            lo = mid
        else:
            hi = mid

    alpha = 0.5 * (lo + hi)
    while True:
        iterations += 1
        if iterations > max_iter:
            raise ConvergenceError("Weibull Newton refinement did not converge", alpha, iterations)
        g, dg = score(alpha)
        if g == 0:
            break
        if g < 0:
            lo = alpha
        else:
            hi = alpha
        step = g / dg
        proposal = alpha - step
        if not (lo < proposal < hi):
            proposal = 0.5 * (lo + hi)
        delta = abs(proposal - alpha)
        alpha = proposal
        if delta <= tol * alpha:
            break

    beta = top * np.mean(np.exp(alpha * logs)) ** (1.0 / alpha)
    params = WeibullParams(alpha, beta)
    if return_info:
        return params, FitInfo(iterations, True)
    return params


def fit_rayleigh(samples) -> RayleighParams:
    """Closed-form Rayleigh MLE, ``sigma = sqrt(sum(x**2) / (2N))``."""
    x = as_samples(samples, min_count=1)
    top = x.max()
    if top == 0:
        raise DegenerateDataError("all-zero samples give sigma = 0")
    # scale by the maximum so tiny or huge amplitudes do not under/overflow
    u = x / top
    return RayleighParams(top * math.sqrt(np.dot(u, u) / (2.0 * x.size)))


def fit_lognormal(samples) -> LogNormalParams:
    """Log-domain MLE: mean and population standard deviation of ``log x``."""
    x = as_samples(samples, positive=True, min_count=2)
    logs = np.log(x)
    eta = float(np.std(logs))
    if eta == 0:
        raise DegenerateDataError("zero log-variance; no log-normal fit")
    return LogNormalParams(eta=eta, gamma_loc=float(np.mean(logs)))


def fit_gamma(samples, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER) -> GammaParams:
    """Gamma MLE by root-finding on the shape equation.

    Solves ``log(a) - digamma(a) = log(mean x) - mean(log x)`` with Newton
    steps kept inside a shrinking bracket, starting from the
    method-of-moments shape. The scale follows as ``mean / a``.
    """
    x = as_samples(samples, positive=True, min_count=2)
    mean = x.mean()
    target = math.log(mean) - np.mean(np.log(x))
    var = x.var()
    if var == 0 or target <= 0:
        raise DegenerateDataError("zero-variance samples; no Gamma fit")

    def f(a):
        return math.log(a) - special.digamma(a) - target

    a = mean * mean / var
    lo, hi = 0.0, math.inf
    for iteration in range(1, max_iter + 1):
        fa = f(a)
        # f is strictly decreasing in a
        if fa > 0:
            lo = a
        else:
            hi = a
        dfa = 1.0 / a - special.polygamma(1, a)
        proposal = a - fa / dfa if dfa != 0 else math.nan
        if not (lo < proposal < hi):
            if math.isinf(hi):
                proposal = 2.0 * a
            elif lo == 0:
                proposal = 0.5 * a
            else:
                proposal = math.sqrt(lo * hi)
        delta = abs(proposal - a)
        a = proposal
        if delta <= tol * a:
            return GammaParams(a, mean / a)
    raise ConvergenceError("Gamma shape iteration did not converge", a, max_iter)


def fit(family: str, samples, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER) -> ClutterModel:
    """Fit a family by name."""
    family = model_type(family).family
    if family == "weibull":
        return fit_weibull(samples, tol, max_iter)
    if family == "rayleigh":
        return fit_rayleigh(samples)
    if family == "gamma":
        return fit_gamma(samples, tol, max_iter)
    return fit_lognormal(samples)
