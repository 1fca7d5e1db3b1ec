"""Synthetic two-event competing-risks data with known cumulative incidence.

Three iid standard-normal covariates select one of five regions. Each
region fixes the probability of each event type and the distribution of
the event time given the type, so the true CIF of every subject is known
in closed form. Censoring is exponential with mean 15, independent of the
covariates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .data import Column, CompetingRiskResponse, Dataset, NUMERIC

CENSOR_RATE = 1.0 / 15.0


class TimeDistribution:
    """Positive event-time law with a closed-form CDF, optionally shifted."""

    def __init__(self, name, offset=0.0):
        self.name = name
        self.offset = float(offset)

    def _base_cdf(self, t):
        raise NotImplementedError

    def _base_sample(self, rng, size):
        raise NotImplementedError

    def cdf(self, t):
        t = np.asarray(t, dtype=np.float64) - self.offset
        out = np.where(t > 0, self._base_cdf(np.maximum(t, 0.0)), 0.0)
        return float(out) if out.ndim == 0 else out

    def sample(self, rng, size):
        return self._base_sample(rng, size) + self.offset

    def __repr__(self):
        return self.name if not self.offset else f"{self.name} + {self.offset:g}"


class Weibull(TimeDistribution):
    def __init__(self, shape, scale, offset=0.0):
        super().__init__(f"Weibull(k={shape:g}, scale={scale:g})", offset)
        self.shape, self.scale = shape, scale

    def _base_cdf(self, t):
        return -np.expm1(-(t / self.scale) ** self.shape)

    def _base_sample(self, rng, size):
        return self.scale * rng.weibull(self.shape, size)


class Exponential(TimeDistribution):
    def __init__(self, rate, offset=0.0):
        super().__init__(f"Exp(rate={rate:g})", offset)
        self.rate = rate

    def _base_cdf(self, t):
        return -np.expm1(-self.rate * t)

    def _base_sample(self, rng, size):
        return rng.exponential(1.0 / self.rate, size)


class LogNormal(TimeDistribution):
    def __init__(self, mu=0.0, sigma=1.0, offset=0.0):
        super().__init__(f"Lognormal({mu:g}, {sigma:g})", offset)
        self.mu, self.sigma = mu, sigma

    def _base_cdf(self, t):
        with np.errstate(divide="ignore"):
            return ndtr((np.log(t) - self.mu) / self.sigma)

    def _base_sample(self, rng, size):
        return rng.lognormal(self.mu, self.sigma, size)


class HalfNormal(TimeDistribution):
    """Standard normal truncated to the positive half-line."""

    def __init__(self, offset=0.0):
        super().__init__("HalfNormal(0, 1)", offset)

    def _base_cdf(self, t):
        return 2.0 * ndtr(t) - 1.0

    def _base_sample(self, rng, size):
        return np.abs(rng.standard_normal(size))


@dataclass(frozen=True)
class RegionSpec:
    region: int
    condition: str
    probabilities: tuple
    distributions: tuple


REGIONS = (
    RegionSpec(1, "x1 < 0 & x2 < 0 & x3 < 1", (0.4, 0.6),
               (Weibull(5.0, 6.0), Exponential(1.0))),
    RegionSpec(2, "x1 < 0 & x2 >= 0 & x3 < 1", (0.1, 0.9),
               (LogNormal(0.0, 1.0), HalfNormal())),
    RegionSpec(3, "x1 >= 0 & x2 < 0 & x3 < 1", (0.7, 0.3),
               (Exponential(1.0), Exponential(1.0, offset=1.0))),
    RegionSpec(4, "x1 >= 0 & x2 >= 0 & x3 < 1", (0.6, 0.4),
               (Weibull(1.0, 2.0), LogNormal(0.0, 1.0))),
    RegionSpec(5, "x3 >= 1", (0.5, 0.5),
               (Exponential(10.0, offset=2.0), Exponential(0.25))),
)


def region_of(X):
    """Region id (1..5) for each covariate row."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    x1, x2, x3 = X[:, 0], X[:, 1], X[:, 2]
    region = 1 + (x1 >= 0) * 2 + (x2 >= 0) * 1
    return np.where(x3 >= 1, 5, region).astype(np.int64)


class TrueCIF:
    """``P(T <= t | type j, X) * P(type j | X)`` for one region and event."""

    def __init__(self, region, j):
        self.region = region
        self.j = j
        self.dist = region.distributions[j - 1]
        self.probability = region.probabilities[j - 1]

    @property
    def breakpoints(self):
        """Points where the curve is not smooth."""
        return np.array([self.dist.offset]) if self.dist.offset > 0 else np.empty(0)

    def __call__(self, t):
        return self.probability * self.dist.cdf(t)


def true_cif(region, j):
    if j not in (1, 2):
        raise ValueError("the simulation has event types 1 and 2 only")
    if isinstance(region, (int, np.integer)):
        region = REGIONS[int(region) - 1]
    return TrueCIF(region, j)


@dataclass
class SimulatedData:
    dataset: Dataset
    region: np.ndarray
    latent_time: np.ndarray
    latent_event: np.ndarray
    censor_time: np.ndarray

    def true_cifs(self, j):
        """True CIF curve of event ``j`` for every row."""
        curves = {r.region: true_cif(r, j) for r in REGIONS}
        return [curves[int(r)] for r in self.region]


def generate(n, rng=None, n_noise=0):
    """Draw ``n`` subjects.

    Parameters
    ----------
    rng : int or numpy Generator
    n_noise : int
        Extra standard-normal covariates with no effect on the response.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(rng)
    X = rng.standard_normal((n, 3 + n_noise))
    region = region_of(X)
    u = rng.random(n)
    p1 = np.array([r.probabilities[0] for r in REGIONS])[region - 1]
    latent_event = np.where(u < p1, 1, 2)
    latent_time = np.empty(n)
    for spec in REGIONS:
        for j in (1, 2):
            sel = np.flatnonzero((region == spec.region) & (latent_event == j))
            latent_time[sel] = spec.distributions[j - 1].sample(rng, sel.size)
    censor = rng.exponential(1.0 / CENSOR_RATE, n)
    observed = latent_time < censor
    time = np.where(observed, latent_time, censor)
    event = np.where(observed, latent_event, 0)
    response = CompetingRiskResponse(time, event, censor)
    columns = tuple(Column(f"x{i + 1}", NUMERIC) for i in range(X.shape[1]))
    return SimulatedData(Dataset(X, columns, response, 2), region, latent_time,
                         latent_event, censor)
