"""State-duration models: a bounded discrete pmf and a discretized Gamma.

Both expose the same small surface used by the lattice and the sampler:
``support()``, ``log_pmf(d)``, ``pmf_at(d)``, ``log_pmf_table(D)``,
``mean()`` and ``to_dict()``.
"""
from dataclasses import dataclass, field
from functools import cached_property
import math

import numpy as np

from .errors import DomainError, EstimationError
from .special import digamma, invert_digamma, log_gamma_interval, log_gamma_interval_grid

_SUM_TOL = 1e-12
# Above this shape the unit-bin discretization is a point mass to double
# precision for any horizon in practical use; reestimates are clamped here.
MAX_SHAPE = 1e6


def _frozen(arr):
    arr = np.array(arr, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class DiscreteDuration:
    """Probability mass over the integer interval ``[d_min, d_max]``."""

    d_min: int
    d_max: int
    pmf: np.ndarray

    kind = "discrete"

    def __post_init__(self):
        object.__setattr__(self, "pmf", _frozen(self.pmf))
        if int(self.d_min) != self.d_min or int(self.d_max) != self.d_max:
            raise DomainError("duration bounds must be integers")
        object.__setattr__(self, "d_min", int(self.d_min))
        object.__setattr__(self, "d_max", int(self.d_max))
        if self.d_min < 1 or self.d_max < self.d_min:
            raise DomainError(f"bad duration support [{self.d_min}, {self.d_max}]")
        if self.pmf.shape != (self.d_max - self.d_min + 1,):
            raise DomainError("pmf length must equal d_max - d_min + 1")
        if not np.all(np.isfinite(self.pmf)) or np.any(self.pmf < 0):
            raise DomainError("pmf entries must be finite and nonnegative")
        if abs(self.pmf.sum() - 1.0) > _SUM_TOL:
            raise DomainError(f"pmf sums to {self.pmf.sum()!r}, not 1")

    @classmethod
    def uniform(cls, d_min, d_max):
        n = d_max - d_min + 1
        return cls(d_min, d_max, np.full(n, 1.0 / n))

    @classmethod
    def point(cls, d):
        return cls(d, d, [1.0])

    def support(self):
        return self.d_min, self.d_max

    def pmf_at(self, d):
        if d < self.d_min or d > self.d_max:
            return 0.0
        return float(self.pmf[d - self.d_min])

    def log_pmf(self, d):
        p = self.pmf_at(d)
        return math.log(p) if p > 0 else -math.inf

    def log_pmf_table(self, D):
        """ln p(d) for d = 1..D as an array of length D."""
        out = np.full(D, -np.inf)
        lo, hi = self.d_min, min(self.d_max, D)
        if lo <= hi:
            with np.errstate(divide="ignore"):
                out[lo - 1:hi] = np.log(self.pmf[: hi - lo + 1])
        return out

    def mean(self):
        return float(np.dot(np.arange(self.d_min, self.d_max + 1), self.pmf))

    def to_dict(self):
        return {"type": "discrete", "d_min": self.d_min, "d_max": self.d_max,
                "pmf": [float(p) for p in self.pmf]}

    def __eq__(self, other):
        return (isinstance(other, DiscreteDuration) and self.d_min == other.d_min
                and self.d_max == other.d_max and np.array_equal(self.pmf, other.pmf))

    __hash__ = None


@dataclass(frozen=True, eq=False)
class GammaDuration:
    """Gamma(shape, rate) integrated over unit bins and renormalized on ``[1, horizon]``.

    ``p(d)`` is proportional to the Gamma mass on ``[d, d + 1)``; the
    constant puts total mass one on ``d = 1..horizon``.
    """

    shape: float
    rate: float
    horizon: int

    kind = "gamma"

    def __post_init__(self):
        object.__setattr__(self, "shape", float(self.shape))
        object.__setattr__(self, "rate", float(self.rate))
        if int(self.horizon) != self.horizon:
            raise DomainError("horizon must be an integer")
        object.__setattr__(self, "horizon", int(self.horizon))
        if not (self.shape > 0 and math.isfinite(self.shape)):
            raise DomainError(f"gamma shape must be positive, got {self.shape!r}")
        if not (self.rate > 0 and math.isfinite(self.rate)):
            raise DomainError(f"gamma rate must be positive, got {self.rate!r}")
        if self.horizon < 1:
            raise DomainError("gamma horizon must be >= 1")

    @cached_property
    def _log_unnormalized(self):
        points = [self.rate * d for d in range(1, self.horizon + 2)]
        return np.array(log_gamma_interval_grid(self.shape, points))

    @cached_property
    def log_normalizer(self):
        """ln Z with Z = P(shape, rate*(horizon+1)) - P(shape, rate)."""
        return log_gamma_interval(self.shape, self.rate, self.rate * (self.horizon + 1))

    @cached_property
    def _log_table(self):
        table = self._log_unnormalized - self.log_normalizer
        table.setflags(write=False)
        return table

    @property
    def pmf(self):
        return np.exp(self._log_table)

    def support(self):
        return 1, self.horizon

    def unnormalized_pmf(self, d):
        """Gamma mass on ``[d, d + 1)`` before renormalization."""
        return math.exp(log_gamma_interval(self.shape, self.rate * d, self.rate * (d + 1)))

    def pmf_at(self, d):
        if d < 1 or d > self.horizon:
            return 0.0
        return float(math.exp(self._log_table[d - 1]))

    def log_pmf(self, d):
        if d < 1 or d > self.horizon:
            return -math.inf
        return float(self._log_table[d - 1])

    def log_pmf_table(self, D):
        out = np.full(D, -np.inf)
        n = min(D, self.horizon)
        out[:n] = self._log_table[:n]
        return out

    def mean(self):
        d = np.arange(1, self.horizon + 1)
        return float(np.dot(d, self.pmf))

    def to_dict(self):
        return {"type": "gamma", "shape": self.shape, "rate": self.rate, "horizon": self.horizon}

    def __eq__(self, other):
        return (isinstance(other, GammaDuration) and self.shape == other.shape
                and self.rate == other.rate and self.horizon == other.horizon)

    __hash__ = None


def gamma_pmf(gd, d):
    """Renormalized discretized Gamma probability of duration ``d`` (0 off support)."""
    return gd.pmf_at(d)


def duration_from_dict(doc):
    kind = doc.get("type")
    if kind == "discrete":
        return DiscreteDuration(doc["d_min"], doc["d_max"], doc["pmf"])
    if kind == "gamma":
        return GammaDuration(doc["shape"], doc["rate"], doc["horizon"])
    raise DomainError(f"unknown duration type {kind!r}")


@dataclass(frozen=True, eq=False)
class DurationStats:
    """Posterior duration accumulators for one state.

    ``counts[d - 1]`` is the expected number of segments of the state with
    duration ``d``; the scalar fields are the moments the Gamma update uses.
    """

    counts: np.ndarray
    total_mass: float = field(init=False)
    expected_d: float = field(init=False)
    expected_log_d: float = field(init=False)

    def __post_init__(self):
        counts = _frozen(self.counts)
        d = np.arange(1, counts.size + 1)
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "total_mass", float(counts.sum()))
        object.__setattr__(self, "expected_d", float(np.dot(d, counts)))
        object.__setattr__(self, "expected_log_d", float(np.dot(np.log(d), counts)))

    @classmethod
    def from_mapping(cls, mapping):
        """Build from ``{d: count}``."""
        D = max(mapping) if mapping else 0
        counts = np.zeros(D)
        for d, c in mapping.items():
            if d < 1:
                raise DomainError("durations start at 1")
            counts[d - 1] += c
        return cls(counts)


def reestimate_discrete(stats, support):
    """pmf(d) proportional to the expected counts, restricted to ``support``."""
    d_min, d_max = support
    pmf = np.zeros(d_max - d_min + 1)
    hi = min(d_max, stats.counts.size)
    if hi >= d_min:
        pmf[: hi - d_min + 1] = stats.counts[d_min - 1:hi]
    total = pmf.sum()
    if not total > 0:
        raise EstimationError("no posterior duration mass inside the support")
    return DiscreteDuration(d_min, d_max, pmf / total)


def reestimate_gamma(stats, old, coupled=False):
    """Closed-form rate update and digamma-inverted shape update.

    The rate uses the old shape and the shape uses the old rate. With
    ``coupled=True`` the shape is solved first and the rate derived from it,
    so that mean = shape / rate holds for the returned pair.
    """
    if not stats.total_mass > 0:
        raise EstimationError("zero posterior mass for the Gamma update")
    if not stats.expected_d > 0:
        raise EstimationError("zero expected duration for the Gamma update")
    mass = stats.total_mass
    if coupled:
        shape = min(_coupled_shape(stats), MAX_SHAPE)
        rate = shape * mass / stats.expected_d
    else:
        rate = old.shape * mass / stats.expected_d
        target = (stats.expected_log_d + math.log(old.rate) * mass) / mass
        shape = MAX_SHAPE if target >= digamma(MAX_SHAPE) else min(invert_digamma(target), MAX_SHAPE)
    return GammaDuration(shape, rate, old.horizon)


def _coupled_shape(stats):
    # ln(nu) - psi(nu) = ln E[d] - E[ln d], solved by fixed-point on psi
    mass = stats.total_mass
    gap = math.log(stats.expected_d / mass) - stats.expected_log_d / mass
    if gap <= 1.0 / (2.0 * MAX_SHAPE):
        # (nearly) all mass at one duration: the likelihood sharpens without bound
        return MAX_SHAPE
    nu = (3 - gap + math.sqrt((gap - 3) ** 2 + 24 * gap)) / (12 * gap)
    for _ in range(100):
        nu_new = invert_digamma(math.log(nu) - gap)
        if abs(nu_new - nu) <= 1e-13 * nu:
            return nu_new
        nu = nu_new
    return nu
