"""Ancestral sampling of series with their hidden segmentation.

All randomness comes from numpy's PCG64 bit generator seeded with the
caller's integer; only its uniform doubles are used. Gaussian noise is the
cosine branch of Box-Muller, and discrete draws are inverse-CDF lookups, so a
seed reproduces the same bytes on every platform.
"""
from dataclasses import dataclass
import math

import numpy as np

from .errors import DomainError
from .lattice import Segment, Segmentation, path_log_joint
from .model import Series, require_valid, template


@dataclass(frozen=True, eq=False)
class SamplePath:
    series: Series
    segmentation: Segmentation
    seed: int


class _Stream:
    """Uniform and normal draws from a seeded PCG64 stream."""

    def __init__(self, seed):
        self._gen = np.random.Generator(np.random.PCG64(seed))

    def uniform(self):
        return float(self._gen.random())

    def normals(self, n):
        u = self._gen.random(2 * n)
        u1 = 1.0 - u[0::2]
        return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u[1::2])

    def choice(self, probs):
        cdf = np.cumsum(probs)
        k = int(np.searchsorted(cdf, self.uniform() * cdf[-1], side="right"))
        return min(k, len(cdf) - 1)


def draw_duration(dur, stream):
    lo, hi = dur.support()
    pmf = np.asarray(dur.pmf)
    return lo + stream.choice(pmf)


def default_max_length(model):
    return int(math.ceil(10 * sum(d.mean() for d in model.durations)))


def sample(model, seed, max_length=None):
    """Draw one series from the model by ancestral sampling.

    Stops when the chain reaches an absorbing state or when the next whole
    segment would exceed ``max_length``; segments are never truncated.
    """
    require_valid(model)
    if max_length is None:
        max_length = default_max_length(model)
    if max_length < 1:
        raise DomainError("max_length must be >= 1")
    stream = _Stream(seed)
    absorbing = model.absorbing
    pieces, segments = [], []
    total = 0
    state = stream.choice(model.pi)
    while True:
        d = draw_duration(model.durations[state], stream)
        if total + d > max_length:
            break
        em = model.emissions[state]
        noise = stream.normals(d) / math.sqrt(em.precision)
        pieces.append(template(em, model.basis, d) + noise)
        segments.append(Segment(state, total, d))
        total += d
        if absorbing[state]:
            break
        state = stream.choice(model.trans[state])
    if not segments:
        raise DomainError(f"first segment is longer than max_length={max_length}")
    series = Series(np.concatenate(pieces), model.sampling_period)
    path = Segmentation(tuple(segments), 0.0)
    path = Segmentation(path.segments, path_log_joint(model, series, path))
    return SamplePath(series, path, seed)
