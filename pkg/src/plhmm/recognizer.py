"""Sliding-window likelihood scoring and peak picking."""
from dataclasses import dataclass
import math

import numpy as np

from .lattice import _prepare, windows_log_likelihood
from .errors import DomainError


@dataclass(frozen=True, eq=False)
class ScoreTrack:
    """``scores[k]`` is the log-likelihood of the window starting at sample ``1 + k*stride``."""

    scores: np.ndarray
    width: int
    stride: int

    def __len__(self):
        return self.scores.size

    @property
    def starts(self):
        """1-based start sample of each window."""
        return 1 + self.stride * np.arange(self.scores.size)


@dataclass(frozen=True)
class Detection:
    index: int
    score: float
    peak: bool = True


def n_windows(T, width, stride):
    return (T - width) // stride + 1 if T >= width else 0


def score_windows(model, strip, width=260, stride=1):
    """Forward log-likelihood of each window; infeasible windows score -inf.

    Segment emission terms depend only on a segment's own samples, so one
    table over the whole strip serves every window; each window still runs
    its own forward recursion, batched along a leading axis.
    """
    if width < 1 or stride < 1:
        raise DomainError("width and stride must be >= 1")
    T = len(strip)
    K = n_windows(T, width, stride)
    if K == 0:
        return ScoreTrack(np.empty(0), width, stride)
    bounds = [(lo, min(hi, width)) for lo, hi in (d.support() for d in model.durations)]
    inputs = _prepare(model, strip.values, bounds)
    scores = windows_log_likelihood(inputs, stride * np.arange(K), width)
    return ScoreTrack(scores, width, stride)


def find_detections(track, threshold, min_separation=1):
    """Local maxima at or above ``threshold``, thinned greedily.

    Candidates are taken from the highest score down (earliest index on ties);
    a candidate closer than ``min_separation`` windows to an accepted one is
    dropped.
    """
    if min_separation < 1:
        raise DomainError("min_separation must be >= 1")
    s = np.asarray(track.scores if isinstance(track, ScoreTrack) else track, dtype=float)
    n = s.size
    if n == 0:
        return []
    left = np.concatenate([[-math.inf], s[:-1]])
    right = np.concatenate([s[1:], [-math.inf]])
    cand = np.flatnonzero((s >= left) & (s >= right) & (s >= threshold) & np.isfinite(s))
    order = sorted(cand, key=lambda k: (-s[k], k))
    kept = []
    for k in order:
        if all(abs(k - j) >= min_separation for j in kept):
            kept.append(k)
    return [Detection(int(k), float(s[k])) for k in sorted(kept)]
