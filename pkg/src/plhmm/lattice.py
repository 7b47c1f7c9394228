"""Duration-explicit forward-backward in the log domain.

Time is counted in consumed samples: index ``t`` of an internal table means
"the first t samples have been explained", so a segment ending at ``t`` with
duration ``d`` covers the 0-based samples ``t-d .. t-1``. Public tables drop
the empty row 0 and are indexed ``t - 1``.

Internal tables:

``seg[t, j, d-1]``
    ln of the product of emission densities of state ``j`` over the segment
    ending at ``t`` with duration ``d``.
``enter[s, j]``
    ln P(v_1..v_s, a segment of ``j`` starts at sample s). ``enter[0]`` is
    ln pi.
``bstart[s, j]``
    ln P(v_{s+1}..v_T | a segment of ``j`` starts at sample s).
"""
from dataclasses import dataclass, field
import math

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .durations import DurationStats
from .errors import DomainError, ImpossibleSeriesError
from .model import require_valid, segment_log_likelihood, template

_LOG_2PI = math.log(2.0 * math.pi)
_TIE_RTOL = 1e-12


def _log(x):
    with np.errstate(divide="ignore"):
        return np.log(x)


def _lse(a, axis=0):
    m = np.max(a, axis=axis, keepdims=True)
    m_safe = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore", under="ignore"):
        out = np.log(np.sum(np.exp(a - m_safe), axis=axis, keepdims=True)) + m_safe
    out = np.squeeze(out, axis=axis)
    return np.where(np.isfinite(np.squeeze(m, axis=axis)), out, -np.inf)


# ---------------------------------------------------------------------------
# inputs shared by all passes
# ---------------------------------------------------------------------------

def search_bounds(model, T, bounds=None):
    """Per-state ``[lo, hi]`` durations to search, clipped to ``[1, T]``.

    An empty range (``lo > hi``) means the state can never complete a
    segment in a series of length T.
    """
    out = np.empty((model.n_states, 2), dtype=int)
    for j, dur in enumerate(model.durations):
        lo, hi = dur.support() if bounds is None else bounds[j]
        out[j] = max(int(lo), 1), min(int(hi), T)
    return out


def duration_table(model, bounds):
    """ln p_j(d) for d = 1..D, shape (N, D), -inf outside the searched bounds."""
    D = max(1, int(bounds[:, 1].max()))
    table = np.full((model.n_states, D), -np.inf)
    for j, dur in enumerate(model.durations):
        lo, hi = bounds[j]
        if lo <= hi:
            table[j, lo - 1:hi] = dur.log_pmf_table(D)[lo - 1:hi]
    return table


def segment_table(model, values, bounds, D):
    """Segment log-likelihoods ``seg[t, j, d-1]``, shape (T+1, N, D)."""
    values = np.asarray(values, dtype=float)
    T = values.size
    seg = np.full((T + 1, model.n_states, D), -np.inf)
    for j, em in enumerate(model.emissions):
        lo, hi = bounds[j]
        half = 0.5 * (math.log(em.precision) - _LOG_2PI)
        for d in range(lo, min(hi, T) + 1):
            r = sliding_window_view(values, d) - template(em, model.basis, d)
            sse = np.einsum("ij,ij->i", r, r)
            seg[d:, j, d - 1] = d * half - 0.5 * em.precision * sse
    return seg


@dataclass
class _Inputs:
    log_pi: np.ndarray
    log_A: np.ndarray
    log_dur: np.ndarray
    seg: np.ndarray
    bounds: np.ndarray


def _prepare(model, values, bounds=None, check=True):
    if check:
        require_valid(model)
    T = len(values)
    sb = search_bounds(model, T, bounds)
    log_dur = duration_table(model, sb)
    seg = segment_table(model, values, sb, log_dur.shape[1])
    return _Inputs(_log(model.pi), _log(model.trans), log_dur, seg, sb)


# ---------------------------------------------------------------------------
# recursions
# ---------------------------------------------------------------------------

def _forward_pass(log_pi, log_A, log_dur, seg, T):
    N, D = log_dur.shape
    dur_t = log_dur.T
    alpha = np.full((T + 1, N), -np.inf)
    enter = np.full((T + 1, N), -np.inf)
    enter[0] = log_pi
    for t in range(1, T + 1):
        k = min(t, D)
        terms = enter[t - k:t][::-1] + dur_t[:k] + seg[t, :, :k].T
        alpha[t] = _lse(terms)
        if t < T:
            enter[t] = _lse(alpha[t][:, None] + log_A)
    return alpha, enter


def _backward_pass(log_A, log_dur, seg, T):
    N, D = log_dur.shape
    dur_t = log_dur.T
    beta = np.full((T + 1, N), -np.inf)
    bstart = np.full((T + 1, N), -np.inf)
    beta[T] = 0.0
    for s in range(T - 1, -1, -1):
        k = min(T - s, D)
        ends = np.arange(s + 1, s + k + 1)
        terms = dur_t[:k] + seg[ends, :, np.arange(k)] + beta[s + 1:s + k + 1]
        bstart[s] = _lse(terms)
        if s >= 1:
            beta[s] = _lse(log_A + bstart[s][None, :], axis=1)
    return beta, bstart


def windows_log_likelihood(inputs, starts, width, batch=256):
    """Forward log-likelihood of ``width`` samples from each of ``starts``.

    Every window runs its own recursion over the shared segment table; the
    windows are only stacked along a leading axis so one numpy call advances
    a whole batch by one sample.
    """
    starts = np.asarray(starts, dtype=int)
    N, D = inputs.log_dur.shape
    dur_t = inputs.log_dur.T
    out = np.empty(starts.size)
    for b in range(0, starts.size, batch):
        s0 = starts[b:b + batch]
        enter = np.full((s0.size, width + 1, N), -np.inf)
        enter[:, 0] = inputs.log_pi
        for t in range(1, width + 1):
            k = min(t, D)
            seg = np.swapaxes(inputs.seg[s0 + t, :, :k], 1, 2)
            alpha = _lse(enter[:, t - k:t][:, ::-1] + dur_t[:k] + seg, axis=1)
            if t < width:
                enter[:, t] = _lse(alpha[:, :, None] + inputs.log_A, axis=1)
        out[b:b + batch] = _lse(alpha, axis=1)
    return out


def window_log_likelihood(inputs, start, width):
    """Forward log-likelihood of ``width`` samples from ``start`` using a shared table."""
    return float(windows_log_likelihood(inputs, [start], width)[0])


# ---------------------------------------------------------------------------
# public API
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Lattice:
    """Forward and/or backward tables for one (model, series) pair.

    ``log_alpha[t-1, j]`` is ln alpha_t(j) and ``log_beta[t-1, j]`` is
    ln beta_t(j) for t = 1..T. A forward-only lattice has ``log_beta`` None
    and vice versa.
    """

    log_alpha: np.ndarray
    log_beta: np.ndarray
    log_likelihood: float
    duration_bounds: np.ndarray
    inputs: _Inputs = field(repr=False)
    enter: np.ndarray = field(repr=False, default=None)
    bstart: np.ndarray = field(repr=False, default=None)

    @property
    def T(self):
        return self.inputs.seg.shape[0] - 1


def _check_feasible(ll):
    if not ll > -math.inf:
        raise ImpossibleSeriesError("no segmentation of the series has nonzero probability")


def forward(model, series, bounds=None):
    """Forward pass: alpha table and the total log-likelihood."""
    inp = _prepare(model, series.values, bounds)
    T = len(series)
    alpha, enter = _forward_pass(inp.log_pi, inp.log_A, inp.log_dur, inp.seg, T)
    ll = float(_lse(alpha[T]))
    _check_feasible(ll)
    return Lattice(alpha[1:], None, ll, inp.bounds, inp, enter=enter)


def backward(model, series, bounds=None):
    """Backward pass; its log-likelihood is assembled from the initial-state terms."""
    inp = _prepare(model, series.values, bounds)
    T = len(series)
    beta, bstart = _backward_pass(inp.log_A, inp.log_dur, inp.seg, T)
    ll = float(_lse(inp.log_pi + bstart[0]))
    _check_feasible(ll)
    return Lattice(None, beta[1:], ll, inp.bounds, inp, bstart=bstart)


def forward_backward(model, series, bounds=None):
    """Both passes over one shared segment table."""
    inp = _prepare(model, series.values, bounds)
    T = len(series)
    alpha, enter = _forward_pass(inp.log_pi, inp.log_A, inp.log_dur, inp.seg, T)
    ll = float(_lse(alpha[T]))
    _check_feasible(ll)
    beta, bstart = _backward_pass(inp.log_A, inp.log_dur, inp.seg, T)
    return Lattice(alpha[1:], beta[1:], ll, inp.bounds, inp, enter=enter, bstart=bstart)


def log_likelihood(model, series, bounds=None):
    return forward(model, series, bounds).log_likelihood


@dataclass(frozen=True, eq=False)
class PosteriorStats:
    """Expected sufficient statistics under the posterior over segmentations.

    ``span[t, j, d-1]`` is the posterior probability that state ``j``
    occupied exactly the samples ``t-d+1 .. t`` (1-based, t = 1..T is
    stored at row t; row 0 is zero).
    """

    init: np.ndarray
    trans: np.ndarray
    dur: tuple
    span: np.ndarray
    occupancy: np.ndarray


def posteriors(model, series, lat=None):
    """Segment-span posteriors and the counts every reestimate needs."""
    if lat is None:
        lat = forward_backward(model, series)
    T, N = len(series), model.n_states
    if lat.enter is None or lat.bstart is None:
        raise DomainError("posteriors need a lattice with both forward and backward tables")
    if lat.T != T or lat.log_alpha.shape != (T, N):
        raise DomainError("lattice was computed for a different series or model")
    inp = lat.inputs
    ll = lat.log_likelihood
    D = inp.log_dur.shape[1]
    beta = np.vstack([np.full((1, N), -np.inf), lat.log_beta])

    log_span = np.full((T + 1, N, D), -np.inf)
    for d in range(1, min(D, T) + 1):
        log_span[d:, :, d - 1] = (lat.enter[:T + 1 - d] + inp.log_dur[:, d - 1]
                                  + inp.seg[d:, :, d - 1] + beta[d:] - ll)
    span = np.exp(log_span)

    init = np.exp(inp.log_pi + lat.bstart[0] - ll)
    if T > 1:
        x = lat.log_alpha[:T - 1][:, :, None] + inp.log_A[None] + lat.bstart[1:T][:, None, :] - ll
        trans = np.exp(x).sum(axis=0)
    else:
        trans = np.zeros((N, N))

    counts = span.sum(axis=0)
    dur = tuple(DurationStats(counts[j]) for j in range(N))

    diff = np.zeros((T + 1, N))
    for d in range(1, min(D, T) + 1):
        w = span[d:, :, d - 1]
        diff[:T + 1 - d] += w
        diff[d:] -= w
    occupancy = np.cumsum(diff, axis=0)[:T]
    return PosteriorStats(init, trans, dur, span, occupancy)


@dataclass(frozen=True)
class Segment:
    """One visit: 0-based state index, 0-based start sample, duration."""

    state: int
    start: int
    duration: int


@dataclass(frozen=True)
class Segmentation:
    segments: tuple
    log_joint: float

    @property
    def length(self):
        return sum(s.duration for s in self.segments)

    def boundaries(self):
        """Start sample of every segment after the first."""
        return [s.start for s in self.segments[1:]]

    def to_list(self):
        """JSON-ready list with 1-based state and start."""
        return [{"state": s.state + 1, "start": s.start + 1, "duration": s.duration}
                for s in self.segments]

    @classmethod
    def from_list(cls, items, log_joint=float("nan")):
        return cls(tuple(Segment(int(i["state"]) - 1, int(i["start"]) - 1, int(i["duration"]))
                         for i in items), log_joint)


def _tie_threshold(m):
    return m - _TIE_RTOL * np.maximum(1.0, np.abs(np.where(np.isfinite(m), m, 0.0)))


def viterbi(model, series, bounds=None):
    """Most probable segmentation.

    Ties (within a relative 1e-12) are broken toward the earliest segment
    boundary, then the lowest state index, scanning from the start of the
    series. The max-product recursion runs over suffixes so the decoding
    pass can apply that order left to right.
    """
    inp = _prepare(model, series.values, bounds)
    T = len(series)
    N, D = inp.log_dur.shape
    dur_t = inp.log_dur.T
    # best[t, m]: best score of samples t+1..T given a segment of m starts at t
    # tail[t, k]: best score of samples t+1..T given a segment of k ends at t
    best = np.full((T + 1, N), -np.inf)
    tail = np.full((T + 1, N), -np.inf)
    tail[T] = 0.0
    idx = np.arange(D)
    for t in range(T - 1, -1, -1):
        k = min(D, T - t)
        ends = t + 1 + idx[:k]
        cand = dur_t[:k] + inp.seg[ends, :, idx[:k]] + tail[ends]
        best[t] = cand.max(axis=0)
        if t > 0:
            tail[t] = (inp.log_A + best[t][None, :]).max(axis=1)
    lead = inp.log_pi
    top = float((lead + best[0]).max())
    _check_feasible(top)
    segments = []
    log_joint = 0.0
    s, prev = 0, None
    while s < T:
        k = min(D, T - s)
        ends = s + 1 + idx[:k]
        lead = inp.log_pi if prev is None else inp.log_A[prev]
        cand = lead[None, :] + dur_t[:k] + inp.seg[ends, :, idx[:k]] + tail[ends]
        ok = cand >= _tie_threshold(cand.max())
        d0, m = np.unravel_index(int(np.argmax(ok)), ok.shape)
        d = int(d0) + 1
        log_joint += float(lead[m] + dur_t[d0, m] + inp.seg[s + d, m, d0])
        segments.append(Segment(int(m), s, d))
        s, prev = s + d, int(m)
    return Segmentation(tuple(segments), log_joint)


def path_log_joint(model, series, segmentation):
    """ln of the joint density of the series and one explicit segmentation."""
    values = series.values
    total = 0.0
    prev = None
    for seg in segmentation.segments:
        j = seg.state
        if prev is None:
            total += _safe_log(model.pi[j])
        else:
            total += _safe_log(model.trans[prev, j])
        total += model.durations[j].log_pmf(seg.duration)
        total += segment_log_likelihood(model.emissions[j], model.basis,
                                        values[seg.start:seg.start + seg.duration], seg.duration)
        prev = j
    return total


def _safe_log(x):
    return math.log(x) if x > 0 else -math.inf


# ---------------------------------------------------------------------------
# exhaustive enumeration (reference oracle)
# ---------------------------------------------------------------------------

BRUTE_FORCE_MAX_STATES = 4
BRUTE_FORCE_MAX_LENGTH = 12


def enumerate_segmentations(model, series):
    """Yield every segmentation with nonzero probability and its log joint density.

    Sums the likelihood term by term from the raw definition, independent of
    the recursions above. Refuses problems beyond 4 states or 12 samples.
    """
    N, T = model.n_states, len(series)
    if N > BRUTE_FORCE_MAX_STATES or T > BRUTE_FORCE_MAX_LENGTH:
        raise DomainError(f"brute force limited to N <= {BRUTE_FORCE_MAX_STATES}, "
                          f"T <= {BRUTE_FORCE_MAX_LENGTH}")
    values = series.values
    cache = {}

    def seg_ll(j, s, d):
        key = (j, s, d)
        if key not in cache:
            cache[key] = segment_log_likelihood(model.emissions[j], model.basis, values[s:s + d], d)
        return cache[key]

    def rec(s, prev, acc, path):
        for j in range(N):
            if prev is None:
                lt = _safe_log(model.pi[j])
            elif j == prev:
                continue
            else:
                lt = _safe_log(model.trans[prev, j])
            if lt == -math.inf:
                continue
            for d in range(1, T - s + 1):
                lp = model.durations[j].log_pmf(d)
                if lp == -math.inf:
                    continue
                score = acc + lt + lp + seg_ll(j, s, d)
                step = path + (Segment(j, s, d),)
                if s + d == T:
                    yield Segmentation(step, score)
                else:
                    yield from rec(s + d, j, score, step)

    yield from rec(0, None, 0.0, ())


def brute_force_loglik(model, series):
    """Log-likelihood by summing over every state and duration sequence."""
    scores = [p.log_joint for p in enumerate_segmentations(model, series)]
    if not scores:
        return -math.inf
    m = max(scores)
    if m == -math.inf:
        return -math.inf
    return m + math.log(math.fsum(math.exp(x - m) for x in scores))
