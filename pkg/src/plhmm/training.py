"""One-shot maximum-likelihood training from a single exemplar.

``fit`` initializes a left-to-right model by cutting the exemplar into
contiguous pieces and then runs reestimation steps. In ``soft`` mode every
update is weighted by the segment-span posteriors; in ``viterbi`` mode the
updates use the single best segmentation.
"""
from dataclasses import dataclass, field
import logging
import math
import time

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .durations import (DiscreteDuration, DurationStats, GammaDuration,
                         reestimate_discrete, reestimate_gamma)
from .errors import DomainError, EstimationError
from .lattice import forward, forward_backward, log_likelihood, posteriors, viterbi
from .model import (HERMITE, SEGMENT_NORMALIZED, BasisConfig, EmissionParams,
                    design_matrix, left_to_right)

log = logging.getLogger(__name__)

DISCRETE = "discrete"
GAMMA = "gamma"
SOFT = "soft"
VITERBI = "viterbi"

ECG_ORDERS = (3, 5, 1, 6, 1, 5, 3)
DEFAULT_ITERS = {DISCRETE: 4, GAMMA: 10}

PRECISION_FLOOR = 1e-8
PRECISION_CEIL = 1e12
VITERBI_SMOOTHING = 1e-3
_RIDGE = 1e-8


@dataclass(frozen=True)
class TrainConfig:
    n_states: int = 7
    orders: tuple = ECG_ORDERS
    duration: str = DISCRETE
    d_min: tuple = None
    d_max: tuple = None
    mode: str = SOFT
    max_iters: int = None
    loglik_tol: float = 1e-6
    seed: int = 0
    basis_family: str = HERMITE
    scale: float = 3.0
    time_convention: str = SEGMENT_NORMALIZED
    gamma_coupled: bool = False

    def __post_init__(self):
        object.__setattr__(self, "orders", tuple(int(o) for o in self.orders))
        if self.n_states < 1:
            raise DomainError("n_states must be >= 1")
        if len(self.orders) != self.n_states:
            raise DomainError(f"need {self.n_states} basis orders, got {len(self.orders)}")
        if any(o < 0 for o in self.orders):
            raise DomainError("basis orders must be nonnegative")
        if self.duration not in (DISCRETE, GAMMA):
            raise DomainError(f"unknown duration family {self.duration!r}")
        if self.mode not in (SOFT, VITERBI):
            raise DomainError(f"unknown training mode {self.mode!r}")
        if self.max_iters is not None and self.max_iters < 1:
            raise DomainError("max_iters must be >= 1")
        if (self.d_min is None) != (self.d_max is None):
            raise DomainError("give both d_min and d_max or neither")
        if self.d_min is not None:
            object.__setattr__(self, "d_min", tuple(int(d) for d in self.d_min))
            object.__setattr__(self, "d_max", tuple(int(d) for d in self.d_max))
            if len(self.d_min) != self.n_states or len(self.d_max) != self.n_states:
                raise DomainError("duration bounds need one entry per state")
            for lo, hi in self.bounds:
                if lo < 1 or hi < lo:
                    raise DomainError(f"bad duration bounds [{lo}, {hi}]")

    @property
    def bounds(self):
        if self.d_min is None:
            return None
        return list(zip(self.d_min, self.d_max))

    @property
    def iterations(self):
        return self.max_iters if self.max_iters is not None else DEFAULT_ITERS[self.duration]

    def basis(self):
        return BasisConfig(self.basis_family, max(self.orders), self.scale, self.time_convention)


@dataclass
class FitTrace:
    """``logliks[k]`` is the log-likelihood after k reestimation steps."""

    logliks: list = field(default_factory=list)
    millis: list = field(default_factory=list)
    converged: bool = False

    @property
    def iterations(self):
        return len(self.millis)

    def rows(self):
        yield 0, self.logliks[0], 0.0
        for k, ms in enumerate(self.millis, start=1):
            yield k, self.logliks[k], ms


# ---------------------------------------------------------------------------
# regression
# ---------------------------------------------------------------------------

def _solve_normal(G, r, state=None):
    p = G.shape[0]
    singular = False
    try:
        np.linalg.cholesky(G)
        singular = np.linalg.cond(G) * np.finfo(float).eps >= 1.0
    except np.linalg.LinAlgError:
        singular = True
    if singular:
        tr = np.trace(G)
        if not tr > 0:
            raise EstimationError("design matrix is identically zero", state)
        G = G + (_RIDGE * tr / p) * np.eye(p)
        try:
            np.linalg.cholesky(G)
        except np.linalg.LinAlgError:
            raise EstimationError("design matrix rank-deficient beyond ridge rescue", state) from None
    w = np.linalg.solve(G, r)
    if not np.all(np.isfinite(w)):
        raise EstimationError("regression produced non-finite weights", state)
    return w


def _precision(n, sse):
    if sse <= 0:
        return PRECISION_CEIL
    return float(np.clip(n / sse, PRECISION_FLOOR, PRECISION_CEIL))


def weighted_least_squares(spans, basis, order, state=None):
    """Fit one state's regression over weighted segments.

    Parameters
    ----------
    spans : iterable of (samples, duration, weight)
        Each span contributes its own design matrix ``Phi_d``.
    basis : BasisConfig
    order : int
    state : int, optional
        Used only to label errors.

    Returns
    -------
    (ndarray, float)
        Weights minimizing ``sum weight * ||v - Phi_d w||^2`` and the
        precision ``sum weight * d / sum weight * ||residual||^2``.
    """
    spans = [(np.asarray(v, dtype=float), int(d), float(w)) for v, d, w in spans]
    p = order + 1
    G = np.zeros((p, p))
    r = np.zeros(p)
    n = 0.0
    for v, d, w in spans:
        if v.shape != (d,):
            raise DomainError(f"span has {v.size} samples but duration {d}")
        if w < 0:
            raise DomainError("span weights must be nonnegative")
        phi = design_matrix(basis, order, d)
        G += w * (phi.T @ phi)
        r += w * (phi.T @ v)
        n += w * d
    if not n > p:
        raise EstimationError(f"{n:g} weighted samples cannot fit {p} coefficients", state)
    weights = _solve_normal(G, r, state)
    sse = 0.0
    for v, d, w in spans:
        res = v - design_matrix(basis, order, d) @ weights
        sse += w * float(np.dot(res, res))
    return weights, _precision(n, sse)


def _soft_regression(values, span_j, lo, hi, basis, order, state):
    # span_j[t, d-1]: posterior that the state covered the d samples ending at t
    p = order + 1
    G = np.zeros((p, p))
    r = np.zeros(p)
    n = 0.0
    blocks = []
    for d in range(lo, hi + 1):
        w = span_j[d:, d - 1]
        tw = w.sum()
        if not tw > 0:
            continue
        windows = sliding_window_view(values, d)
        phi = design_matrix(basis, order, d)
        G += tw * (phi.T @ phi)
        r += phi.T @ (w @ windows)
        n += tw * d
        blocks.append((w, windows, phi))
    if not n > p:
        raise EstimationError(f"{n:g} expected samples cannot fit {p} coefficients", state)
    weights = _solve_normal(G, r, state)
    sse = 0.0
    for w, windows, phi in blocks:
        res = windows - phi @ weights
        sse += float(w @ np.einsum("ij,ij->i", res, res))
    return weights, _precision(n, sse)


# ---------------------------------------------------------------------------
# durations
# ---------------------------------------------------------------------------

def expected_log_pmf(dur, stats):
    """sum_d counts(d) * ln p(d): the duration part of the EM auxiliary function."""
    counts = stats.counts
    nz = counts > 0
    if not nz.any():
        return 0.0
    table = dur.log_pmf_table(counts.size)
    return float(np.dot(counts[nz], table[nz]))


def _gamma_step(stats, old, coupled):
    # take the closed-form update only when it does not lower the duration term
    base = expected_log_pmf(old, stats)
    for variant in (coupled, not coupled):
        cand = reestimate_gamma(stats, old, coupled=variant)
        if expected_log_pmf(cand, stats) >= base:
            return cand
    log.debug("gamma update rejected; keeping shape=%g rate=%g", old.shape, old.rate)
    return old


def _smoothed_discrete(counts_by_d, support, eps=VITERBI_SMOOTHING):
    lo, hi = support
    pmf = np.full(hi - lo + 1, eps)
    for d, c in counts_by_d.items():
        pmf[d - lo] += c
    return DiscreteDuration(lo, hi, pmf / pmf.sum())


# ---------------------------------------------------------------------------
# initialization and steps
# ---------------------------------------------------------------------------

def _initial_ends(T, N, bounds):
    if bounds is None:
        L = T // N
        return [L * (j + 1) for j in range(N - 1)] + [T]
    mids = np.cumsum([(lo + hi) / 2.0 for lo, hi in bounds])
    ends = [int(round(x)) for x in mids * (T / mids[-1])]
    ends[-1] = T
    for j in range(N - 1):
        ends[j] = min(max(ends[j], (ends[j - 1] if j else 0) + 1), T - (N - 1 - j))
    return ends


def _unbounded_window(length, T):
    return max(1, int(math.floor(0.75 * length))), min(T, int(math.ceil(1.25 * length)))


def initialize(series, cfg):
    """Left-to-right starting model cut from the exemplar."""
    T, N = len(series), cfg.n_states
    if T < N:
        raise DomainError(f"series of length {T} cannot hold {N} states")
    bounds = cfg.bounds
    if bounds is not None:
        for j, (lo, hi) in enumerate(bounds):
            if hi > T:
                raise DomainError(f"state {j + 1}: d_max {hi} exceeds series length {T}")
    basis = cfg.basis()
    values = series.values
    ends = _initial_ends(T, N, bounds)
    starts = [0] + ends[:-1]
    emissions, durations = [], []
    for j, (s, e) in enumerate(zip(starts, ends)):
        w, prec = weighted_least_squares([(values[s:e], e - s, 1.0)], basis, cfg.orders[j], state=j)
        emissions.append(EmissionParams(w, prec))
        window = bounds[j] if bounds is not None else _unbounded_window(e - s, T)
        if cfg.duration == GAMMA:
            lo, hi = window
            mean = (lo + hi) / 2.0
            sd = max(1.0, (hi - lo) / 4.0)
            shape = (mean / sd) ** 2
            durations.append(GammaDuration(shape, shape / mean, T))
        elif bounds is not None:
            durations.append(DiscreteDuration.uniform(*window))
        elif N == 1:
            durations.append(DiscreteDuration.point(T))
        else:
            lo, hi = window
            pmf = np.zeros(T)
            pmf[lo - 1:hi] = 1.0 / (hi - lo + 1)
            durations.append(DiscreteDuration(1, T, pmf))
    return left_to_right(durations, emissions, basis, series.sampling_period)


def _renormalized_rows(counts, old, mask):
    counts = np.where(mask, counts, 0.0)
    np.fill_diagonal(counts, 0.0)
    totals = counts.sum(axis=1)
    new = old.copy()
    used = totals > 0
    new[used] = counts[used] / totals[used, None]
    return new


def _soft_step(model, series, cfg):
    lat = forward_backward(model, series)
    post = posteriors(model, series, lat)
    values = series.values
    pi = post.init / post.init.sum()
    trans = _renormalized_rows(post.trans, model.trans, model.topology_mask)
    durations, emissions = [], []
    for j, (dur, em) in enumerate(zip(model.durations, model.emissions)):
        stats = post.dur[j]
        if not stats.total_mass > 0:
            raise EstimationError("state receives zero posterior mass", j)
        if isinstance(dur, GammaDuration):
            durations.append(_gamma_step(stats, dur, cfg.gamma_coupled))
        else:
            try:
                durations.append(reestimate_discrete(stats, dur.support()))
            except EstimationError as err:
                raise EstimationError(str(err), j) from None
        lo, hi = lat.duration_bounds[j]
        w, prec = _soft_regression(values, post.span[:, j, :], lo, hi, model.basis, em.order, j)
        emissions.append(EmissionParams(w, prec))
    new = model.replace(pi=pi, trans=trans, durations=durations, emissions=emissions)
    return new, lat.log_likelihood


def _viterbi_step(model, series, cfg):
    ll = forward(model, series).log_likelihood
    path = viterbi(model, series)
    values = series.values
    N = model.n_states
    pi = np.zeros(N)
    pi[path.segments[0].state] = 1.0
    counts = np.zeros((N, N))
    for a, b in zip(path.segments, path.segments[1:]):
        counts[a.state, b.state] += 1.0
    trans = _renormalized_rows(counts, model.trans, model.topology_mask)
    durations, emissions = list(model.durations), list(model.emissions)
    for j in range(N):
        visits = [s for s in path.segments if s.state == j]
        if not visits:
            continue
        hist = {}
        for s in visits:
            hist[s.duration] = hist.get(s.duration, 0.0) + 1.0
        dur = model.durations[j]
        if isinstance(dur, GammaDuration):
            durations[j] = _gamma_step(DurationStats.from_mapping(hist), dur, cfg.gamma_coupled)
        else:
            durations[j] = _smoothed_discrete(hist, dur.support())
        spans = [(values[s.start:s.start + s.duration], s.duration, 1.0) for s in visits]
        w, prec = weighted_least_squares(spans, model.basis, model.emissions[j].order, state=j)
        emissions[j] = EmissionParams(w, prec)
    new = model.replace(pi=pi, trans=trans, durations=durations, emissions=emissions)
    return new, ll


def em_step(model, series, cfg):
    """One reestimation step; returns the new model and the log-likelihood before it."""
    if cfg.mode == VITERBI:
        return _viterbi_step(model, series, cfg)
    return _soft_step(model, series, cfg)


def fit(series, cfg):
    """Initialize from the exemplar and iterate :func:`em_step`.

    Stops after ``cfg.iterations`` steps or once the log-likelihood moves
    by less than ``cfg.loglik_tol``.
    """
    model = initialize(series, cfg)
    trace = FitTrace()
    for it in range(cfg.iterations):
        t0 = time.perf_counter()
        model_next, ll = em_step(model, series, cfg)
        trace.millis.append((time.perf_counter() - t0) * 1000.0)
        trace.logliks.append(ll)
        log.info("iteration %d: loglik %.6f", it + 1, ll)
        model = model_next
        if len(trace.logliks) > 1 and abs(trace.logliks[-1] - trace.logliks[-2]) < cfg.loglik_tol:
            trace.converged = True
            break
    trace.logliks.append(log_likelihood(model, series))
    if abs(trace.logliks[-1] - trace.logliks[-2]) < cfg.loglik_tol:
        trace.converged = True
    return model, trace
