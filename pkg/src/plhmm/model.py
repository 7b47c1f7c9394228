"""Model parameters, the regression basis, and Gaussian emission densities.

A model is a left-to-right (or general) chain of states. Each state emits a
segment whose samples are Gaussian around ``w . phi(k, d)``, where ``phi`` is
evaluated at segment-local time: sample ``k`` of a segment of duration ``d``.
"""
from dataclasses import dataclass, field
from functools import lru_cache
import math

import numpy as np

from .durations import DiscreteDuration, GammaDuration
from .errors import DomainError

HERMITE = "hermite-orthonormal"
MONOMIAL = "monomial"
SEGMENT_NORMALIZED = "segment-normalized"
SEGMENT_OFFSET = "segment-offset"

DEFAULT_SAMPLING_PERIOD = 1.0 / 360.0
_LOG_2PI = math.log(2.0 * math.pi)
_STOCHASTIC_TOL = 1e-12


def _readonly(arr, dtype=float):
    arr = np.array(arr, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class BasisConfig:
    family: str = HERMITE
    max_order: int = 6
    scale: float = 3.0
    time_convention: str = SEGMENT_NORMALIZED

    def __post_init__(self):
        if self.family not in (HERMITE, MONOMIAL):
            raise DomainError(f"unknown basis family {self.family!r}")
        if self.time_convention not in (SEGMENT_NORMALIZED, SEGMENT_OFFSET):
            raise DomainError(f"unknown time convention {self.time_convention!r}")
        if int(self.max_order) != self.max_order or self.max_order < 0:
            raise DomainError("max_order must be a nonnegative integer")
        if not (self.scale > 0 and math.isfinite(self.scale)):
            raise DomainError("basis scale must be positive")
        object.__setattr__(self, "max_order", int(self.max_order))
        object.__setattr__(self, "scale", float(self.scale))


@dataclass(frozen=True, eq=False)
class EmissionParams:
    """Regression weights and noise precision of one state."""

    weights: np.ndarray
    precision: float

    def __post_init__(self):
        object.__setattr__(self, "weights", _readonly(self.weights))
        object.__setattr__(self, "precision", float(self.precision))
        if self.weights.ndim != 1 or self.weights.size < 1:
            raise DomainError("weights must be a nonempty vector")

    @property
    def order(self):
        return self.weights.size - 1

    def problems(self):
        out = []
        if not np.all(np.isfinite(self.weights)):
            out.append("weights not finite")
        if not (self.precision > 0 and math.isfinite(self.precision)):
            out.append(f"precision {self.precision!r} not positive and finite")
        return out

    def __eq__(self, other):
        return (isinstance(other, EmissionParams) and self.precision == other.precision
                and np.array_equal(self.weights, other.weights))

    __hash__ = None


@dataclass(frozen=True, eq=False)
class Series:
    values: np.ndarray
    sampling_period: float = DEFAULT_SAMPLING_PERIOD

    def __post_init__(self):
        values = _readonly(self.values)
        if values.ndim != 1 or values.size < 1:
            raise DomainError("a series needs at least one sample")
        if not np.all(np.isfinite(values)):
            raise DomainError("series values must be finite")
        if not (self.sampling_period > 0 and math.isfinite(self.sampling_period)):
            raise DomainError("sampling period must be positive")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "sampling_period", float(self.sampling_period))

    def __len__(self):
        return self.values.size

    def window(self, start, width):
        return Series(self.values[start:start + width], self.sampling_period)


@dataclass(frozen=True, eq=False)
class Model:
    """Parameter bundle: initial distribution, transitions, durations, emissions.

    Construction only checks shapes. Use :func:`validate` for the
    probabilistic invariants; a row of ``topology_mask`` with no allowed
    successor marks that state as absorbing.
    """

    pi: np.ndarray
    trans: np.ndarray
    topology_mask: np.ndarray
    durations: tuple
    emissions: tuple
    basis: BasisConfig = field(default_factory=BasisConfig)
    sampling_period: float = DEFAULT_SAMPLING_PERIOD

    def __post_init__(self):
        pi = _readonly(self.pi)
        trans = _readonly(self.trans)
        mask = _readonly(self.topology_mask, dtype=bool)
        n = pi.size
        if pi.ndim != 1 or n < 1:
            raise DomainError("pi must be a nonempty vector")
        if trans.shape != (n, n) or mask.shape != (n, n):
            raise DomainError(f"trans and topology_mask must be {n}x{n}")
        durations = tuple(self.durations)
        emissions = tuple(self.emissions)
        if len(durations) != n or len(emissions) != n:
            raise DomainError("need one duration model and one emission per state")
        for d in durations:
            if not isinstance(d, (DiscreteDuration, GammaDuration)):
                raise DomainError(f"unsupported duration model {type(d).__name__}")
        object.__setattr__(self, "pi", pi)
        object.__setattr__(self, "trans", trans)
        object.__setattr__(self, "topology_mask", mask)
        object.__setattr__(self, "durations", durations)
        object.__setattr__(self, "emissions", emissions)
        object.__setattr__(self, "sampling_period", float(self.sampling_period))

    @property
    def n_states(self):
        return self.pi.size

    @property
    def absorbing(self):
        return ~self.topology_mask.any(axis=1)

    @property
    def orders(self):
        return tuple(e.order for e in self.emissions)

    def replace(self, **changes):
        fields = dict(pi=self.pi, trans=self.trans, topology_mask=self.topology_mask,
                      durations=self.durations, emissions=self.emissions,
                      basis=self.basis, sampling_period=self.sampling_period)
        fields.update(changes)
        return Model(**fields)

    def __eq__(self, other):
        return (isinstance(other, Model)
                and np.array_equal(self.pi, other.pi)
                and np.array_equal(self.trans, other.trans)
                and np.array_equal(self.topology_mask, other.topology_mask)
                and self.durations == other.durations
                and self.emissions == other.emissions
                and self.basis == other.basis
                and self.sampling_period == other.sampling_period)

    __hash__ = None


def left_to_right_mask(n):
    mask = np.zeros((n, n), dtype=bool)
    idx = np.arange(n - 1)
    mask[idx, idx + 1] = True
    return mask


def left_to_right(durations, emissions, basis=None, sampling_period=DEFAULT_SAMPLING_PERIOD):
    """Model starting in state 1 and stepping deterministically to the next state."""
    n = len(durations)
    mask = left_to_right_mask(n)
    pi = np.zeros(n)
    pi[0] = 1.0
    return Model(pi, mask.astype(float), mask, durations, emissions,
                 basis or BasisConfig(max_order=max(e.order for e in emissions)),
                 sampling_period)


# ---------------------------------------------------------------------------
# basis and emissions
# ---------------------------------------------------------------------------

def _hermite_functions(x, order):
    """Orthonormal Hermite functions psi_0..psi_order at points x, shape (len(x), order+1)."""
    x = np.asarray(x, dtype=float)
    out = np.empty((x.size, order + 1))
    out[:, 0] = math.pi ** -0.25 * np.exp(-0.5 * x * x)
    if order >= 1:
        out[:, 1] = math.sqrt(2.0) * x * out[:, 0]
    for n in range(1, order):
        out[:, n + 1] = (math.sqrt(2.0 / (n + 1)) * x * out[:, n]
                         - math.sqrt(n / (n + 1)) * out[:, n - 1])
    return out


def _basis_arguments(basis, k, d):
    k = np.asarray(k, dtype=float)
    if basis.time_convention == SEGMENT_NORMALIZED:
        u = np.zeros_like(k) if d == 1 else -1.0 + 2.0 * k / (d - 1)
    else:
        u = k
    return basis.scale * u


def _basis_matrix(basis, order, k, d):
    x = _basis_arguments(basis, k, d)
    if basis.family == HERMITE:
        phi = _hermite_functions(x, order)
    else:
        phi = np.power.outer(x, np.arange(order + 1, dtype=float))
    phi[:, 0] = 1.0
    return phi


def basis_eval(basis, order, k, d):
    """Basis vector (phi_0, ..., phi_order) for sample ``k`` of a duration-``d`` segment."""
    if int(d) != d or d < 1:
        raise DomainError(f"segment duration must be a positive integer, got {d!r}")
    if int(k) != k or not 0 <= k < d:
        raise DomainError(f"sample offset {k!r} outside [0, {d})")
    if order < 0:
        raise DomainError("basis order must be nonnegative")
    return _basis_matrix(basis, order, [k], d)[0]


@lru_cache(maxsize=4096)
def design_matrix(basis, order, d):
    """Rows ``basis_eval(basis, order, k, d)`` for k = 0..d-1 (read-only, cached)."""
    if d < 1:
        raise DomainError("segment duration must be >= 1")
    phi = _basis_matrix(basis, order, np.arange(d), d)
    phi.setflags(write=False)
    return phi


def emission_log_density(em, phi, v):
    """ln N(v | w . phi, 1/precision)."""
    phi = np.asarray(phi, dtype=float)
    if phi.shape != em.weights.shape:
        raise DomainError("basis vector length does not match the emission order")
    if not math.isfinite(v) or not np.all(np.isfinite(phi)) or em.problems():
        raise DomainError("emission density needs finite inputs")
    r = v - float(np.dot(em.weights, phi))
    return 0.5 * (math.log(em.precision) - _LOG_2PI) - 0.5 * em.precision * r * r


def segment_log_likelihood(em, basis, samples, d):
    """Sum of emission log densities over one segment of duration ``d``."""
    samples = np.asarray(samples, dtype=float)
    if samples.shape != (d,):
        raise DomainError(f"expected {d} samples, got {samples.size}")
    phi = design_matrix(basis, em.order, d)
    r = samples - phi @ em.weights
    return d * 0.5 * (math.log(em.precision) - _LOG_2PI) - 0.5 * em.precision * float(np.dot(r, r))


def template(em, basis, d):
    """Noise-free segment mean ``Phi_d w`` for duration ``d``."""
    return design_matrix(basis, em.order, d) @ em.weights


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Violation:
    kind: str
    message: str


@dataclass
class ValidationReport:
    violations: list

    @property
    def ok(self):
        return not self.violations

    def kinds(self):
        return {v.kind for v in self.violations}

    def __str__(self):
        if self.ok:
            return "ok"
        return "; ".join(v.message for v in self.violations)


def validate(model):
    """Check every model invariant; indices in messages are 1-based."""
    out = []
    pi, A, mask = model.pi, model.trans, model.topology_mask
    if not np.all(np.isfinite(pi)) or np.any(pi < 0):
        out.append(Violation("pi-negative", "initial distribution has negative or non-finite entries"))
    elif abs(pi.sum() - 1.0) > _STOCHASTIC_TOL:
        out.append(Violation("pi-sum", f"initial distribution sums to {float(pi.sum())!r}"))
    for i in range(model.n_states):
        if A[i, i] != 0:
            out.append(Violation("self-transition", f"self-transition nonzero at state {i + 1}"))
    off = ~np.eye(model.n_states, dtype=bool)
    bad = np.argwhere(~mask & off & (A != 0))
    for i, j in bad:
        out.append(Violation("masked-transition",
                             f"transition {i + 1}->{j + 1} nonzero but not allowed by topology"))
    if not np.all(np.isfinite(A)) or np.any(A < 0):
        out.append(Violation("trans-negative", "transition matrix has negative or non-finite entries"))
    else:
        # mass leaving an absorbing row is always masked, so only live rows are summed here
        absorbing = model.absorbing
        for i in range(model.n_states):
            s = float(A[i].sum())
            if not absorbing[i] and abs(s - 1.0) > _STOCHASTIC_TOL:
                out.append(Violation("row-sum", f"transition row {i + 1} sums to {s!r}"))
    for i, em in enumerate(model.emissions):
        for p in em.problems():
            out.append(Violation("emission", f"state {i + 1}: {p}"))
        if em.order > model.basis.max_order:
            out.append(Violation("emission",
                                 f"state {i + 1}: order {em.order} exceeds basis max_order {model.basis.max_order}"))
    return ValidationReport(out)


def require_valid(model):
    report = validate(model)
    if not report.ok:
        raise DomainError(f"invalid model: {report}")
