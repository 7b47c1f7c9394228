"""Training-time benchmark laid out like a per-recording timing table.

Each series is trained three ways: unbounded discrete durations, discrete
durations constrained to per-state intervals, and Gamma durations
initialized from the interval midpoints.
"""
from dataclasses import dataclass
import csv
import math
import time

from .errors import PLHMMError
from .training import DISCRETE, GAMMA, ECG_ORDERS, TrainConfig, fit

MODES = ("discrete", "discrete-bounded", "gamma")
MODE_ITERS = {"discrete": 4, "discrete-bounded": 4, "gamma": 10}
TABLE_COLUMNS = ("Recording", "Discrete", "Discrete [dmin,dmax]", "Gamma")


@dataclass
class BenchRow:
    series: str
    mode: str
    iterations: int
    wall_ms: float
    final_loglik: float
    error: str = ""


def format_hms(ms):
    """Milliseconds as ``H:MM:SS.mmm``."""
    total = int(round(ms))
    h, rem = divmod(total, 3_600_000)
    m, rem = divmod(rem, 60_000)
    s, milli = divmod(rem, 1000)
    return f"{h}:{m:02d}:{s:02d}.{milli:03d}"


def default_bounds(T, n_states):
    """Intervals of +-25% around an equal split of the series."""
    L = T // n_states
    lengths = [L] * (n_states - 1) + [T - L * (n_states - 1)]
    return ([max(1, math.floor(0.75 * x)) for x in lengths],
            [min(T, math.ceil(1.25 * x)) for x in lengths])


def mode_config(mode, n_states, orders, d_min, d_max, seed=0, iterations=None):
    iters = iterations or MODE_ITERS[mode]
    common = dict(n_states=n_states, orders=orders, max_iters=iters, loglik_tol=0.0, seed=seed)
    if mode == "discrete":
        return TrainConfig(duration=DISCRETE, **common)
    if mode == "discrete-bounded":
        return TrainConfig(duration=DISCRETE, d_min=d_min, d_max=d_max, **common)
    return TrainConfig(duration=GAMMA, d_min=d_min, d_max=d_max, **common)


class BenchReport:
    def __init__(self, rows):
        self.rows = list(rows)

    def cell(self, series, mode):
        for r in self.rows:
            if r.series == series and r.mode == mode:
                return r
        raise KeyError((series, mode))

    def series_names(self):
        seen = []
        for r in self.rows:
            if r.series not in seen:
                seen.append(r.series)
        return seen

    def table(self):
        """Rows of (recording, discrete, bounded, gamma) wall times as H:MM:SS.mmm."""
        out = [TABLE_COLUMNS]
        for name in self.series_names():
            cells = []
            for mode in MODES:
                try:
                    r = self.cell(name, mode)
                except KeyError:
                    cells.append("-")
                    continue
                cells.append("failed" if r.error else format_hms(r.wall_ms))
            out.append((name, *cells))
        return out

    def format_table(self):
        rows = self.table()
        widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
        lines = ["  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in rows]
        lines.insert(1, "-" * len(lines[0]))
        return "\n".join(lines)

    def write_csv(self, fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["series", "mode", "iterations", "wall_ms", "wall_time", "final_loglik", "error"])
        for r in self.rows:
            w.writerow([r.series, r.mode, r.iterations, f"{r.wall_ms:.3f}", format_hms(r.wall_ms),
                        repr(r.final_loglik), r.error])

    def save(self, path):
        with open(path, "w", encoding="utf-8", newline="") as fh:
            self.write_csv(fh)


def bench(inputs, n_states=7, orders=ECG_ORDERS, d_min=None, d_max=None, seed=0,
          modes=MODES):
    """Time ``fit`` for every (series, mode) cell.

    Parameters
    ----------
    inputs : list of (name, Series)
    d_min, d_max : sequences of int, optional
        Per-state intervals for the bounded and Gamma cells; defaults to
        +-25% around an equal split of each series.

    Failures are recorded in the row's ``error`` field and the run continues.
    """
    rows = []
    for name, series in inputs:
        lo, hi = (d_min, d_max) if d_min is not None else default_bounds(len(series), n_states)
        for mode in modes:
            cfg = mode_config(mode, n_states, orders, lo, hi, seed)
            t0 = time.perf_counter()
            try:
                _, trace = fit(series, cfg)
            except PLHMMError as err:
                ms = (time.perf_counter() - t0) * 1000.0
                rows.append(BenchRow(name, mode, 0, ms, float("nan"), str(err)))
                continue
            ms = (time.perf_counter() - t0) * 1000.0
            rows.append(BenchRow(name, mode, trace.iterations, ms, trace.logliks[-1]))
    return BenchReport(rows)
