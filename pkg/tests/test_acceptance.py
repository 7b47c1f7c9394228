"""Acceptance criteria, one test each; every test records a PASS/FAIL line.

Run ``pytest tests/test_acceptance.py`` (the lines are printed in the
terminal summary) or ``python3 tests/test_acceptance.py``.
"""
import math
import subprocess
import sys
import time

import numpy as np
import pytest
from scipy import special as sp

import beats
from conftest import random_model, three_state_model
from plhmm import (BasisConfig, DiscreteDuration, EmissionParams, GammaDuration, Series, TrainConfig,
                   brute_force_loglik, em_step, fit, forward_backward, gamma_pmf, invert_digamma,
                   left_to_right, sample, score_windows, weighted_least_squares)
from plhmm import io
from plhmm.bench import TABLE_COLUMNS, bench

RESULTS = []


def record(number, name, ok, detail):
    line = f"criterion {number:2d} [{'PASS' if ok else 'FAIL'}] {name}: {detail}"
    RESULTS.append(line)
    print(line)
    return ok


def _oracle_instances(n_per_family=120, seed=7):
    rng = np.random.default_rng(seed)
    out = []
    for family in ("discrete", "gamma"):
        made = 0
        while made < n_per_family:
            n = 1 + made % 3
            T = int(rng.integers(1, 9))
            model = random_model(rng, n, family, max_support=4)
            series = Series(rng.normal(0, 1.5, T))
            ref = brute_force_loglik(model, series)
            if np.isfinite(ref):
                out.append((model, series, ref))
                made += 1
    return out


@pytest.fixture(scope="module")
def oracle_instances():
    t0 = time.perf_counter()
    inst = _oracle_instances()
    return inst, time.perf_counter() - t0


def test_c01_oracle_equivalence(oracle_instances):
    inst, t_build = oracle_instances
    t0 = time.perf_counter()
    worst = 0.0
    for model, series, ref in inst:
        ll = forward_backward(model, series).log_likelihood
        worst = max(worst, abs(ll - ref) / max(abs(ref), 1e-300))
    elapsed = t_build + time.perf_counter() - t0
    families = {type(m.durations[0]).__name__ for m, _, _ in inst}
    states = {m.n_states for m, _, _ in inst}
    ok = (len(inst) >= 200 and worst <= 1e-9 and elapsed <= 5.0
          and families == {"DiscreteDuration", "GammaDuration"} and states == {1, 2, 3})
    record(1, "oracle equivalence", ok,
           f"{len(inst)} instances, max rel err {worst:.2e} (<=1e-9), {elapsed:.2f}s (<=5s)")
    assert ok


def test_c02_identities(oracle_instances):
    inst, _ = oracle_instances
    beta_ok = alpha_err = 0.0
    bad_beta = 0
    for model, series, _ in inst:
        lat = forward_backward(model, series)
        bad_beta += int(np.any(lat.log_beta[-1] != 0.0))
        a = lat.log_alpha[-1]
        m = a.max()
        lse = m + math.log(math.fsum(np.exp(a - m)))
        alpha_err = max(alpha_err, abs(lse - lat.log_likelihood) / max(1.0, abs(lat.log_likelihood)))
    ok = bad_beta == 0 and alpha_err <= 1e-12
    record(2, "terminal identities", ok,
           f"beta_T != 0 on {bad_beta} instances, max |lse(alpha_T) - loglik| rel {alpha_err:.1e} (<=1e-12)")
    assert ok


def _monotonicity_run(seed, family):
    rng = np.random.default_rng(1000 + seed)
    truth = three_state_model(rng, family, precision=float(rng.uniform(20, 200)))
    series = sample(truth, seed).series
    means = [d.mean() for d in truth.durations]
    lo = tuple(max(1, int(0.7 * m)) for m in means)
    hi = tuple(min(len(series), int(math.ceil(1.3 * m))) for m in means)
    cfg = TrainConfig(n_states=3, orders=(3, 3, 3), duration=family, d_min=lo, d_max=hi, loglik_tol=0.0)
    _, trace = fit(series, cfg)
    return len(series), float(np.min(np.diff(trace.logliks)))


def test_c03_em_monotonicity():
    t0 = time.perf_counter()
    worst = {}
    lengths = []
    for family in ("discrete", "gamma"):
        worst[family] = math.inf
        for seed in range(25):
            T, d = _monotonicity_run(seed, family)
            lengths.append(T)
            worst[family] = min(worst[family], d)
    elapsed = time.perf_counter() - t0
    ok = all(w >= -1e-8 for w in worst.values()) and elapsed <= 60.0
    record(3, "EM monotonicity", ok,
           f"min delta discrete {worst['discrete']:.2e}, gamma {worst['gamma']:.2e} (>=-1e-8); "
           f"T in [{min(lengths)}, {max(lengths)}]; {elapsed:.1f}s (<=60s)")
    assert ok


def _critical_models():
    rng = np.random.default_rng(42)
    v = rng.normal(size=15)
    basis = BasisConfig(max_order=3)
    one = EmissionParams(*weighted_least_squares([(v, 15, 1.0)], basis, 3))
    yield "one state", left_to_right([DiscreteDuration.point(15)], [one], basis), Series(v), (3,)
    cuts = [(0, 5), (5, 11), (11, 15)]
    ems = [EmissionParams(*weighted_least_squares([(v[a:b], b - a, 1.0)], basis, o))
           for (a, b), o in zip(cuts, (2, 3, 1))]
    durs = [DiscreteDuration.point(b - a) for a, b in cuts]
    yield "three states", left_to_right(durs, ems, basis), Series(v), (2, 3, 1)


def _max_change(a, b):
    diffs = [np.abs(a.pi - b.pi).max(), np.abs(a.trans - b.trans).max()]
    for x, y in zip(a.emissions, b.emissions):
        diffs.append(np.abs(x.weights - y.weights).max())
        diffs.append(abs(x.precision - y.precision) / x.precision)
    for x, y in zip(a.durations, b.durations):
        diffs.append(np.abs(x.pmf - y.pmf).max())
    return max(diffs)


def test_c04_critical_point():
    worst = 0.0
    for _, model, series, orders in _critical_models():
        for mode in ("soft", "viterbi"):
            cfg = TrainConfig(n_states=model.n_states, orders=orders, mode=mode)
            new, _ = em_step(model, series, cfg)
            worst = max(worst, _max_change(model, new))
    ok = worst <= 1e-9
    record(4, "critical-point fixed point", ok, f"max parameter change {worst:.1e} (<=1e-9)")
    assert ok


def test_c05_digamma_inversion():
    grid = np.linspace(sp.digamma(1e-3), sp.digamma(1e3), 1000)
    worst = max(abs(sp.digamma(invert_digamma(float(x))) - x) for x in grid)
    below = int(np.sum((grid < -2.22) & (grid > -4.0)))
    above = int(np.sum((grid >= -2.22) & (grid < 0.0)))
    ok = worst <= 1e-10 and below > 0 and above > 0
    record(5, "digamma inversion", ok,
           f"max |psi(inv(x)) - x| {worst:.1e} (<=1e-10) on 1000 points; "
           f"{below} points just below and {above} just above -2.22")
    assert ok


def test_c06_gamma_discretization():
    worst_exp = 0.0
    for rate in (0.01, 0.1, math.log(2), 1.0, 3.0):
        H = 80
        q = math.exp(-rate)
        g = GammaDuration(1.0, rate, H)
        for d in range(1, H + 1):
            worst_exp = max(worst_exp, abs(gamma_pmf(g, d) - (1 - q) * q ** (d - 1) / (1 - q ** H)))
    rng = np.random.default_rng(6)
    worst_sum = 0.0
    for _ in range(100):
        g = GammaDuration(float(rng.uniform(0.1, 100)), float(rng.uniform(0.01, 10)), int(rng.integers(1, 600)))
        worst_sum = max(worst_sum, abs(math.fsum(g.pmf) - 1.0))
    ok = worst_exp <= 1e-12 and worst_sum <= 1e-10
    record(6, "gamma discretization", ok,
           f"exponential case max err {worst_exp:.1e} (<=1e-12); max |sum - 1| {worst_sum:.1e} (<=1e-10)")
    assert ok


def _cosine(a, b):
    return float(a @ b / (np.linalg.norm(a) * np.linalg.norm(b)))


def _recovery(seed, family):
    rng = np.random.default_rng(500 + seed)
    truth = three_state_model(rng, family, precision=100.0)
    series = sample(truth, seed).series
    means = [d.mean() for d in truth.durations]
    if family == "discrete":
        lo = tuple(d.d_min for d in truth.durations)
        hi = tuple(d.d_max for d in truth.durations)
    else:
        lo = tuple(int(0.7 * m) for m in means)
        hi = tuple(int(math.ceil(1.3 * m)) for m in means)
    cfg = TrainConfig(n_states=3, orders=(3, 3, 3), duration=family, d_min=lo, d_max=hi)
    model, _ = fit(series, cfg)
    dur_err = max(abs(d.mean() - m) / m for d, m in zip(model.durations, means))
    cos = min(_cosine(a.weights, b.weights) for a, b in zip(model.emissions, truth.emissions))
    return dur_err, cos


def test_c07_parameter_recovery():
    t0 = time.perf_counter()
    summary = {}
    for family in ("discrete", "gamma"):
        runs = [_recovery(seed, family) for seed in range(10)]
        summary[family] = (float(np.median([r[0] for r in runs])), float(np.median([r[1] for r in runs])))
    elapsed = time.perf_counter() - t0
    ok = all(e <= 0.15 and c >= 0.95 for e, c in summary.values()) and elapsed <= 120
    detail = "; ".join(f"{f}: median worst-state duration err {e:.3f} (<=0.15), cosine {c:.4f} (>=0.95)"
                       for f, (e, c) in summary.items())
    record(7, "parameter recovery", ok, f"{detail}; {elapsed:.1f}s (<=120s)")
    assert ok


def _separation(seed, family):
    ex = beats.exemplar(seed)
    strip, starts, labels = beats.beat_strip(seed)
    model, _ = fit(ex.series, beats.exemplar_config(ex, family))
    width = len(ex.series)
    track = score_windows(model, strip, width, 1)
    peaks, is_a, background = beats.peak_scores(track, starts, labels, width // 4)
    pairs = [(a > b) + 0.5 * (a == b) for a in peaks[is_a] for b in peaks[~is_a]]
    return float(np.mean(pairs)), float(peaks[is_a].min() - background)


@pytest.mark.slow
def test_c08_recognition_separation():
    aucs, gaps = [], {"discrete": [], "gamma": []}
    for seed in range(5):
        auc, gap = _separation(seed, "discrete")
        aucs.append(auc)
        gaps["discrete"].append(gap)
        gaps["gamma"].append(_separation(seed, "gamma")[1])
    auc_ok = all(a == 1.0 for a in aucs)
    ranking = [d >= g for d, g in zip(gaps["discrete"], gaps["gamma"])]
    ok = auc_ok and all(ranking)
    record(8, "recognition separation", ok,
           f"discrete AUC per seed {aucs} (all 1.0: {auc_ok}); gap discrete "
           f"{[round(g, 1) for g in gaps['discrete']]} vs gamma {[round(g, 1) for g in gaps['gamma']]}, "
           f"discrete >= gamma on {sum(ranking)}/5 seeds")
    assert auc_ok, "A beats not perfectly ranked above B"
    assert all(ranking), "discrete gap below gamma gap on some seeds"


@pytest.mark.slow
def test_c09_table_ordering():
    model = beats._beat_model(beats.A_WEIGHTS, [2 * m for m in beats.BEAT_MEANS])
    path = sample(model, 2024)
    ds = [s.duration for s in path.segmentation.segments]
    lo = [int(d * 0.75) for d in ds]
    hi = [int(d * 1.25) + 1 for d in ds]
    rep = bench([("synthetic", path.series)], d_min=lo, d_max=hi)
    un, bd, ga = (rep.cell("synthetic", m) for m in ("discrete", "discrete-bounded", "gamma"))
    ratio = un.wall_ms / bd.wall_ms
    table = rep.table()
    layout_ok = table[0] == TABLE_COLUMNS and len(table) == 2 and table[1][0] == "synthetic"
    ok = (ratio >= 2.0 and un.iterations == bd.iterations == 4 and layout_ok
          and not (un.error or bd.error or ga.error))
    record(9, "table ordering", ok,
           f"T={len(path.series)}, unbounded/bounded time ratio {ratio:.2f} (>=2); "
           f"gamma {ga.wall_ms / bd.wall_ms:.2f}x bounded; layout {table[0]}")
    print(rep.format_table())
    assert ok


def _cli(*args):
    res = subprocess.run([sys.executable, "-m", "plhmm", *args], capture_output=True)
    assert res.returncode == 0, res.stderr.decode()


@pytest.mark.slow
def test_c10_cli_determinism(tmp_path):
    ex = beats.exemplar(3)
    strip, _, _ = beats.beat_strip(3, n_a=3, n_b=1)
    io.save_series(ex.series, tmp_path / "beat.csv")
    io.save_series(strip, tmp_path / "strip.csv")
    ds = [s.duration for s in ex.segmentation.segments]
    dmin = ",".join(str(int(d * 0.75)) for d in ds)
    dmax = ",".join(str(int(d * 1.25) + 1) for d in ds)
    outputs = []
    for run in ("a", "b"):
        d = tmp_path / run
        d.mkdir()
        _cli("train", "--input", str(tmp_path / "beat.csv"), "--states", "7", "--orders", "3,5,1,6,1,5,3",
             "--duration", "discrete", "--dmin", dmin, "--dmax", dmax, "--mode", "soft", "--iters", "4",
             "--seed", "11", "--out", str(d / "model.json"))
        _cli("sample", "--model", str(d / "model.json"), "--seed", "11", "--out", str(d / "sample.csv"))
        _cli("score", "--model", str(d / "model.json"), "--input", str(tmp_path / "strip.csv"),
             "--width", str(len(ex.series)), "--stride", "1", "--out", str(d / "track.csv"))
        outputs.append([(d / f).read_bytes() for f in ("model.json", "sample.csv", "track.csv")])
    same = [x == y for x, y in zip(*outputs)]
    ok = all(same)
    record(10, "CLI determinism", ok,
           f"byte-identical model/sample/track: {same}")
    assert ok


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
