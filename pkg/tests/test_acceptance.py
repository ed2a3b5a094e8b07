"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v``; the lines are repeated
in the terminal summary under "acceptance criteria".
"""

import json
import math
import time

import numpy as np
import pytest

from oracles import brute_mask, brute_metrics, naive_features
from rampcast.cli import main
from rampcast.core import BivariateSeries, ClassScheme, RampClass
from rampcast.evaluation import SearchSpace, compute_metrics, run_benchmark
from rampcast.features import extract_features
from rampcast.imbalance import EasyConfig, fit_easy_ensemble, fit_easy_ensemble_arrays
from rampcast.learners import TreeConfig, fit_adaboost, mdi_importance, samme_alpha
from rampcast.preprocess import WindowSpec, extract_instances, mask_window
from rampcast.ramping import RampThresholds, SdaConfig, reconstruct, segment_series
from rampcast.stream import StreamState, step
from rampcast.synth import SynthConfig, generate

THREE, FIVE = ClassScheme.THREE, ClassScheme.FIVE
TREE = TreeConfig(max_depth=3, criterion="gini", min_samples_split=0.05, min_samples_leaf=0.02)


def test_criterion_1_metrics_oracle(criterion):
    rng = np.random.default_rng(101)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(200):
        c = int(rng.choice([3, 5]))
        n = int(rng.integers(10, 501))
        truth, pred = rng.integers(0, c, n), rng.integers(0, c, n)
        got = compute_metrics(truth, pred, THREE if c == 3 else FIVE)
        ref = brute_metrics(truth.tolist(), pred.tolist(), c)
        worst = max(worst, max(abs(getattr(got, k) - v) for k, v in ref.items()))
    elapsed = time.perf_counter() - t0
    criterion(1, worst <= 1e-9 and elapsed < 5,
              f"metrics vs brute force: max diff {worst:.2e}, {elapsed:.2f}s")


def test_criterion_2_masking(criterion):
    rng = np.random.default_rng(102)
    labels = list(FIVE.classes)
    unk = RampClass.UNKNOWN
    t0 = time.perf_counter()
    mismatches = 0
    for _ in range(1000):
        l = int(rng.integers(2, 13))
        window = [labels[i] for i in rng.integers(0, 5, l)]
        if rng.random() < 0.3:  # long runs are rare under uniform draws
            k = int(rng.integers(1, l + 1))
            window[l - k:] = [window[-1]] * k
        look = window[-1] if rng.random() < 0.5 else labels[int(rng.integers(0, 5))]
        mismatches += mask_window(window, look) != brute_mask(window, look, unk)
    elapsed = time.perf_counter() - t0
    up = RampClass.RAMP_UP
    all_ongoing = mask_window([up] * 4, up) == [unk] * 4
    criterion(2, mismatches == 0 and all_ongoing and elapsed < 1,
              f"mask vs scanner: {mismatches} mismatches of 1000, l=4 all-ongoing "
              f"{'hidden' if all_ongoing else 'NOT hidden'}, {elapsed:.3f}s")


def test_criterion_3_sda(criterion):
    rng = np.random.default_rng(103)
    cap = 669.0
    train = extract_instances(generate(SynthConfig(n_samples=3000, seed=31)), WindowSpec(4), THREE)
    model = fit_easy_ensemble(train, EasyConfig(2, 2, TREE, seed=1))
    worst_excess, online_bad = -math.inf, 0
    for _ in range(200):
        n = int(rng.integers(5, 300))
        eps = float(rng.uniform(1, 20))
        power = np.clip(cap / 2 + np.cumsum(rng.normal(0, rng.uniform(1, 25), n)), 0, cap)
        sda, th = SdaConfig(eps), RampThresholds.from_capacity(cap)
        series = BivariateSeries.from_power(power, capacity_mw=cap)
        offline = segment_series(series, sda, th)
        worst_excess = max(worst_excess, float(np.max(np.abs(reconstruct(series, offline) - power))) - eps)
        state = StreamState(model, th, sda)
        for p in power:
            step(state, p)
        # every online-closed segment, and its class, must match offline
        closed_labels = [s.assigned_class for s in offline[:-1] for _ in range(len(s))]
        if state.closed != offline[:-1] or state.labels[: len(closed_labels)] != closed_labels:
            online_bad += 1
    ok = worst_excess <= 1e-9 and online_bad == 0
    criterion(3, ok, f"reconstruction max excess over eps {worst_excess:.3g} MW, "
                     f"{online_bad}/200 online/offline mismatches")


def test_criterion_4_features(criterion):
    rng = np.random.default_rng(104)
    worst = 0.0
    for _ in range(100):
        l = int(rng.integers(3, 13))
        w = rng.uniform(0, 669, l)
        if rng.random() < 0.3:
            w = np.round(w / 50) * 50
        code = int(rng.integers(-1, 3))
        got, ref = np.array(extract_features(w, code)), np.array(naive_features(w, code))
        worst = max(worst, float(np.max(np.abs(got - ref) / np.maximum(1.0, np.abs(ref)))))
    const = extract_features([123.0] * 8, 1)
    fixed = const.shannon_entropy == 0.0 and const.petrosian_fd == 1.0 and const.slope == 0.0
    criterion(4, worst <= 1e-9 and fixed and len(const) == 21,
              f"21 features vs reference: max rel diff {worst:.2e}, constant-window fixed points "
              f"{'exact' if fixed else 'WRONG'}")


def test_criterion_5_easy_ensemble(criterion):
    rng = np.random.default_rng(105)
    y = np.concatenate([np.full(880, 1), np.full(70, 0), np.full(50, 2)])
    X = rng.normal(size=(y.size, 6)) + 0.8 * (y[:, None] - 1)
    cfg = EasyConfig(5, 4, TREE, seed=7)
    _, _, subsets = fit_easy_ensemble_arrays(X, y, 3, cfg)
    sizes_ok = len(subsets) == 5 and all(
        r.size == 240 and (y[r] != 1).sum() == 120 and np.unique(r).size == 240 for r in subsets)

    yb = np.repeat([0, 1, 2], [100, 90, 80])
    Xb = rng.normal(size=(yb.size, 4)) + 0.5 * yb[:, None]
    one = EasyConfig(1, 6, TREE, learning_rate=0.8, seed=3)
    _, members, subs = fit_easy_ensemble_arrays(Xb, yb, 3, one)
    plain = fit_adaboost(Xb, yb, 3, TREE, 6, 0.8)
    same_as_plain = subs[0].size == yb.size and np.array_equal(
        members[0].decision_scores(Xb), plain.decision_scores(Xb))

    matrix = extract_instances(generate(SynthConfig(n_samples=5000, seed=51)), WindowSpec(4), THREE)
    docs = [json.dumps(fit_easy_ensemble(matrix, EasyConfig(4, 3, TREE, seed=9), jobs=j).to_dict(),
                       sort_keys=True) for j in (1, 2, 1)]
    deterministic = docs[0] == docs[1] == docs[2]
    criterion(5, sizes_ok and same_as_plain and deterministic,
              f"member sizes {'240 each' if sizes_ok else 'WRONG'}, L=1 equals AdaBoost "
              f"{same_as_plain}, bit-identical across jobs {deterministic}")


def test_criterion_6_samme(criterion):
    worst = 0.0
    for eps in (0.1, 0.25, 0.4):
        for c in (3, 5):
            for lr in (0.5, 1.0, 2.5):
                direct = lr * (math.log((1 - eps) / eps) + math.log(c - 1))
                worst = max(worst, abs(samme_alpha(eps, c, lr) - direct))
    rng = np.random.default_rng(106)
    X = rng.normal(size=(300, 4))
    y = np.digitize(X[:, 0] + 0.7 * rng.normal(size=300), [-0.5, 0.5])
    sums = []
    fit_adaboost(X, y, 3, TreeConfig(max_depth=1, min_samples_leaf=0.01), 12, 0.9,
                 callback=lambda j, w, e, a: sums.append(float(w.sum())))
    norm_err = max(abs(s - 1.0) for s in sums)
    criterion(6, worst <= 1e-12 and norm_err <= 1e-12 and len(sums) > 1,
              f"alpha max diff {worst:.1e}, weight-sum drift {norm_err:.1e} over {len(sums)} rounds")


@pytest.mark.slow
def test_criterion_7_synthetic_benchmark(criterion):
    t0 = time.perf_counter()
    lines, ok = [], True
    for seed in (0, 1, 2):
        r = run_benchmark(generate(SynthConfig(seed=seed)), THREE, 4, seed, space=SearchSpace())
        ee, pr, maj = r.model, r.transition, r.majority
        good = (ee.balanced_accuracy - pr.balanced_accuracy >= 0.05
                and ee.balanced_accuracy - maj.balanced_accuracy >= 0.05
                and ee.weighted_f1 >= maj.weighted_f1)
        ok &= good
        lines.append(f"seed {seed}: EE bacc {ee.balanced_accuracy:.3f} wF1 {ee.weighted_f1:.3f}, "
                     f"Pr bacc {pr.balanced_accuracy:.3f}, majority bacc {maj.balanced_accuracy:.3f} "
                     f"wF1 {maj.weighted_f1:.3f}")
    criterion(7, ok, "; ".join(lines) + f" ({time.perf_counter() - t0:.0f}s)")


def test_criterion_8_lag_report(criterion, tmp_path, capsys):
    data = tmp_path / "series.csv"
    assert main(["synth", "--seed", "8", "--n-samples", "8000", "--out", str(data)]) == 0
    args = ["eval", "--series", str(data), "--lags", "4", "8", "12", "--seed", "8"]
    outputs, codes = [], []
    for _ in range(2):
        capsys.readouterr()
        codes.append(main(args))
        outputs.append(capsys.readouterr().out)
    rows = outputs[0].splitlines()
    ok = (codes == [0, 0] and outputs[0] == outputs[1]
          and rows[0] == "lag,shannon_entropy_pct,accuracy,balanced_accuracy,kappa,weighted_f1"
          and [r.split(",")[0] for r in rows[1:]] == ["4", "8", "12"])
    criterion(8, ok, f"lag report for l=4,8,12 exit codes {codes}, repeat identical "
                     f"{outputs[0] == outputs[1]}")


def test_criterion_9_mdi(criterion):
    hits, worst = 0, 0.0
    for run in range(100):
        rng = np.random.default_rng([109, run])
        X = rng.normal(size=(400, 8))
        y = np.digitize(X[:, 5] + 0.6 * rng.normal(size=400), [-0.6, 0.6])
        idx = np.concatenate([np.flatnonzero(y == 1), np.flatnonzero(y != 1)[:: 2]])
        model = fit_easy_ensemble_arrays(X[idx], y[idx], 3, EasyConfig(3, 5, TREE, seed=run))[1]
        trees = [t for m in model for t in m.trees]
        alphas = [a for m in model for a in m.alphas]
        imp = mdi_importance(trees, alphas)
        worst = max(worst, abs(imp.sum() - 1.0))
        hits += int(np.argmax(imp)) == 5
    criterion(9, worst <= 1e-9 and hits >= 95,
              f"importance sum drift {worst:.1e}, planted feature first in {hits}/100 runs")
