"""Acceptance suite: nine release criteria, one pass/fail line each.

Every criterion computes its verdict against an independent oracle
(closed-form posterior, hand-computed stationary distribution, finite
differences, pair-counting AUC, ...) before asserting, and prints
``[PASS]``/``[FAIL]`` with the measured numbers.
"""

import hashlib
import json
import math

import numpy as np

from mcbnn.augmentation import AugmentPolicy, augment_dataset, flip, rotate
from mcbnn.data import save_csv, synth_blobs
from mcbnn.diagnostics import ess, split_rhat
from mcbnn.estimators import BnnClassifier
from mcbnn.evaluation import auc_mann_whitney, f1_score, roc_curve
from mcbnn.model import (
    Dataset,
    NetworkSpec,
    PriorSpec,
    grad_log_posterior,
    log_posterior_unnorm,
    param_count,
)
from mcbnn.samplers import (
    HmcConfig,
    RandomWalkProposal,
    TargetDensity,
    hmc_step,
    leapfrog,
    run_chain,
)
from mcbnn import cli


def report(number, name, ok, detail):
    print(f"[{'PASS' if ok else 'FAIL'}] criterion {number} ({name}): {detail}")
    assert ok, f"criterion {number} ({name}): {detail}"


def test_criterion_1_conjugate_oracle():
    # Linear-Gaussian regression has a closed-form Gaussian posterior:
    # cov = (X'X/s2 + I/t2)^-1, mean = cov X'y / s2. HMC must recover it.
    rng = np.random.default_rng(42)
    n, d = 20, 3
    z = rng.standard_normal((n, 1))
    X = 0.8 * z + 0.6 * rng.standard_normal((n, d))  # correlated design
    sigma2, tau2 = 0.25, 1.0
    y = X @ np.array([1.0, -0.5, 0.25]) + math.sqrt(sigma2) * rng.standard_normal(n)

    cov = np.linalg.inv(X.T @ X / sigma2 + np.eye(d) / tau2)
    mean = cov @ (X.T @ y) / sigma2
    assert np.abs(cov).min() > 1e-3  # relative tolerance stays meaningful

    target = TargetDensity(
        log_density=lambda w: float(
            -0.5 * (y - X @ w) @ (y - X @ w) / sigma2 - 0.5 * w @ w / tau2
        ),
        dim=d,
        grad_log_density=lambda w: X.T @ (y - X @ w) / sigma2 - w / tau2,
    )
    chain = run_chain(target, HmcConfig(0.05, 20), np.zeros(d),
                      n_iter=12_500, burn_in=2_500, seed=0)
    S = chain.samples
    assert S.shape[0] == 10_000

    ess_vals = np.array([ess(S[:, i])[0] for i in range(d)])
    mcse = np.sqrt(np.diag(cov)) / np.sqrt(ess_vals)
    mean_z = np.abs(S.mean(axis=0) - mean) / mcse
    cov_rel = np.abs(np.cov(S.T) - cov) / np.abs(cov)
    ok = mean_z.max() < 3.0 and cov_rel.max() < 0.10
    report(1, "conjugate oracle", ok,
           f"max mean error {mean_z.max():.2f} MCSE (limit 3), "
           f"max cov rel error {cov_rel.max():.3f} (limit 0.10)")


def test_criterion_2_correlated_gaussian():
    rho = 0.8
    prec = np.linalg.inv(np.array([[1.0, rho], [rho, 1.0]]))
    target = TargetDensity(
        lambda x: float(-0.5 * x @ prec @ x), 2, lambda x: -(prec @ x)
    )
    results = {}
    for name, kernel in (("rw", RandomWalkProposal(0.7)), ("hmc", HmcConfig(0.25, 8))):
        chain = run_chain(target, kernel, np.zeros(2),
                          n_iter=50_000, burn_in=5_000, seed=21)
        mean_err = float(np.abs(chain.samples.mean(axis=0)).max())
        corr_err = float(abs(np.corrcoef(chain.samples.T)[0, 1] - rho))
        results[name] = (mean_err, corr_err)
    ok = all(m <= 0.05 and c <= 0.05 for m, c in results.values())
    report(2, "correlated Gaussian", ok,
           f"rw mean/corr error {results['rw'][0]:.3f}/{results['rw'][1]:.3f}, "
           f"hmc {results['hmc'][0]:.3f}/{results['hmc'][1]:.3f} (limits 0.05)")


def test_criterion_3_leapfrog():
    def grad_u(x):
        return x + x**3

    def u(x):
        return float(0.5 * x @ x + 0.25 * (x**2) @ (x**2))

    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(100):
        dim = int(rng.integers(1, 9))
        w0 = rng.standard_normal(dim)
        p0 = rng.standard_normal(dim)
        eps = float(rng.uniform(0.005, 0.1))
        n = int(rng.integers(1, 51))
        w1, p1 = leapfrog(grad_u, w0, p0, eps, n)
        w2, p2 = leapfrog(grad_u, w1, -p1, eps, n)
        worst = max(worst, float(np.abs(w2 - w0).max()), float(np.abs(p2 + p0).max()))

    # second-order scaling: same trajectory length, eps halved and steps
    # doubled, mean |dH| should shrink by about 4
    target = TargetDensity(
        lambda x: -u(x), 4, lambda x: -grad_u(x)
    )
    errors = {0.2: [], 0.1: []}
    for draw in range(40):
        state = np.random.default_rng(500 + draw).standard_normal(4) * 0.7
        for eps, n in ((0.2, 10), (0.1, 20)):
            rng_step = np.random.default_rng(draw)  # identical momentum draw
            _, _, dh = hmc_step(state, target, HmcConfig(eps, n), rng_step)
            errors[eps].append(abs(dh))
    factor = float(np.mean(errors[0.2]) / np.mean(errors[0.1]))
    ok = worst < 1e-10 and 3.0 <= factor <= 5.0
    report(3, "leapfrog", ok,
           f"worst reversibility gap {worst:.2e} (limit 1e-10), "
           f"|dH| shrink factor {factor:.2f} (need [3, 5])")


def test_criterion_4_discrete_detailed_balance():
    # three unit-width cells carry hand-picked masses; MH occupancy must
    # match them in total variation
    pi = np.array([0.2, 0.3, 0.5])
    log_pi = np.log(pi)

    def log_density(x):
        k = round(float(x[0]))
        if 0 <= k <= 2:
            return float(log_pi[k])
        return -math.inf

    chain = run_chain(TargetDensity(log_density, 1), RandomWalkProposal(1.0),
                      np.array([1.0]), n_iter=1_000_000, burn_in=10_000, seed=3)
    states = np.rint(chain.samples[:, 0]).astype(int)
    occupancy = np.bincount(states, minlength=3) / states.shape[0]
    tv = 0.5 * float(np.abs(occupancy - pi).sum())
    ok = tv <= 0.01
    report(4, "discrete detailed balance", ok,
           f"occupancy {np.round(occupancy, 4).tolist()} vs {pi.tolist()}, "
           f"TV {tv:.4f} (limit 0.01)")


def test_criterion_5_gradient_correctness():
    rng = np.random.default_rng(13)
    h = 1e-5
    worst = 0.0
    checked = 0
    while checked < 50:
        input_dim = int(rng.integers(1, 5))
        hidden = () if rng.random() < 0.4 else (int(rng.integers(1, 7)),)
        n_classes = int(rng.integers(2, 5))
        activation = "relu" if rng.random() < 0.5 else "tanh"
        spec = NetworkSpec(input_dim, hidden, n_classes, activation)
        if param_count(spec) > 50:
            continue
        checked += 1
        prior = PriorSpec(float(rng.uniform(0.25, 4.0)))
        w = 0.7 * rng.standard_normal(param_count(spec))
        data = Dataset(rng.standard_normal((8, input_dim)),
                       rng.integers(0, n_classes, 8).astype(np.int64), n_classes)
        analytic = grad_log_posterior(spec, w, data, prior)
        numeric = np.empty_like(analytic)
        for i in range(w.shape[0]):
            up, dn = w.copy(), w.copy()
            up[i] += h
            dn[i] -= h
            numeric[i] = (log_posterior_unnorm(spec, up, data, prior)
                          - log_posterior_unnorm(spec, dn, data, prior)) / (2 * h)
        rel = np.abs(analytic - numeric) / np.maximum(1.0, np.abs(analytic))
        worst = max(worst, float(rel.max()))
    ok = worst < 1e-5
    report(5, "gradient correctness", ok,
           f"50 specs, worst relative error {worst:.2e} (limit 1e-5)")


def test_criterion_6_end_to_end_synthetic():
    train = synth_blobs(20, 2, 2, separation=4.0, noise_sd=1.0, seed=11)
    test = synth_blobs(100, 2, 2, separation=4.0, noise_sd=1.0, seed=12)
    clf = BnnClassifier(
        hidden_dims=(8,), prior_variance=0.5, kernel="hmc",
        step_size=0.03, n_leapfrog=15, n_iter=6_000, burn_in=2_000,
        thin=2, n_chains=4, seed=0,
    ).fit(np.asarray(train.features), np.asarray(train.labels))

    assert clf.chains_[0].n_retained == 2_000
    accuracy = float((clf.predict(np.asarray(test.features))
                      == np.asarray(test.labels)).mean())
    rhat, _ = split_rhat([c.samples for c in clf.chains_])
    frac_converged = float((rhat < 1.1).mean())
    dims = rhat.shape[0]
    assert dims == 42  # 2-8-2 network
    ok = accuracy >= 0.90 and frac_converged >= 0.90
    report(6, "end-to-end synthetic", ok,
           f"test accuracy {accuracy:.3f} (need >= 0.90), R-hat < 1.1 on "
           f"{frac_converged:.0%} of {dims} dims (need >= 90%)")


def test_criterion_7_metric_fidelity():
    f1_ok = round(f1_score(0.82, 0.84), 2) == 0.83
    rng = np.random.default_rng(17)
    worst = 0.0
    for _ in range(1000):
        n = int(rng.integers(4, 60))
        scores = np.round(rng.uniform(0, 1, n), 1)  # heavy ties
        labels = rng.integers(0, 2, n)
        if labels.min() == labels.max():
            labels[0] = 1 - labels[0]
        gap = abs(roc_curve(scores, labels).auc - auc_mann_whitney(scores, labels))
        worst = max(worst, float(gap))
    ok = f1_ok and worst < 1e-12
    report(7, "metric fidelity", ok,
           f"F1(0.82, 0.84) -> {round(f1_score(0.82, 0.84), 2)} (need 0.83), "
           f"max |trapezoid - Mann-Whitney| {worst:.2e} over 1000 sets (limit 1e-12)")


def test_criterion_8_augmentation_exactness():
    rng = np.random.default_rng(19)
    bit_exact = True
    for _ in range(20):
        img = rng.uniform(0.0, 1.0, (int(rng.integers(2, 12)),) * 2)
        four_turns = img
        for _ in range(4):
            four_turns = rotate(four_turns, 90)
        bit_exact &= np.array_equal(four_turns, img)
        for axis in ("horizontal", "vertical"):
            bit_exact &= np.array_equal(flip(flip(img, axis), axis), img)

    n, m = 12, 3
    images = [rng.uniform(0.0, 1.0, (6, 6)) for _ in range(n)]
    labels = np.array([0, 1, 2, 0, 1, 2, 0, 0, 1, 1, 2, 0])
    out_images, out_labels = augment_dataset(
        images, labels, AugmentPolicy(per_image_count=m, seed=2))
    count_ok = len(out_images) == (m + 1) * n
    proportion_ok = np.array_equal(np.bincount(out_labels),
                                   (m + 1) * np.bincount(labels))
    ok = bit_exact and count_ok and proportion_ok
    report(8, "augmentation exactness", ok,
           f"identities bit-exact: {bit_exact}, {len(out_images)} samples from "
           f"{n} at multiplier {m} (need {(m + 1) * n}), "
           f"proportions preserved: {proportion_ok}")


def test_criterion_9_determinism(tmp_path):
    data = tmp_path / "data.csv"
    save_csv(synth_blobs(16, 2, 2, separation=6.0, noise_sd=1.0, seed=0), data)
    config = {
        "dataset": {"kind": "csv", "path": str(data)},
        "split": {"test_fraction": 0.25},
        "network": {"hidden_dims": [4], "activation": "relu"},
        "prior": {"variance": 1.0},
        "kernel": {"kind": "hmc", "step_size": 0.05, "n_leapfrog": 10},
        "chains": {"n_iter": 120, "burn_in": 40, "thin": 1, "n_chains": 2, "seed": 7},
        "out_dir": str(tmp_path / "run1"),
    }
    cfg = tmp_path / "config.json"
    cfg.write_text(json.dumps(config))

    for run, out in (("run1", "eval1"), ("run2", "eval2")):
        assert cli.main(["train", "--config", str(cfg),
                         "--out", str(tmp_path / run)]) == 0
        assert cli.main(["evaluate", "--run", str(tmp_path / run),
                         "--out", str(tmp_path / out)]) == 0

    def digest(root):
        return {
            p.relative_to(root).as_posix(): hashlib.sha256(p.read_bytes()).hexdigest()
            for p in sorted(root.rglob("*")) if p.is_file()
        }

    runs_equal = digest(tmp_path / "run1") == digest(tmp_path / "run2")
    evals_equal = digest(tmp_path / "eval1") == digest(tmp_path / "eval2")
    ok = runs_equal and evals_equal
    report(9, "determinism", ok,
           f"run trees byte-identical: {runs_equal}, "
           f"evaluation reports byte-identical: {evals_equal}")
