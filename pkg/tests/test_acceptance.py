"""Exit criteria C1-C9, each at its stated tolerance.

Run alone with ``pytest -m acceptance``; the verdict lines are repeated in
the terminal summary.
"""

import dataclasses
import functools
import json
import os

import numpy as np
import pytest

from acceptance_log import verdict
from obfuskit.attacks.memorization import Codec, SecretPayload, lsb_capacity, lsb_decode, lsb_encode
from obfuskit.dataset import Dataset, GroupSpec, SensitiveSelection
from obfuskit.harness import load_config, run_experiment
from obfuskit.harness.runner import WALL_CLOCK_KEY
from obfuskit.metrics import ConfusionMatrix, f1
from obfuskit.models import ModelSpec, flat_loss_and_gradient, init_model, scale_features
from obfuskit.obfuscate import (
    GroupParams,
    IndividualParams,
    negative,
    obfuscate_dataset_groups,
    obfuscate_dataset_individual,
)
from oracles import central_difference, f1_from_rates
from test_metrics import REFERENCE_TABLES

pytestmark = pytest.mark.acceptance

CONFIGS = os.path.join(os.path.dirname(__file__), "..", "configs")
SEEDS = range(5)
MAX_ACCURACY_COST = 0.05


@functools.lru_cache(maxsize=None)
def run(name, seed=0, workers=1):
    cfg = dataclasses.replace(load_config(os.path.join(CONFIGS, f"{name}.json")), master_seed=seed)
    return run_experiment(cfg, workers=workers)


def point(report, r):
    return next(p for p in report.points if abs(p.r - r) < 1e-12)


def test_c1_reference_f1_values():
    got = {k: f1(ConfusionMatrix.from_rates(*rates)) for k, (rates, _) in REFERENCE_TABLES.items()}
    ok = all(abs(got[k] - want) <= 0.01 and abs(got[k] - f1_from_rates(*rates)) < 1e-12
             for k, (rates, want) in REFERENCE_TABLES.items())
    verdict("C1", ok, "; ".join(f"{k}: {v:.3f}" for k, v in got.items()))


def _random_case(case):
    rng = np.random.default_rng([7, case])
    arch = ("softmax", "relu", "sigmoid")[case % 3]
    d, c = int(rng.integers(2, 9)), int(rng.integers(2, 5))
    reg = float(rng.choice([0.0, 0.01, 0.1]))
    if arch == "softmax":
        spec = ModelSpec.softmax(d, c, reg_weight=reg, domain=(0, 255))
    else:
        spec = ModelSpec.mlp(d, c, int(rng.integers(2, 9)), activation=arch, reg_weight=reg, domain=(0, 255))
    theta = rng.normal(0, 0.7, spec.num_parameters)
    X = rng.uniform(0, 255, (int(rng.integers(1, 17)), d))
    return spec, theta, scale_features(spec, X), rng.integers(0, c, X.shape[0])


def test_c2_gradients_match_finite_differences():
    worst = 0.0
    for case in range(200):
        spec, theta, Z, y = _random_case(case)
        _, grad = flat_loss_and_gradient(spec, theta, Z, y)
        fd = central_difference(lambda t: flat_loss_and_gradient(spec, t, Z, y)[0], theta)
        # relative error; gradients below 1e-6 in magnitude are compared against 1e-6
        rel = np.abs(grad - fd) / np.maximum(np.maximum(np.abs(grad), np.abs(fd)), 1e-6)
        worst = max(worst, float(rel.max()))
    verdict("C2", worst <= 1e-4, f"200 cases, worst relative error {worst:.2e} (limit 1e-4)")


def test_c3_obfuscation_invariants():
    failures = []
    domain = (0.0, 255.0)
    for seed in range(20):
        rng = np.random.default_rng(seed)
        ds = Dataset(rng.integers(0, 256, (30, 8)).astype(float), rng.integers(0, 3, 30), 3, domain)
        sel = SensitiveSelection.fraction(ds, 1.0, seed)
        for params in (IndividualParams(0.7, 0.0), IndividualParams(0.0, 40.0)):
            out = obfuscate_dataset_individual(ds, sel, params, seed)
            if out.features.tobytes() != ds.features.tobytes() or out.labels.tobytes() != ds.labels.tobytes():
                failures.append(f"individual {params} seed {seed}")
        for groups in ([GroupSpec.whole()], [GroupSpec.by_label(1)]):
            out = obfuscate_dataset_groups(ds, groups, GroupParams(0.0, 5.0), seed)
            if out.features.tobytes() != ds.features.tobytes():
                failures.append(f"group r=0 seed {seed}")
        x = rng.uniform(0, 255, (50, 8))
        if not np.allclose(negative(negative(x, domain), domain), x, rtol=0, atol=255 * 2.0**-52):
            failures.append(f"involution seed {seed}")
        if not np.array_equal(negative(negative(ds.features, domain), domain), ds.features):
            failures.append(f"integer involution seed {seed}")
        aug = obfuscate_dataset_groups(ds, [GroupSpec.whole()], GroupParams(1.0, 0.0), seed)
        if np.abs(aug.features.mean(axis=0) - 127.5).max() > 1e-12:
            failures.append(f"midpoint seed {seed}")
        for out in (obfuscate_dataset_individual(ds, sel, IndividualParams(1.0, 500.0), seed),
                    obfuscate_dataset_groups(ds, [GroupSpec.whole()], GroupParams(2.0, 500.0), seed)):
            if out.features.min() < 0 or out.features.max() > 255:
                failures.append(f"domain seed {seed}")
    verdict("C3", not failures, "20 datasets: identities, involution, midpoint mean, domain"
            + (f"; failed {failures[:3]}" if failures else ""))


def test_c4_memorization():
    notes, ok = [], True
    # LSB identity on the desk MLP, 1000 payloads per k
    model = init_model(ModelSpec.mlp(64, 5, 32, domain=(0, 255)), 0)
    rng = np.random.default_rng(0)
    for k in (1, 8, 16):
        bad = 0
        for _ in range(1000):
            n = int(rng.integers(1, lsb_capacity(model, k) + 1))
            payload = SecretPayload(rng.integers(0, 2, n), Codec(1, n, 1))
            bad += not np.array_equal(lsb_decode(lsb_encode(model, payload, k), payload.codec, k).bits, payload.bits)
        ok &= bad == 0
        notes.append(f"k={k} mismatches {bad}/1000")
    worst_change, worst_recovery, worst_cost, min_mae = 0.0, 1.0, -1.0, np.inf
    for seed in SEEDS:
        lsb, sign = run("memorization_lsb", seed), run("memorization_sign", seed)
        aux = point(lsb, 0).report.aux
        worst_change = max(worst_change, abs(aux["accuracy_change_from_encoding"]))
        # same network, data and seed without any payload
        clean = aux["val_accuracy"] - aux["accuracy_change_from_encoding"]
        s = point(sign, 0).report
        assert s.aux["payload_bits"] == 64
        worst_recovery = min(worst_recovery, s.aux["bit_recovery_rate"])
        worst_cost = max(worst_cost, clean - s.aux["val_accuracy"])
        min_mae = min(min_mae, point(lsb, 1 / 3).report.aux["recon_mae_noised"])
    ok &= worst_change < 0.001 and worst_recovery >= 0.95 and worst_cost <= 0.05 and min_mae >= 30
    notes += [f"k=16 accuracy change {worst_change:.4f}", f"sign recovery {worst_recovery:.3f}",
              f"sign accuracy cost {100 * worst_cost:+.1f} pts", f"defended MAE {min_mae:.1f}"]
    verdict("C4", ok, "; ".join(notes) + " (worst of 5 seeds)")


def test_c5_membership():
    reports = [run("membership", s) for s in SEEDS]
    base = [point(r, 0).report for r in reports]
    defended = [point(r, 1 / 3).report for r in reports]
    undefended_ok = all(b.f1 >= 0.60 and b.balanced_accuracy >= 0.60 for b in base)
    drop = np.median([b.f1 for b in base]) - np.median([d.f1 for d in defended])
    ba = float(np.median([d.balanced_accuracy for d in defended]))
    ok = undefended_ok and drop >= 0.10 and 0.40 <= ba <= 0.65
    verdict("C5", ok, f"undefended min F1 {min(b.f1 for b in base):.3f}, "
                      f"min balanced acc {min(b.balanced_accuracy for b in base):.3f}; "
                      f"defended (coord ratio 1/3, sigma 76.5) median F1 drop {drop:.3f}, "
                      f"median balanced acc {ba:.3f}")


def test_c6_inversion():
    reports = [run("inversion", s) for s in SEEDS]
    sweep = [p.r for p in reports[0].points]
    assert sweep == [0, 0.25, 0.5, 1]
    sims = np.array([[p.report.aux["cosine_similarity"] for p in r.points] for r in reports])
    med = np.median(sims, axis=0)
    ok = sims[:, 0].min() >= 0.8 and np.all(np.diff(med) <= 0) and med[0] - med[-1] >= 0.3
    verdict("C6", ok, f"undefended min cosine {sims[:, 0].min():.3f}; median over sweep "
                      + " > ".join(f"{m:.3f}" for m in med))


def test_c7_property():
    f1s, hidden = [], []
    for seed in SEEDS:
        rep = run("property", seed)
        base = point(rep, 0).report
        assert base.confusion.total == 40
        f1s.append(base.f1)
        hidden.append(point(rep, 1).report.aux["with_classified_without"])
    ok = min(f1s) >= 0.9 and min(hidden) > 0.5
    verdict("C7", ok, f"undefended F1 on 40 held-out models min {min(f1s):.3f}; "
                      f"defended with-property models classified 'without' min {min(hidden):.2f}")


def test_c8_accuracy_cost():
    # the defended points of C4-C7
    gated = {"memorization_lsb": [1 / 3], "memorization_sign": [1 / 3], "membership": [1 / 3],
             "inversion": [0.25, 0.5, 1], "property": [0.25, 0.5, 1]}
    worst = {}
    for name, rs in gated.items():
        worst[name] = max(point(run(name, s), r).delta_accuracy for s in SEEDS for r in rs)
    ok = all(v <= MAX_ACCURACY_COST for v in worst.values())
    verdict("C8", ok, "worst degradation " + ", ".join(f"{k} {100 * v:.1f} pts" for k, v in worst.items()))


def _canonical(report):
    d = report.to_dict()
    d.pop(WALL_CLOCK_KEY)
    return json.dumps(d, sort_keys=True, indent=2)


def test_c9_determinism():
    names = ["inversion", "property", "memorization_lsb", "memorization_sign", "membership"]
    differing = []
    for name in names:
        cfg = load_config(os.path.join(CONFIGS, f"{name}.json"))
        first = _canonical(run(name))
        again = _canonical(run_experiment(cfg, workers=1))
        wide = _canonical(run_experiment(cfg, workers=4))
        if not first == again == wide:
            differing.append(name)
    verdict("C9", not differing, f"{len(names)} configs rerun with workers 1 and 4: "
            + ("byte-identical" if not differing else f"differ: {differing}"))
