"""Scenario pipelines: data -> obfuscate -> train -> attack -> evaluate, per sweep point.

Every stochastic stage draws its seed from ``derive_seed(master_seed,
stage, ...)``. The training seed is shared by all sweep points, so each
defended point is paired with the r=0 baseline and differs only by the
obfuscation.
"""

import json
import math
import os
import time
from dataclasses import dataclass, field

import numpy as np

import obfuskit
from obfuskit import _backend
from obfuskit.attacks.inversion import inversion_attack_eval
from obfuskit.attacks.membership import membership_attack_eval, membership_attack_train
from obfuskit.attacks.memorization import memorization_attack_eval
from obfuskit.attacks.property import (
    BlobFamily,
    fit_property_classifier,
    property_attack_eval,
    train_family_models,
)
from obfuskit.attacks.report import _plain
from obfuskit.dataset import (
    SensitiveSelection,
    gen_blobs,
    load_csv,
    save_pgm,
    signed_centers,
    split,
)
from obfuskit.errors import ValidationError
from obfuskit.metrics import track_curve
from obfuskit.models import ModelSpec, TrainConfig, init_model
from obfuskit.obfuscate import GroupParams, IndividualParams, obfuscate_dataset_individual
from obfuskit.seeding import derive_seed, make_rng

WALL_CLOCK_KEY = "wall_clock_seconds"


@dataclass
class SweepPoint:
    r: float
    report: object
    val_accuracy: float
    delta_accuracy: float = None


@dataclass
class RunReport:
    config: dict
    points: list = field(default_factory=list)
    wall_clock_seconds: float = 0.0
    domain: tuple = (0.0, 255.0)
    version: str = obfuskit.__version__
    backend: str = _backend.NAME

    def to_dict(self):
        return {
            "version": self.version,
            "backend": self.backend,
            "scenario": self.config["scenario"],
            "config": _plain(self.config),
            "sweep": [
                {"index": i, "r": p.r, "val_accuracy": p.val_accuracy,
                 "delta_accuracy": p.delta_accuracy, "attack": p.report.to_dict()}
                for i, p in enumerate(self.points)
            ],
            WALL_CLOCK_KEY: self.wall_clock_seconds,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def curves_csv(self):
        chunks = []
        for i, p in enumerate(self.points):
            if p.report.curve is None:
                continue
            text = p.report.curve.to_csv(label=i)
            chunks.append(text if not chunks else text.split("\n", 1)[1])
        return "".join(chunks) or "sweep,epoch,train,val\n"


def _model_spec(cfg, dim, num_classes, domain):
    m = cfg.model
    return ModelSpec(dim, num_classes, m.architecture, m.hidden_width, m.activation, m.reg_weight,
                     tuple(domain))


def _train_config(cfg, seed):
    t = cfg.train
    return TrainConfig(t.epochs, t.batch_size, t.learning_rate, seed)


def _blob_draw(src, seed, per_class_n, key):
    if src.layout == "signed":
        centers = signed_centers(src.amplitudes, src.dim, src.domain, derive_seed(seed, "centers"))
    else:
        centers = make_rng(seed, "centers").uniform(src.center_lo, src.center_hi,
                                                    size=(src.num_classes, src.dim))
    return gen_blobs(src.num_classes, src.dim, per_class_n, seed, src.spread, src.domain,
                     sample_seed=derive_seed(seed, "data", key), centers=centers, name=key)


def _load_data(cfg, with_pool=False):
    """``(train, val[, pool])``; all three are disjoint draws of one distribution."""
    src = cfg.dataset
    seed = derive_seed(cfg.master_seed, "dataset")
    if src.source == "blobs":
        train_set = _blob_draw(src, seed, src.per_class_n, "train")
        val_set = _blob_draw(src, seed, src.val_per_class_n or src.per_class_n, "val")
        if not with_pool:
            return train_set, val_set
        return train_set, val_set, _blob_draw(src, seed, cfg.attack["pool_per_class_n"], "pool")
    data = load_csv(src.path)
    if cfg.sample_shape is not None and math.prod(cfg.sample_shape) != data.dim:
        raise ValidationError(f"does not hold {data.dim} values", "sample_shape")
    train_set, rest = split(data, 1.0 - src.val_fraction, derive_seed(seed, "split"))
    if not with_pool:
        return train_set, rest
    val_set, pool = split(rest, 0.5, derive_seed(seed, "split-pool"))
    return train_set, val_set, pool


def _run_memorization(cfg, workers):
    train_set, val_set = _load_data(cfg)
    a = cfg.attack
    spec = _model_spec(cfg, train_set.dim, train_set.num_classes, train_set.domain)
    tcfg = _train_config(cfg, derive_seed(cfg.master_seed, "model"))
    secrets = SensitiveSelection.sample(train_set, a["num_secrets"], derive_seed(cfg.master_seed, "secrets"))
    points = []
    for i, r in enumerate(cfg.obfuscation.sweep):
        defense = IndividualParams(r, cfg.obfuscation.sigma) if r > 0 else None
        report = memorization_attack_eval(
            train_set, secrets, spec, tcfg, method=a["method"], defense=defense,
            bits_per_feature=a["bits_per_feature"], k_bits=a["k_bits"], sign_weight=a["sign_weight"],
            val_set=val_set, seed=derive_seed(cfg.master_seed, "defense", i),
            sample_shape=cfg.sample_shape, curve_every=cfg.train.curve_every)
        points.append(SweepPoint(r, report, report.aux["val_accuracy"]))
    return points, train_set.domain


def _run_membership(cfg, workers):
    members, non_members, pool = _load_data(cfg, with_pool=True)
    a = cfg.attack
    spec = _model_spec(cfg, members.dim, members.num_classes, members.domain)
    model_seed = derive_seed(cfg.master_seed, "model")
    tcfg = _train_config(cfg, model_seed)
    shadow_size = a["shadow_train_size"] or len(members)
    attack = membership_attack_train(spec, pool, a["n_shadow"], shadow_size, tcfg,
                                     derive_seed(cfg.master_seed, "shadows"), workers=workers,
                                     attack_epochs=a["attack_epochs"], attack_lr=a["attack_learning_rate"])
    ob = cfg.obfuscation
    selection = SensitiveSelection.fraction(members, ob.selection_ratio, derive_seed(cfg.master_seed, "sensitive"))
    points = []
    for i, r in enumerate(ob.sweep):
        data = members
        if r > 0:
            data = obfuscate_dataset_individual(members, selection, IndividualParams(r, ob.sigma),
                                                derive_seed(cfg.master_seed, "defense", i))
        target, curve = track_curve(init_model(spec, model_seed), data, non_members, tcfg,
                                    every=cfg.train.curve_every)
        report = membership_attack_eval(target, members, non_members, attack,
                                        config={"coord_ratio": r, "sigma": ob.sigma,
                                                "selection_ratio": ob.selection_ratio,
                                                "n_shadow": a["n_shadow"], "shadow_train_size": shadow_size})
        report.curve = curve
        report.aux["train_accuracy"] = curve.final[1]
        report.aux["val_accuracy"] = curve.final[2]
        points.append(SweepPoint(r, report, curve.final[2]))
    return points, members.domain


def _run_inversion(cfg, workers):
    train_set, val_set = _load_data(cfg)
    a = cfg.attack
    spec = _model_spec(cfg, train_set.dim, train_set.num_classes, train_set.domain)
    tcfg = _train_config(cfg, derive_seed(cfg.master_seed, "model"))
    points = []
    for i, r in enumerate(cfg.obfuscation.sweep):
        defense = GroupParams(r, cfg.obfuscation.sigma) if r > 0 else None
        report = inversion_attack_eval(train_set, a["label"], spec, tcfg, defense=defense, val_set=val_set,
                                       steps=a["steps"], step_size=a["step_size"],
                                       seed=derive_seed(cfg.master_seed, "defense", i),
                                       curve_every=cfg.train.curve_every)
        points.append(SweepPoint(r, report, report.aux["val_accuracy"]))
    return points, train_set.domain


def _family(d):
    return BlobFamily(d["num_classes"], d["dim"], d["per_class_n"], d["spread"], d["center_lo"],
                      d["center_hi"], tuple(d["domain"]), d["mixed_polarity"])


def _run_property(cfg, workers):
    a = cfg.attack
    fam_with = _family(cfg.dataset.with_property)
    fam_without = _family(cfg.dataset.without_property)
    spec = _model_spec(cfg, fam_with.dim, fam_with.num_classes, fam_with.domain)
    tcfg = _train_config(cfg, 0)
    master = cfg.master_seed
    f_with, _ = train_family_models(spec, fam_with, a["n_shadow_each"], tcfg,
                                    derive_seed(master, "shadows", "with"), workers=workers)
    f_without, _ = train_family_models(spec, fam_without, a["n_shadow_each"], tcfg,
                                       derive_seed(master, "shadows", "without"), workers=workers)
    attack = fit_property_classifier(f_with, f_without, derive_seed(master, "meta"), epochs=a["attack_epochs"])
    e_without, _ = train_family_models(spec, fam_without, a["n_eval_each"], tcfg,
                                       derive_seed(master, "eval", "without"), workers=workers)
    points = []
    for i, r in enumerate(cfg.obfuscation.sweep):
        defense = GroupParams(r, cfg.obfuscation.sigma) if r > 0 else None
        # same member seeds at every r: only the obfuscation differs
        e_with, accs, curves = train_family_models(spec, fam_with, a["n_eval_each"], tcfg,
                                                   derive_seed(master, "eval", "with"), defense=defense,
                                                   workers=workers, curve_every=cfg.train.curve_every)
        report = property_attack_eval(attack, e_with, e_without,
                                      config={"aug_ratio": r, "sigma": cfg.obfuscation.sigma,
                                              "n_shadow_each": a["n_shadow_each"], "n_eval_each": a["n_eval_each"]},
                                      aux={"val_accuracy_median": float(np.median(accs)),
                                           "val_accuracies": accs.tolist()})
        report.curve = curves[0]
        points.append(SweepPoint(r, report, float(np.median(accs))))
    return points, fam_with.domain


_PIPELINES = {
    "memorization": _run_memorization,
    "membership": _run_membership,
    "inversion": _run_inversion,
    "property": _run_property,
}


def run_experiment(cfg, out_dir=None, workers=None):
    """Run every sweep point of ``cfg``; write outputs when ``out_dir`` (or ``cfg.output_dir``) is set."""
    start = time.perf_counter()
    points, domain = _PIPELINES[cfg.scenario](cfg, workers)
    baseline = next(p for p in points if p.r == 0).val_accuracy
    for p in points:
        p.delta_accuracy = baseline - p.val_accuracy
    report = RunReport(cfg.to_dict(), points, domain=tuple(domain))
    report.wall_clock_seconds = time.perf_counter() - start
    out_dir = out_dir or cfg.output_dir
    if out_dir:
        write_run(report, out_dir, cfg.sample_shape)
    return report


def _image_shape(values, sample_shape):
    if sample_shape is not None and len(sample_shape) == 2:
        return tuple(sample_shape)
    side = math.isqrt(values.shape[-1])
    return (side, side) if side * side == values.shape[-1] else (1, values.shape[-1])


def write_run(report, out_dir, sample_shape=None):
    """``report.json``, ``curves.csv`` and one PGM per attacker-view artifact row."""
    art_dir = os.path.join(out_dir, "artifacts")
    os.makedirs(art_dir, exist_ok=True)
    with open(os.path.join(out_dir, "report.json"), "w") as fh:
        fh.write(report.to_json())
    with open(os.path.join(out_dir, "curves.csv"), "w") as fh:
        fh.write(report.curves_csv())
    for i, p in enumerate(report.points):
        for name, arr in p.report.artifacts.items():
            rows = np.atleast_2d(np.asarray(arr, dtype=np.float64))
            h, w = _image_shape(rows, sample_shape)
            for j, row in enumerate(rows):
                save_pgm(row, os.path.join(art_dir, f"point{i}_{name}_{j}.pgm"), h, w, report.domain)


def load_report(run_dir):
    path = os.path.join(run_dir, "report.json")
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise ValidationError(f"no report at {path}", "run") from None
