"""Model inversion: recover a class's average input by confidence ascent."""

import numpy as np

from obfuskit.attacks.report import AttackReport
from obfuskit.dataset import GroupSpec, class_mean
from obfuskit.errors import ValidationError
from obfuskit.metrics import cosine_similarity, mse, track_curve
from obfuskit.models import init_model, log_proba_input_gradient
from obfuskit.obfuscate import obfuscate_dataset_groups

DEFAULT_STEPS = 500
DEFAULT_STEP_SIZE = 0.05
MAX_HALVINGS = 30


def invert_class(model, label, steps=DEFAULT_STEPS, step_size=DEFAULT_STEP_SIZE, init=None):
    """Projected gradient ascent on ``log p_label(x)`` inside the domain box.

    ``step_size`` is in normalized units (domain width = 1). A step that
    would lower the objective is halved until it does not, so the returned
    point is never less confident than ``init`` (the domain midpoint by
    default). Stops early when no halving helps.
    """
    spec = model.spec
    if not 0 <= label < spec.num_classes:
        raise ValidationError(f"class {label} outside [0, {spec.num_classes})", "label")
    if steps < 1:
        raise ValidationError("must be >= 1", "steps")
    lo, hi = spec.domain
    width = hi - lo
    if init is None:
        x = np.full(spec.input_dim, 0.5 * (lo + hi))
    else:
        x = np.array(init, dtype=np.float64).reshape(-1)
        if x.size != spec.input_dim or x.min() < lo or x.max() > hi:
            raise ValidationError("init must be a point of the domain box", "init")
    f, g = log_proba_input_gradient(model, x, label)
    for _ in range(steps):
        # gradient w.r.t. normalized input, step taken in normalized units
        direction = g * width
        eta = step_size
        for _ in range(MAX_HALVINGS):
            cand = np.clip(x + eta * width * direction, lo, hi)
            f_new, g_new = log_proba_input_gradient(model, cand, label)
            if f_new >= f:
                break
            eta *= 0.5
        else:
            break
        if np.array_equal(cand, x):
            break
        x, f, g = cand, f_new, g_new
    return x


def inversion_attack_eval(train_set, label, spec, cfg, *, defense=None, val_set=None,
                          steps=DEFAULT_STEPS, step_size=DEFAULT_STEP_SIZE, seed=0, curve_every=None):
    """Train on (optionally group-obfuscated) data, invert ``label``, compare.

    Similarity is the cosine between inversion and the ORIGINAL class mean,
    both centered on the domain midpoint.
    """
    truth = class_mean(train_set, label)
    data = train_set
    if defense is not None:
        data = obfuscate_dataset_groups(train_set, [GroupSpec.by_label(label)], defense, seed)
    val = val_set if val_set is not None else train_set
    model, curve = track_curve(init_model(spec, cfg.seed), data, val, cfg,
                               every=curve_every or max(1, cfg.epochs // 20))
    inverted = invert_class(model, label, steps, step_size)
    mid = 0.5 * (train_set.domain[0] + train_set.domain[1])
    centered = inverted - mid
    similarity = cosine_similarity(centered, truth - mid) if np.any(centered) else 0.0
    aux = {
        "cosine_similarity": similarity,
        "mse": mse(inverted, truth),
        "train_accuracy": curve.final[1],
        "val_accuracy": curve.final[2],
        "augmented_size": len(data),
    }
    config = {"label": int(label), "steps": steps, "step_size": step_size,
              "defense": None if defense is None else {"aug_ratio": defense.aug_ratio, "sigma": defense.sigma}}
    return AttackReport("inversion", aux=aux, config=config,
                        artifacts={"inverted": inverted, "class_mean": truth}, curve=curve)
