"""Membership inference via shadow models.

The attacker trains shadow copies of the target's learner on data it owns,
records their confidence vectors on their own training ("in", 1) and
held-out ("out", 0) samples, and fits one logistic classifier per true
class on those vectors.
"""

from dataclasses import dataclass

import numpy as np

from obfuskit.attacks.logistic import fit_logistic, sigmoid
from obfuskit.attacks.report import AttackReport
from obfuskit.errors import ValidationError
from obfuskit.metrics import confusion_binary
from obfuskit.models import TrainConfig, init_model, predict_proba, train
from obfuskit.parallel import parallel_map
from obfuskit.seeding import derive_seed, make_rng

DEFAULT_SHADOWS = 30


@dataclass
class MembershipAttackModel:
    """Per-class linear classifiers over the target's confidence vector.

    ``weights[c]`` / ``biases[c]`` score samples whose true label is ``c``.
    """

    weights: np.ndarray
    biases: np.ndarray
    pair_counts: np.ndarray = None

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.biases = np.asarray(self.biases, dtype=np.float64)
        C = self.biases.shape[0]
        if self.weights.shape != (C, C):
            raise ValidationError(f"weights must be {C}x{C}", "weights")
        if not (np.all(np.isfinite(self.weights)) and np.all(np.isfinite(self.biases))):
            raise ValidationError("attack weights must be finite", "weights")

    @property
    def num_classes(self):
        return self.biases.shape[0]

    def score(self, confidences, labels):
        """P(member) for each (confidence vector, true label) row."""
        confidences = np.atleast_2d(confidences)
        labels = np.asarray(labels, dtype=np.int64).reshape(-1)
        z = np.einsum("ij,ij->i", confidences, self.weights[labels]) + self.biases[labels]
        return sigmoid(z)


def _shadow_pairs(task):
    spec, pool, size, cfg, seed, i = task
    rng = make_rng(seed, "shadow-draw", i)
    idx = rng.choice(len(pool), size=2 * size, replace=False)
    inside, outside = pool.subset(idx[:size]), pool.subset(idx[size:])
    shadow_seed = derive_seed(seed, "shadow-model", i)
    shadow_cfg = TrainConfig(cfg.epochs, cfg.batch_size, cfg.learning_rate, shadow_seed)
    model = train(init_model(spec, shadow_seed), inside, shadow_cfg)
    X = np.concatenate([predict_proba(model, inside.features), predict_proba(model, outside.features)])
    y = np.concatenate([inside.labels, outside.labels])
    member = np.concatenate([np.ones(size), np.zeros(size)])
    return X, y, member


def collect_shadow_data(target_spec, pool, n_shadow, shadow_train_size, cfg, seed, workers=None):
    """Confidence vectors, true labels and in/out flags from all shadows."""
    if n_shadow < 1:
        raise ValidationError("need at least one shadow model", "n_shadow")
    if shadow_train_size < 1 or 2 * shadow_train_size > len(pool):
        raise ValidationError(
            f"pool of {len(pool)} cannot supply 2 x {shadow_train_size} samples per shadow", "pool")
    tasks = [(target_spec, pool, shadow_train_size, cfg, seed, i) for i in range(n_shadow)]
    parts = parallel_map(_shadow_pairs, tasks, workers)
    return (np.concatenate([p[0] for p in parts]),
            np.concatenate([p[1] for p in parts]),
            np.concatenate([p[2] for p in parts]))


def membership_attack_train(target_spec, pool, n_shadow, shadow_train_size, cfg, seed,
                            workers=None, attack_epochs=100, attack_lr=0.1):
    """Train shadows on draws from ``pool`` and fit the per-class attack models."""
    X, y, member = collect_shadow_data(target_spec, pool, n_shadow, shadow_train_size, cfg, seed, workers)
    C = target_spec.num_classes
    weights = np.zeros((C, C))
    biases = np.zeros(C)
    counts = np.zeros(C, dtype=np.int64)
    for c in range(C):
        rows = y == c
        counts[c] = int(rows.sum())
        if counts[c] == 0 or np.all(member[rows] == member[rows][0]):
            # no usable pairs: fall back to the class's base rate
            rate = member[rows].mean() if counts[c] else 0.5
            biases[c] = np.log((rate + 1e-6) / (1 - rate + 1e-6))
            continue
        model = fit_logistic(X[rows], member[rows], derive_seed(seed, "attack", c),
                             epochs=attack_epochs, lr=attack_lr)
        weights[c], biases[c] = model.folded()
    return MembershipAttackModel(weights, biases, counts)


def membership_infer(attack, target, sample, label):
    """True ("in") when the class-``label`` classifier scores >= 0.5."""
    conf = predict_proba(target, sample)
    return bool(attack.score(conf, [label])[0] >= 0.5)


def membership_attack_eval(target, members, non_members, attack, config=None):
    """Confusion matrix with "in" as positive, plus per-class accuracies."""
    if len(members) == 0 or len(non_members) == 0:
        raise ValidationError("member and non-member sets must be non-empty", "members")
    conf = np.concatenate([predict_proba(target, members.features), predict_proba(target, non_members.features)])
    labels = np.concatenate([members.labels, non_members.labels])
    truth = np.concatenate([np.ones(len(members), bool), np.zeros(len(non_members), bool)])
    pred = attack.score(conf, labels) >= 0.5
    per_class = {}
    for c in range(attack.num_classes):
        rows = labels == c
        if rows.any():
            per_class[c] = float(np.mean(pred[rows] == truth[rows]))
    cm = confusion_binary(pred, truth)
    report = AttackReport("membership", confusion=cm, config=dict(config or {}))
    report.aux.update({
        "balanced_accuracy": report.balanced_accuracy,
        "per_class_accuracy": per_class,
        "member_in_rate": float(pred[truth].mean()),
        "non_member_in_rate": float(pred[~truth].mean()),
    })
    return report
