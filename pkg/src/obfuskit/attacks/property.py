"""Property inference ("model classification") from parameter statistics.

The attacker summarizes each model by the mean and population standard
deviation of every parameter group and trains a logistic meta-classifier
to tell models trained on a with-property data family (label 1) from
models trained on a without-property family (label 0).
"""

from dataclasses import dataclass

import numpy as np

from obfuskit.attacks.logistic import LogisticModel, fit_logistic
from obfuskit.attacks.report import AttackReport
from obfuskit.dataset import GroupSpec, gen_blobs, split
from obfuskit.errors import ValidationError
from obfuskit.metrics import confusion_binary, track_curve
from obfuskit.models import TrainConfig, accuracy, init_model, train
from obfuskit.obfuscate import negative, obfuscate_dataset_groups
from obfuskit.parallel import parallel_map
from obfuskit.seeding import derive_seed

DEFAULT_SHADOWS_PER_FAMILY = 40
TRAIN_FRACTION = 0.75


def model_feature(model):
    """``[mean_0, std_0, mean_1, std_1, ...]`` over parameter groups in order."""
    out = []
    for arr in model.params.values():
        out.extend((float(arr.mean()), float(arr.std())))
    return np.array(out)


@dataclass(frozen=True)
class BlobFamily:
    """Picklable generator of fresh blob datasets sharing one center layout rule.

    Each draw picks new class centers uniformly in ``[center_lo, center_hi]``
    (a sub-box of the domain), so the family property is the intensity
    layout rather than any specific set of centers. With ``mixed_polarity``
    every sample is independently inverted (``lo + hi - x``) with
    probability 1/2, like a corpus mixing dark-on-light and light-on-dark
    images.
    """

    num_classes: int
    dim: int
    per_class_n: int
    spread: float
    center_lo: float
    center_hi: float
    domain: tuple = (0.0, 255.0)
    mixed_polarity: bool = False

    def __call__(self, seed):
        rng = np.random.default_rng(derive_seed(seed, "family-centers"))
        centers = rng.uniform(self.center_lo, self.center_hi, size=(self.num_classes, self.dim))
        data = gen_blobs(self.num_classes, self.dim, self.per_class_n, seed, self.spread,
                         self.domain, centers=centers, name="family")
        if not self.mixed_polarity:
            return data
        flip = np.random.default_rng(derive_seed(seed, "family-flip")).random(len(data)) < 0.5
        feats = np.array(data.features)
        feats[flip] = negative(feats[flip], self.domain)
        return data.replace(features=feats)

    def to_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


@dataclass
class PropertyAttackModel:
    classifier: LogisticModel
    num_groups: int

    def predict(self, features):
        features = np.atleast_2d(features)
        if features.shape[1] != 2 * self.num_groups:
            raise ValidationError(f"feature length must be {2 * self.num_groups}", "features")
        return self.classifier.predict(features)


def _train_family_member(task):
    spec, family, cfg, seed, defense, curve_every = task
    data = family(derive_seed(seed, "data"))
    train_set, val_set = split(data, TRAIN_FRACTION, derive_seed(seed, "split"))
    if defense is not None:
        train_set = obfuscate_dataset_groups(train_set, [GroupSpec.whole()], defense,
                                             derive_seed(seed, "defense"))
    model_seed = derive_seed(seed, "model")
    member_cfg = TrainConfig(cfg.epochs, cfg.batch_size, cfg.learning_rate, model_seed)
    curve = None
    if curve_every:
        model, curve = track_curve(init_model(spec, model_seed), train_set, val_set, member_cfg, curve_every)
    else:
        model = train(init_model(spec, model_seed), train_set, member_cfg)
    return model_feature(model), accuracy(model, val_set), curve


def train_family_models(spec, family, n, cfg, seed, defense=None, workers=None, curve_every=None):
    """Train ``n`` models on independent family draws.

    Returns ``(features (n x 2G), validation accuracies)``. With ``defense``
    each training set is augmented with whole-dataset negatives first;
    validation data stays clean. With ``curve_every`` the accuracy curve of
    each model is returned as a third element.
    """
    tasks = [(spec, family, cfg, derive_seed(seed, "member", i), defense, curve_every) for i in range(n)]
    results = parallel_map(_train_family_member, tasks, workers)
    feats = np.array([r[0] for r in results])
    accs = np.array([r[1] for r in results])
    if curve_every:
        return feats, accs, [r[2] for r in results]
    return feats, accs


def property_attack_train(spec, family_with, family_without, n_each, cfg, seed, workers=None,
                          attack_epochs=300, attack_lr=0.1):
    if n_each < 2:
        raise ValidationError("need at least 2 shadow models per family", "n_each")
    f_with, _ = train_family_models(spec, family_with, n_each, cfg, derive_seed(seed, "with"), workers=workers)
    f_without, _ = train_family_models(spec, family_without, n_each, cfg, derive_seed(seed, "without"),
                                       workers=workers)
    return fit_property_classifier(f_with, f_without, seed, attack_epochs, attack_lr)


def fit_property_classifier(features_with, features_without, seed, epochs=300, lr=0.1):
    X = np.concatenate([features_with, features_without])
    y = np.concatenate([np.ones(len(features_with)), np.zeros(len(features_without))])
    clf = fit_logistic(X, y, derive_seed(seed, "meta"), epochs=epochs, lr=lr, batch_size=16)
    return PropertyAttackModel(clf, X.shape[1] // 2)


def property_attack_eval(attack, features_with, features_without, config=None, aux=None):
    """Confusion matrix with "with-property" as the positive class."""
    if len(features_with) == 0 or len(features_without) == 0:
        raise ValidationError("evaluation model sets must be non-empty", "models")
    pred = np.concatenate([attack.predict(features_with), attack.predict(features_without)])
    truth = np.concatenate([np.ones(len(features_with), bool), np.zeros(len(features_without), bool)])
    cm = confusion_binary(pred, truth)
    report = AttackReport("property", confusion=cm, config=dict(config or {}), aux=dict(aux or {}))
    report.aux["with_recall"] = float(pred[truth].mean())
    report.aux["with_classified_without"] = float(1.0 - pred[truth].mean())
    report.aux["without_false_positive_rate"] = float(pred[~truth].mean())
    return report
