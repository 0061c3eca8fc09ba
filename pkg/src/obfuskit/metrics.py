"""Confusion matrices, F1, similarity measures and accuracy curves."""

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from obfuskit.errors import ValidationError


@dataclass(frozen=True)
class ConfusionMatrix:
    """Binary counts with "in" / "with-property" as the positive class.

    ``multiclass`` optionally carries a k x k count matrix (rows = actual).
    """

    tp: int
    fn: int
    fp: int
    tn: int
    multiclass: tuple = field(default=None, compare=False)

    def __post_init__(self):
        for name in ("tp", "fn", "fp", "tn"):
            if getattr(self, name) < 0:
                raise ValidationError("counts must be >= 0", name)

    @classmethod
    def from_rates(cls, tp_rate, fn_rate, fp_rate, tn_rate, per_class=10000):
        """Counts from a row-normalized (rate-form) table, balanced classes.

        Rows are (actual in: tp, fn) and (actual out: fp, tn), as printed in
        results tables.
        """
        def count(rate):
            return int(round(rate * per_class))

        return cls(count(tp_rate), count(fn_rate), count(fp_rate), count(tn_rate))

    @property
    def total(self):
        return self.tp + self.fn + self.fp + self.tn

    def rates(self):
        """Row-normalized ``(tp, fn, fp, tn)`` rates."""
        pos = self.tp + self.fn
        neg = self.fp + self.tn
        return (
            self.tp / pos if pos else 0.0,
            self.fn / pos if pos else 0.0,
            self.fp / neg if neg else 0.0,
            self.tn / neg if neg else 0.0,
        )

    def to_dict(self):
        out = {"tp": self.tp, "fn": self.fn, "fp": self.fp, "tn": self.tn}
        if self.multiclass is not None:
            out["multiclass"] = [list(r) for r in self.multiclass]
        return out


def confusion_binary(predictions, labels):
    predictions = np.asarray(predictions).astype(bool).reshape(-1)
    labels = np.asarray(labels).astype(bool).reshape(-1)
    if predictions.shape != labels.shape:
        raise ValidationError("predictions and labels differ in length", "predictions")
    if predictions.size == 0:
        raise ValidationError("empty input", "predictions")
    return ConfusionMatrix(
        tp=int(np.sum(predictions & labels)),
        fn=int(np.sum(~predictions & labels)),
        fp=int(np.sum(predictions & ~labels)),
        tn=int(np.sum(~predictions & ~labels)),
    )


def confusion_multiclass(predictions, labels, num_classes):
    m = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(m, (np.asarray(labels), np.asarray(predictions)), 1)
    return m


def precision(cm):
    denom = cm.tp + cm.fp
    return cm.tp / denom if denom else 0.0


def recall(cm):
    denom = cm.tp + cm.fn
    return cm.tp / denom if denom else 0.0


def f1(cm):
    """2PR / (P + R); 0 when there are no true positives."""
    if cm.tp + cm.fp + cm.fn == 0:
        raise ValidationError("F1 undefined: no positives predicted or present", "confusion")
    if cm.tp == 0:
        return 0.0
    return 2.0 * cm.tp / (2.0 * cm.tp + cm.fp + cm.fn)


def balanced_accuracy(cm):
    tpr, _, _, tnr = cm.rates()
    return 0.5 * (tpr + tnr)


def cosine_similarity(a, b):
    a = np.asarray(a, dtype=np.float64).reshape(-1)
    b = np.asarray(b, dtype=np.float64).reshape(-1)
    if a.shape != b.shape:
        raise ValidationError("vectors differ in length", "b")
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise ValidationError("cosine similarity of a zero vector", "a" if na == 0 else "b")
    return float(np.clip(a @ b / (na * nb), -1.0, 1.0))


def mse(a, b):
    a = np.asarray(a, dtype=np.float64).reshape(-1)
    b = np.asarray(b, dtype=np.float64).reshape(-1)
    if a.shape != b.shape:
        raise ValidationError("vectors differ in length", "b")
    return float(np.mean((a - b) ** 2))


@dataclass
class AccuracyCurve:
    """Per-epoch (epoch, train accuracy, validation accuracy) points."""

    points: list = field(default_factory=list)

    def add(self, epoch, train_acc, val_acc):
        if self.points and epoch <= self.points[-1][0]:
            raise ValidationError("epochs must be strictly increasing", "epoch")
        for name, v in (("train_acc", train_acc), ("val_acc", val_acc)):
            if not 0 <= v <= 1:
                raise ValidationError("accuracy outside [0, 1]", name)
        self.points.append((int(epoch), float(train_acc), float(val_acc)))

    def __len__(self):
        return len(self.points)

    @property
    def final(self):
        return self.points[-1] if self.points else None

    def to_dict(self):
        return [{"epoch": e, "train": t, "val": v} for e, t, v in self.points]

    def to_csv(self, label=None):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        header = ["epoch", "train", "val"]
        writer.writerow(header if label is None else ["sweep"] + header)
        for e, t, v in self.points:
            row = [e, repr(t), repr(v)]
            writer.writerow(row if label is None else [label] + row)
        return buf.getvalue()


def track_curve(model, train_set, val_set, cfg, every=1):
    """Train while recording accuracy after each epoch.

    Returns ``(trained_model, AccuracyCurve)``. ``every`` thins the curve to
    every n-th epoch (the last epoch is always recorded).
    """
    from obfuskit.models import accuracy, train

    curve = AccuracyCurve()

    def hook(epoch, snapshot):
        if epoch % every == 0 or epoch == cfg.epochs:
            curve.add(epoch, accuracy(snapshot, train_set), accuracy(snapshot, val_set))

    trained = train(model, train_set, cfg, callback=hook)
    return trained, curve
