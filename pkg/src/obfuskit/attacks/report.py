"""Result carrier shared by all attack evaluations."""

import json
from dataclasses import dataclass, field

import numpy as np

from obfuskit.metrics import ConfusionMatrix, balanced_accuracy, f1


def _plain(value):
    # numpy scalars/arrays -> JSON-native values
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return _plain(value.tolist())
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.bool_):
        return bool(value)
    return value


@dataclass
class AttackReport:
    """Outcome of one attack run.

    ``aux`` holds scalar side metrics (bit recovery, cosine similarity,
    accuracies); ``artifacts`` holds the attacker's view (recovered samples,
    inversions) as arrays, which are exported separately from the JSON.
    """

    attack: str
    confusion: ConfusionMatrix = None
    aux: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)
    artifacts: dict = field(default_factory=dict)
    curve: object = None

    @property
    def f1(self):
        if self.confusion is None or self.confusion.tp + self.confusion.fp + self.confusion.fn == 0:
            return None
        return f1(self.confusion)

    @property
    def balanced_accuracy(self):
        return None if self.confusion is None else balanced_accuracy(self.confusion)

    def to_dict(self, include_artifacts=True):
        out = {
            "attack": self.attack,
            "confusion": None if self.confusion is None else self.confusion.to_dict(),
            "f1": self.f1,
            "balanced_accuracy": self.balanced_accuracy,
            "aux": _plain(self.aux),
            "config": _plain(self.config),
        }
        if include_artifacts:
            out["artifacts"] = _plain(self.artifacts)
        if self.curve is not None:
            out["curve"] = self.curve.to_dict()
        return out

    def to_json(self, **kw):
        return json.dumps(self.to_dict(**kw), sort_keys=True, indent=2)
