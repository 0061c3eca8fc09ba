"""Experiment configuration: one strict JSON document per run.

Unknown keys, wrong types and out-of-range values raise ``ValidationError``
with a dotted field path (``obfuscation.sweep[2]``).
"""

import json
import math
from dataclasses import asdict, dataclass, field

from obfuskit.errors import ValidationError
from obfuskit.models import MLP, RELU, SIGMOID, SOFTMAX

SCENARIOS = ("memorization", "membership", "inversion", "property")
INDIVIDUAL = "individual"
GROUP = "group"
_REQUIRED = object()


class _Reader:
    """Pulls typed fields out of a JSON object and remembers what was read."""

    def __init__(self, obj, path):
        if not isinstance(obj, dict):
            raise ValidationError("expected a JSON object", path or "config")
        self.obj = obj
        self.path = path
        self.seen = set()

    def _where(self, key):
        return f"{self.path}.{key}" if self.path else key

    def _get(self, key, default):
        self.seen.add(key)
        if key in self.obj:
            return self.obj[key]
        if default is _REQUIRED:
            raise ValidationError("missing required field", self._where(key))
        return default

    def number(self, key, default=_REQUIRED, lo=None, hi=None, integer=False):
        value = self._get(key, default)
        if value is default and default is not _REQUIRED:
            return value
        return _check_number(value, self._where(key), lo, hi, integer)

    def integer(self, key, default=_REQUIRED, lo=None, hi=None):
        return self.number(key, default, lo, hi, integer=True)

    def string(self, key, default=_REQUIRED, choices=None):
        value = self._get(key, default)
        if value is default and default is not _REQUIRED:
            return value
        if not isinstance(value, str):
            raise ValidationError(f"expected a string, got {value!r}", self._where(key))
        if choices is not None and value not in choices:
            raise ValidationError(f"must be one of {', '.join(choices)}; got {value!r}", self._where(key))
        return value

    def boolean(self, key, default=_REQUIRED):
        value = self._get(key, default)
        if not isinstance(value, bool):
            raise ValidationError(f"expected true/false, got {value!r}", self._where(key))
        return value

    def numbers(self, key, default=_REQUIRED, lo=None, hi=None, integer=False, length=None):
        value = self._get(key, default)
        if value is default and default is not _REQUIRED:
            return value
        where = self._where(key)
        if not isinstance(value, list) or not value:
            raise ValidationError("expected a non-empty list", where)
        if length is not None and len(value) != length:
            raise ValidationError(f"expected {length} values", where)
        return tuple(_check_number(v, f"{where}[{i}]", lo, hi, integer) for i, v in enumerate(value))

    def sub(self, key, default=_REQUIRED):
        return _Reader(self._get(key, default), self._where(key))

    def finish(self):
        extra = sorted(set(self.obj) - self.seen)
        if extra:
            raise ValidationError("unknown field", self._where(extra[0]))


def _check_number(value, where, lo, hi, integer):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValidationError(f"expected a number, got {value!r}", where)
    if integer and not isinstance(value, int):
        raise ValidationError(f"expected an integer, got {value!r}", where)
    if not math.isfinite(value):
        raise ValidationError("must be finite", where)
    if lo is not None and value < lo:
        raise ValidationError(f"must be >= {lo}, got {value}", where)
    if hi is not None and value > hi:
        raise ValidationError(f"must be <= {hi}, got {value}", where)
    return value if integer else float(value)


@dataclass(frozen=True)
class BlobSource:
    num_classes: int
    dim: int
    per_class_n: int
    spread: float
    domain: tuple = (0.0, 255.0)
    layout: str = "uniform"
    center_lo: float = None
    center_hi: float = None
    amplitudes: tuple = None
    val_per_class_n: int = None
    source: str = "blobs"


@dataclass(frozen=True)
class FileSource:
    path: str
    val_fraction: float = 0.25
    source: str = "file"


@dataclass(frozen=True)
class FamilySource:
    with_property: dict
    without_property: dict
    source: str = "families"


@dataclass(frozen=True)
class ModelConfig:
    architecture: str = SOFTMAX
    hidden_width: int = 0
    activation: str = RELU
    reg_weight: float = 0.0


@dataclass(frozen=True)
class TrainSettings:
    epochs: int = 50
    batch_size: int = 32
    learning_rate: float = 0.1
    curve_every: int = 1


@dataclass(frozen=True)
class ObfuscationConfig:
    mode: str
    sweep: tuple
    sigma: float
    selection_ratio: float = 1.0


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: str
    master_seed: int
    dataset: object
    model: ModelConfig
    train: TrainSettings
    obfuscation: ObfuscationConfig
    attack: dict = field(default_factory=dict)
    sample_shape: tuple = None
    output_dir: str = None

    def to_dict(self):
        out = asdict(self)
        if isinstance(self.dataset, FamilySource):
            out["dataset"] = {"source": "families", "with": self.dataset.with_property,
                              "without": self.dataset.without_property}
        return out


def _parse_blobs(r):
    num_classes = r.integer("num_classes", lo=2)
    dim = r.integer("dim", lo=1)
    domain = r.numbers("domain", (0.0, 255.0), length=2)
    if domain[0] >= domain[1]:
        raise ValidationError("lo must be < hi", f"{r.path}.domain")
    domain = tuple(float(v) for v in domain)
    layout = r.string("layout", "uniform", ("uniform", "signed"))
    src = dict(num_classes=num_classes, dim=dim, per_class_n=r.integer("per_class_n", lo=1),
               spread=r.number("spread", lo=0), domain=domain, layout=layout,
               val_per_class_n=r.integer("val_per_class_n", None, lo=1))
    if layout == "uniform":
        src["center_lo"] = r.number("center_lo", domain[0], lo=domain[0], hi=domain[1])
        src["center_hi"] = r.number("center_hi", domain[1], lo=src["center_lo"], hi=domain[1])
    else:
        amps = r.numbers("amplitudes", lo=0, hi=0.5 * (domain[1] - domain[0]))
        if len(amps) != num_classes:
            raise ValidationError(f"need one amplitude per class ({num_classes})", f"{r.path}.amplitudes")
        src["amplitudes"] = tuple(float(a) for a in amps)
    return BlobSource(**src)


def _parse_family(r):
    domain = tuple(float(v) for v in r.numbers("domain", (0.0, 255.0), length=2))
    if domain[0] >= domain[1]:
        raise ValidationError("lo must be < hi", f"{r.path}.domain")
    fam = {
        "num_classes": r.integer("num_classes", lo=2),
        "dim": r.integer("dim", lo=1),
        "per_class_n": r.integer("per_class_n", lo=2),
        "spread": r.number("spread", lo=0),
        "center_lo": r.number("center_lo", domain[0], lo=domain[0], hi=domain[1]),
        "center_hi": r.number("center_hi", domain[1], lo=domain[0], hi=domain[1]),
        "domain": list(domain),
        "mixed_polarity": r.boolean("mixed_polarity", False),
    }
    if fam["center_lo"] > fam["center_hi"]:
        raise ValidationError("must be >= center_lo", f"{r.path}.center_hi")
    r.finish()
    return fam


def _parse_dataset(r, scenario):
    source = r.string("source", choices=("blobs", "file", "families"))
    if (source == "families") != (scenario == "property"):
        raise ValidationError("property runs need source 'families'; other scenarios cannot use it",
                              f"{r.path}.source")
    if source == "blobs":
        out = _parse_blobs(r)
    elif source == "file":
        out = FileSource(r.string("path"), r.number("val_fraction", 0.25, lo=0.01, hi=0.99))
    else:
        w, wo = _parse_family(r.sub("with")), _parse_family(r.sub("without"))
        for key in ("num_classes", "dim", "domain"):
            if w[key] != wo[key]:
                raise ValidationError("families must agree", f"{r.path}.without.{key}")
        out = FamilySource(w, wo)
    r.finish()
    return out


def _parse_model(r):
    arch = r.string("architecture", SOFTMAX, (SOFTMAX, MLP))
    out = ModelConfig(
        architecture=arch,
        hidden_width=r.integer("hidden_width", 0 if arch == SOFTMAX else _REQUIRED, lo=0),
        activation=r.string("activation", RELU, (RELU, SIGMOID)),
        reg_weight=r.number("reg_weight", 0.0, lo=0),
    )
    if arch == MLP and out.hidden_width < 1:
        raise ValidationError("an mlp needs hidden_width >= 1", f"{r.path}.hidden_width")
    r.finish()
    return out


def _parse_train(r):
    out = TrainSettings(
        epochs=r.integer("epochs", 50, lo=1),
        batch_size=r.integer("batch_size", 32, lo=1),
        learning_rate=r.number("learning_rate", 0.1),
        curve_every=r.integer("curve_every", 1, lo=1),
    )
    if out.learning_rate <= 0:
        raise ValidationError("must be > 0", f"{r.path}.learning_rate")
    r.finish()
    return out


_SCENARIO_MODE = {"memorization": INDIVIDUAL, "membership": INDIVIDUAL,
                  "inversion": GROUP, "property": GROUP}


def _parse_obfuscation(r, scenario):
    mode = r.string("mode", _SCENARIO_MODE[scenario], (INDIVIDUAL, GROUP))
    if mode != _SCENARIO_MODE[scenario]:
        raise ValidationError(f"{scenario} runs use {_SCENARIO_MODE[scenario]} obfuscation", f"{r.path}.mode")
    sweep = r.numbers("sweep", lo=0, hi=1 if mode == INDIVIDUAL else None)
    if len(set(sweep)) != len(sweep):
        raise ValidationError("duplicate sweep values", f"{r.path}.sweep")
    if 0 not in sweep:
        sweep = (0.0,) + sweep
    sigma = r.number("sigma", _REQUIRED if mode == INDIVIDUAL else 5.0, lo=0)
    # only membership noises a random subset; the other scenarios fix their sensitive data
    selection_ratio = r.number("selection_ratio", 1.0, lo=0, hi=1) if scenario == "membership" else 1.0
    r.finish()
    return ObfuscationConfig(mode, tuple(float(v) for v in sweep), sigma, selection_ratio)


_ATTACK_FIELDS = {
    "memorization": lambda r: {
        "method": r.string("method", "lsb", ("lsb", "sign")),
        "bits_per_feature": r.integer("bits_per_feature", 8, lo=1, hi=8),
        "k_bits": r.integer("k_bits", 16, lo=1, hi=20),
        "sign_weight": r.number("sign_weight", 10.0, lo=0),
        "num_secrets": r.integer("num_secrets", 1, lo=1),
    },
    "membership": lambda r: {
        "n_shadow": r.integer("n_shadow", 30, lo=1),
        "pool_per_class_n": r.integer("pool_per_class_n", _REQUIRED, lo=1),
        "shadow_train_size": r.integer("shadow_train_size", None, lo=1),
        "attack_epochs": r.integer("attack_epochs", 100, lo=1),
        "attack_learning_rate": r.number("attack_learning_rate", 0.1, lo=0),
    },
    "inversion": lambda r: {
        "label": r.integer("label", 0, lo=0),
        "steps": r.integer("steps", 500, lo=1),
        "step_size": r.number("step_size", 0.05, lo=0),
    },
    "property": lambda r: {
        "n_shadow_each": r.integer("n_shadow_each", 40, lo=2),
        "n_eval_each": r.integer("n_eval_each", 20, lo=1),
        "attack_epochs": r.integer("attack_epochs", 300, lo=1),
    },
}


def parse_config(obj):
    """Validate a decoded JSON object and build an ``ExperimentConfig``."""
    r = _Reader(obj, "")
    scenario = r.string("scenario", choices=SCENARIOS)
    cfg = ExperimentConfig(
        scenario=scenario,
        master_seed=r.integer("master_seed", 0, lo=0),
        dataset=_parse_dataset(r.sub("dataset"), scenario),
        model=_parse_model(r.sub("model", {})),
        train=_parse_train(r.sub("train", {})),
        obfuscation=_parse_obfuscation(r.sub("obfuscation"), scenario),
        attack=_parse_attack(r.sub("attack", {}), scenario),
        sample_shape=_parse_shape(r),
        output_dir=r.string("output_dir", None),
    )
    r.finish()
    _check_consistency(cfg)
    return cfg


def _parse_attack(r, scenario):
    out = _ATTACK_FIELDS[scenario](r)
    r.finish()
    return out


def _parse_shape(r):
    shape = r.numbers("sample_shape", None, lo=1, integer=True)
    return None if shape is None else tuple(shape)


def _check_consistency(cfg):
    ds = cfg.dataset
    if isinstance(ds, BlobSource):
        if cfg.sample_shape is not None and math.prod(cfg.sample_shape) != ds.dim:
            raise ValidationError(f"does not hold {ds.dim} values", "sample_shape")
        if cfg.scenario == "inversion" and cfg.attack["label"] >= ds.num_classes:
            raise ValidationError(f"no class {cfg.attack['label']}", "attack.label")


def load_config(path):
    try:
        with open(path) as fh:
            obj = json.load(fh)
    except FileNotFoundError:
        raise ValidationError(f"no such file: {path}", "config") from None
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path} is not valid JSON ({exc})", "config") from None
    return parse_config(obj)


def parse_train_spec(obj):
    """``{model fields..., "train": {...}, "seed": n}`` for the ``train`` subcommand."""
    r = _Reader(obj, "")
    train = _parse_train(r.sub("train", {}))
    seed = r.integer("seed", 0, lo=0)
    rest = {k: v for k, v in obj.items() if k not in ("train", "seed")}
    return _parse_model(_Reader(rest, "")), train, seed
