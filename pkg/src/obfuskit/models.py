"""Desk-scale supervised learners: softmax regression and a one-hidden-layer MLP.

Parameters live in one flat float64 vector; the named groups
(``layer1/weight`` ...) are reshaped views into it. That keeps the white-box
surface used by the attacks (flat get/set, LSB rewriting, sign reading)
trivially consistent with what training updates.

Features are rescaled from the model's declared domain ``[lo, hi]`` to
``[0, 1]`` inside every forward pass, so callers always work in raw units.
"""

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from obfuskit import _backend
from obfuskit.errors import ValidationError
from obfuskit.seeding import make_rng

SOFTMAX = "softmax"
MLP = "mlp"
RELU = "relu"
SIGMOID = "sigmoid"

_ACTIVATION_CODES = {RELU: 0, SIGMOID: 1}
INIT_SCALE = 0.05


@dataclass(frozen=True)
class ModelSpec:
    """Architecture, input shape and regularization weight of a learner.

    ``domain`` is the raw feature range the model rescales from; it must
    match the ``domain`` of any dataset it is trained or evaluated on.
    """

    input_dim: int
    num_classes: int
    architecture: str = SOFTMAX
    hidden_width: int = 0
    activation: str = RELU
    reg_weight: float = 0.0
    domain: tuple = (0.0, 1.0)

    def __post_init__(self):
        if int(self.input_dim) < 1:
            raise ValidationError("must be >= 1", "input_dim")
        if int(self.num_classes) < 2:
            raise ValidationError("must be >= 2", "num_classes")
        if self.architecture not in (SOFTMAX, MLP):
            raise ValidationError(f"unknown architecture {self.architecture!r}", "architecture")
        if self.architecture == MLP and int(self.hidden_width) < 1:
            raise ValidationError("MLP needs a positive hidden width", "hidden_width")
        if self.activation not in _ACTIVATION_CODES:
            raise ValidationError(f"unknown activation {self.activation!r}", "activation")
        if not (self.reg_weight >= 0 and math.isfinite(self.reg_weight)):
            raise ValidationError("must be a finite value >= 0", "reg_weight")
        lo, hi = self.domain
        if not lo < hi:
            raise ValidationError("lo must be < hi", "domain")
        object.__setattr__(self, "domain", (float(lo), float(hi)))
        object.__setattr__(self, "hidden_width", int(self.hidden_width) if self.architecture == MLP else 0)

    @classmethod
    def softmax(cls, input_dim, num_classes, **kw):
        return cls(input_dim, num_classes, architecture=SOFTMAX, **kw)

    @classmethod
    def mlp(cls, input_dim, num_classes, hidden_width, **kw):
        return cls(input_dim, num_classes, architecture=MLP, hidden_width=hidden_width, **kw)

    def group_shapes(self):
        """Ordered ``(name, shape)`` pairs of the parameter groups."""
        d, c, h = self.input_dim, self.num_classes, self.hidden_width
        if self.architecture == SOFTMAX:
            return [("dense/weight", (d, c)), ("dense/bias", (c,))]
        return [
            ("layer1/weight", (d, h)),
            ("layer1/bias", (h,)),
            ("layer2/weight", (h, c)),
            ("layer2/bias", (c,)),
        ]

    @property
    def num_parameters(self):
        return sum(math.prod(shape) for _, shape in self.group_shapes())

    def weight_mask(self):
        """Boolean mask over the flat vector: True for weights, False for biases."""
        return _weight_mask(self).copy()

    def to_dict(self):
        return {
            "architecture": self.architecture,
            "input_dim": self.input_dim,
            "num_classes": self.num_classes,
            "hidden_width": self.hidden_width,
            "activation": self.activation,
            "reg_weight": self.reg_weight,
            "domain": list(self.domain),
        }

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        if "domain" in data:
            data["domain"] = tuple(data["domain"])
        try:
            return cls(**data)
        except TypeError as exc:
            raise ValidationError(str(exc), "spec") from None


@lru_cache(maxsize=64)
def _weight_mask(spec):
    mask = np.zeros(spec.num_parameters, dtype=bool)
    offset = 0
    for name, shape in spec.group_shapes():
        size = math.prod(shape)
        mask[offset:offset + size] = name.endswith("/weight")
        offset += size
    return mask


class Model:
    """A spec plus its flat parameter vector ``theta``."""

    __slots__ = ("spec", "theta")

    def __init__(self, spec, theta):
        theta = np.array(theta, dtype=np.float64).reshape(-1)
        if theta.size != spec.num_parameters:
            raise ValidationError(
                f"expected {spec.num_parameters} parameters, got {theta.size}", "theta")
        if not np.all(np.isfinite(theta)):
            raise ValidationError("parameters must be finite", "theta")
        self.spec = spec
        self.theta = theta

    @property
    def params(self):
        """Ordered dict of named groups (views into ``theta``)."""
        out = {}
        offset = 0
        for name, shape in self.spec.group_shapes():
            size = math.prod(shape)
            out[name] = self.theta[offset:offset + size].reshape(shape)
            offset += size
        return out

    def copy(self):
        return Model(self.spec, self.theta.copy())

    def __eq__(self, other):
        if not isinstance(other, Model):
            return NotImplemented
        return self.spec == other.spec and np.array_equal(self.theta, other.theta)

    def __repr__(self):
        return f"Model({self.spec.architecture}, d={self.spec.input_dim}, C={self.spec.num_classes}, P={self.theta.size})"


@dataclass(frozen=True)
class SignPenalty:
    """Training-time hinge pushing the first ``len(bits)`` parameters' signs to ``bits``."""

    bits: np.ndarray
    weight: float

    def __post_init__(self):
        bits = np.asarray(self.bits, dtype=np.uint8).reshape(-1)
        if bits.size and bits.max() > 1:
            raise ValidationError("bits must be 0/1", "sign_penalty.bits")
        if not self.weight > 0:
            raise ValidationError("must be > 0", "sign_penalty.weight")
        object.__setattr__(self, "bits", bits)

    def targets(self):
        """+1 for bit 1, -1 for bit 0."""
        return np.where(self.bits == 1, 1.0, -1.0)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int
    batch_size: int = 32
    learning_rate: float = 0.1
    seed: int = 0
    sign_penalty: SignPenalty = field(default=None)

    def __post_init__(self):
        if int(self.epochs) < 0:
            raise ValidationError("must be >= 0", "epochs")
        if int(self.batch_size) < 1:
            raise ValidationError("must be >= 1", "batch_size")
        if not self.learning_rate > 0:
            raise ValidationError("must be > 0", "learning_rate")
        if not 0 <= int(self.seed) < 2**64:
            raise ValidationError("must be an unsigned 64-bit integer", "seed")


def init_model(spec, seed):
    """Parameters drawn uniformly from [-0.05, 0.05], deterministic in ``seed``."""
    rng = make_rng(seed, "init")
    return Model(spec, rng.uniform(-INIT_SCALE, INIT_SCALE, size=spec.num_parameters))


def scale_features(spec, X):
    lo, hi = spec.domain
    return (np.asarray(X, dtype=np.float64) - lo) / (hi - lo)


def _check_features(spec, X):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != spec.input_dim:
        raise ValidationError(
            f"expected feature dimension {spec.input_dim}, got shape {X.shape}", "features")
    return X


def _softmax_rows(logits):
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _groups(spec, theta):
    out = []
    offset = 0
    for _, shape in spec.group_shapes():
        size = math.prod(shape)
        out.append(theta[offset:offset + size].reshape(shape))
        offset += size
    return out


def _activate(spec, pre):
    if spec.activation == RELU:
        return np.maximum(pre, 0.0)
    return 1.0 / (1.0 + np.exp(-pre))


def _logits(spec, theta, Z):
    if spec.architecture == SOFTMAX:
        W, b = _groups(spec, theta)
        return Z @ W + b, None
    W1, b1, W2, b2 = _groups(spec, theta)
    hidden = _activate(spec, Z @ W1 + b1)
    return hidden @ W2 + b2, hidden


def flat_loss_and_gradient(spec, theta, Z, y, sign_targets=None, sign_weight=0.0):
    """Loss and flat gradient on already-scaled inputs ``Z``.

    Loss is mean cross-entropy + reg/2 * ||weights||^2, plus the sign hinge
    ``sign_weight * sum(max(0, -t_i * theta_i))`` over the first
    ``len(sign_targets)`` parameters when given.
    """
    n = Z.shape[0]
    logits, hidden = _logits(spec, theta, Z)
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1))
    loss = float(np.mean(log_norm - shifted[np.arange(n), y]))

    delta = _softmax_rows(logits)
    delta[np.arange(n), y] -= 1.0
    delta /= n

    if spec.architecture == SOFTMAX:
        grad = np.concatenate([(Z.T @ delta).ravel(), delta.sum(axis=0)])
    else:
        _, _, W2, _ = _groups(spec, theta)
        g_hidden = delta @ W2.T
        if spec.activation == RELU:
            g_pre = g_hidden * (hidden > 0)
        else:
            g_pre = g_hidden * hidden * (1.0 - hidden)
        grad = np.concatenate([
            (Z.T @ g_pre).ravel(), g_pre.sum(axis=0),
            (hidden.T @ delta).ravel(), delta.sum(axis=0),
        ])

    if spec.reg_weight > 0:
        mask = _weight_mask(spec)
        w = theta[mask]
        loss += 0.5 * spec.reg_weight * float(w @ w)
        grad[mask] += spec.reg_weight * w

    if sign_targets is not None and len(sign_targets):
        k = len(sign_targets)
        head = theta[:k]
        loss += sign_weight * float(np.maximum(0.0, -sign_targets * head).sum())
        # bit 0 with theta == 0 decodes as 1, so it is still pushed
        wrong = np.where(sign_targets > 0, head < 0, head >= 0)
        grad[:k] -= sign_weight * sign_targets * wrong
    return loss, grad


def loss_and_gradient(model, X, y, sign_penalty=None):
    """Regularized batch loss and per-group gradients for raw features ``X``."""
    spec = model.spec
    X = _check_features(spec, X)
    y = np.asarray(y, dtype=np.int64).reshape(-1)
    if X.shape[0] == 0:
        raise ValidationError("batch is empty", "batch")
    if y.shape[0] != X.shape[0]:
        raise ValidationError("features and labels differ in length", "batch")
    if y.min() < 0 or y.max() >= spec.num_classes:
        raise ValidationError("label out of range", "batch")
    targets, weight = (None, 0.0)
    if sign_penalty is not None:
        targets, weight = sign_penalty.targets(), sign_penalty.weight
    loss, grad = flat_loss_and_gradient(spec, model.theta, scale_features(spec, X), y, targets, weight)
    return loss, _groups(spec, grad)


def _check_dataset(spec, dataset):
    if len(dataset) == 0:
        raise ValidationError("dataset is empty", "dataset")
    if dataset.dim != spec.input_dim:
        raise ValidationError(
            f"dataset dim {dataset.dim} != model input_dim {spec.input_dim}", "dataset")
    if dataset.num_classes > spec.num_classes:
        raise ValidationError("dataset has more classes than the model", "dataset")
    if tuple(dataset.domain) != spec.domain:
        raise ValidationError(
            f"dataset domain {dataset.domain} != model domain {spec.domain}", "dataset")


def train(model, dataset, cfg, callback=None):
    """Shuffled mini-batch SGD for ``cfg.epochs`` passes; returns a new Model.

    Each epoch's permutation comes from its own stream derived from
    ``cfg.seed``, so the result is bit-reproducible. ``callback(epoch, model)``
    is called after every epoch (1-based) with a snapshot.
    """
    spec = model.spec
    _check_dataset(spec, dataset)
    theta = model.theta.copy()
    if cfg.epochs == 0:
        return Model(spec, theta)

    targets = np.zeros(0)
    weight = 0.0
    if cfg.sign_penalty is not None:
        if cfg.sign_penalty.bits.size > spec.num_parameters:
            raise ValidationError("payload longer than parameter vector", "sign_penalty.bits")
        targets = cfg.sign_penalty.targets()
        weight = float(cfg.sign_penalty.weight)

    Z = np.ascontiguousarray(scale_features(spec, dataset.features))
    y = np.ascontiguousarray(dataset.labels, dtype=np.int64)
    n = Z.shape[0]
    for epoch in range(cfg.epochs):
        order = make_rng(cfg.seed, "epoch", epoch).permutation(n).astype(np.int64)
        _backend.sgd_epoch(
            theta, Z, y, order,
            spec.input_dim, spec.hidden_width, spec.num_classes,
            _ACTIVATION_CODES[spec.activation],
            float(cfg.learning_rate), float(spec.reg_weight), int(cfg.batch_size),
            targets, weight,
        )
        if not np.all(np.isfinite(theta)):
            raise FloatingPointError(f"training diverged at epoch {epoch + 1}")
        if callback is not None:
            callback(epoch + 1, Model(spec, theta.copy()))
    return Model(spec, theta)


def predict_proba(model, features):
    """Class probabilities; a vector for one sample, a matrix for a batch."""
    spec = model.spec
    single = np.ndim(features) == 1
    X = _check_features(spec, features)
    logits, _ = _logits(spec, model.theta, scale_features(spec, X))
    proba = _softmax_rows(logits)
    return proba[0] if single else proba


def predict(model, features):
    """Argmax labels (lowest index wins ties)."""
    proba = predict_proba(model, features)
    return np.argmax(proba, axis=-1)


def accuracy(model, dataset):
    _check_dataset(model.spec, dataset)
    return float(np.mean(predict(model, dataset.features) == dataset.labels))


def log_proba_input_gradient(model, x, label):
    """``(log p_label(x), d log p_label / dx)`` with respect to raw features."""
    spec = model.spec
    x = np.asarray(x, dtype=np.float64)
    z = scale_features(spec, x)[None, :]
    logits, hidden = _logits(spec, model.theta, z)
    proba = _softmax_rows(logits)[0]
    log_p = float(np.log(proba[label]))
    # d log p_c / d logits = e_c - p
    g_logits = -proba
    g_logits[label] += 1.0
    if spec.architecture == SOFTMAX:
        W, _ = _groups(spec, model.theta)
        g_z = W @ g_logits
    else:
        W1, _, W2, _ = _groups(spec, model.theta)
        g_hidden = W2 @ g_logits
        h = hidden[0]
        g_pre = g_hidden * (h > 0) if spec.activation == RELU else g_hidden * h * (1.0 - h)
        g_z = W1 @ g_pre
    lo, hi = spec.domain
    return log_p, g_z / (hi - lo)


def get_parameters(model):
    """Flat copy of all parameters in group order."""
    return model.theta.copy()


def set_parameters(model, vector):
    vector = np.asarray(vector, dtype=np.float64).reshape(-1)
    if vector.size != model.spec.num_parameters:
        raise ValidationError(
            f"expected {model.spec.num_parameters} values, got {vector.size}", "vector")
    return Model(model.spec, vector)


def model_to_json(model):
    """JSON text; shortest round-trip float reprs, so bit patterns (and -0.0) survive."""
    groups = []
    for name, arr in model.params.items():
        values = ", ".join(repr(v) for v in arr.ravel().tolist())
        groups.append(f'    {{"name": {json.dumps(name)}, "shape": {json.dumps(list(arr.shape))}, "values": [{values}]}}')
    spec = json.dumps(model.spec.to_dict(), sort_keys=True)
    return '{\n  "spec": ' + spec + ',\n  "params": [\n' + ",\n".join(groups) + "\n  ]\n}\n"


def model_from_json(text):
    doc = json.loads(text)
    try:
        spec = ModelSpec.from_dict(doc["spec"])
        expected = spec.group_shapes()
        got = [(g["name"], tuple(g["shape"])) for g in doc["params"]]
        if got != [(n, tuple(s)) for n, s in expected]:
            raise ValidationError(f"parameter groups {got} do not match spec", "params")
        theta = np.concatenate([np.asarray(g["values"], dtype=np.float64).ravel() for g in doc["params"]])
    except KeyError as exc:
        raise ValidationError(f"missing key {exc}", "model") from None
    return Model(spec, theta)


def save_model(model, path):
    with open(path, "w") as fh:
        fh.write(model_to_json(model))


def load_model(path):
    with open(path) as fh:
        return model_from_json(fh.read())
