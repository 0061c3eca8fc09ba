"""Model memorization: a malicious trainer hides training samples in the model.

Two white-box channels:

* LSB: payload bits overwrite the ``k`` low mantissa bits of consecutive
  float64 parameters after training;
* sign: a hinge term during training steers the sign of each of the first
  ``n`` parameters to one payload bit (non-negative = 1).

Samples are turned into bits by uniform quantization of the domain onto
``2**b`` levels that include both endpoints, MSB first.
"""

from dataclasses import dataclass

import numpy as np

from obfuskit.attacks.report import AttackReport
from obfuskit.errors import ValidationError
from obfuskit.metrics import confusion_binary, track_curve
from obfuskit.models import Model, SignPenalty, TrainConfig, accuracy, init_model, train
from obfuskit.obfuscate import obfuscate_dataset_individual

MAX_LSB_BITS = 20


@dataclass(frozen=True)
class Codec:
    bits_per_feature: int
    dim: int
    count: int
    sample_shape: tuple = None

    def __post_init__(self):
        if not 1 <= self.bits_per_feature <= 8:
            raise ValidationError("must be in 1..8", "bits_per_feature")
        if self.dim < 1 or self.count < 0:
            raise ValidationError("dim must be >= 1 and count >= 0", "codec")
        if self.sample_shape is not None and int(np.prod(self.sample_shape)) != self.dim:
            raise ValidationError(f"shape {self.sample_shape} does not hold {self.dim} values", "sample_shape")

    @property
    def num_bits(self):
        return self.count * self.dim * self.bits_per_feature


@dataclass(frozen=True)
class SecretPayload:
    bits: np.ndarray
    codec: Codec

    def __post_init__(self):
        bits = np.asarray(self.bits, dtype=np.uint8).reshape(-1)
        if bits.size != self.codec.num_bits:
            raise ValidationError(f"{bits.size} bits, codec expects {self.codec.num_bits}", "bits")
        object.__setattr__(self, "bits", bits)


def samples_to_bits(samples, domain, bits_per_feature, sample_shape=None):
    samples = np.atleast_2d(np.asarray(samples, dtype=np.float64))
    count, dim = samples.shape
    codec = Codec(bits_per_feature, dim, count, sample_shape)
    lo, hi = domain
    top = (1 << bits_per_feature) - 1
    levels = np.clip(np.rint((samples - lo) / (hi - lo) * top), 0, top).astype(np.uint8)
    shifts = np.arange(bits_per_feature - 1, -1, -1, dtype=np.uint8)
    bits = (levels[..., None] >> shifts) & 1
    return SecretPayload(bits.reshape(-1), codec)


def bits_to_samples(payload, domain):
    codec = payload.codec
    b = codec.bits_per_feature
    top = (1 << b) - 1
    weights = (1 << np.arange(b - 1, -1, -1)).astype(np.int64)
    levels = payload.bits.reshape(codec.count, codec.dim, b).astype(np.int64) @ weights
    lo, hi = domain
    return lo + levels * ((hi - lo) / top)


def lsb_capacity(model, k_bits):
    return int(k_bits) * model.spec.num_parameters


def _check_k(k_bits):
    if not 1 <= int(k_bits) <= MAX_LSB_BITS:
        raise ValidationError(f"must be in 1..{MAX_LSB_BITS}", "k_bits")


def _bit_slots(num_bits, k_bits):
    # payload bit j -> (parameter j // k, bit position k-1 - j % k): MSB of the field first
    j = np.arange(num_bits)
    return j // k_bits, (k_bits - 1 - j % k_bits).astype(np.uint64)


def lsb_encode(model, payload, k_bits):
    """Overwrite low mantissa bits with the payload; other bits are kept."""
    _check_k(k_bits)
    n = payload.bits.size
    if n > lsb_capacity(model, k_bits):
        raise ValidationError(f"payload of {n} bits exceeds capacity {lsb_capacity(model, k_bits)}", "payload")
    raw = model.theta.copy().view(np.uint64)
    param, pos = _bit_slots(n, k_bits)
    mask = np.uint64(1) << pos
    # several payload bits share one parameter, hence the unbuffered ufunc.at
    np.bitwise_and.at(raw, param, ~mask)
    np.bitwise_or.at(raw, param, payload.bits.astype(np.uint64) << pos)
    return Model(model.spec, raw.view(np.float64))


def lsb_decode(model, codec, k_bits):
    _check_k(k_bits)
    n = codec.num_bits
    if n > lsb_capacity(model, k_bits):
        raise ValidationError("codec asks for more bits than the model holds", "codec")
    raw = model.theta.view(np.uint64)
    param, pos = _bit_slots(n, k_bits)
    bits = ((raw[param] >> pos) & np.uint64(1)).astype(np.uint8)
    return SecretPayload(bits, codec)


def sign_decode(model, n):
    """First ``n`` parameter signs as bits; zero reads as 1."""
    if n > model.spec.num_parameters:
        raise ValidationError("more bits requested than parameters", "n")
    return (model.theta[:n] >= 0).astype(np.uint8)


def sign_encode_train(spec, dataset, payload, sign_weight, cfg):
    """Train from ``init_model(spec, cfg.seed)`` with the sign hinge on the payload."""
    bits = payload.bits if isinstance(payload, SecretPayload) else np.asarray(payload, dtype=np.uint8)
    if bits.size > spec.num_parameters:
        raise ValidationError(
            f"payload of {bits.size} bits is longer than the {spec.num_parameters} parameters", "payload")
    return train(init_model(spec, cfg.seed), dataset, _with_penalty(cfg, bits, sign_weight))


def _with_penalty(cfg, bits, sign_weight):
    return TrainConfig(cfg.epochs, cfg.batch_size, cfg.learning_rate, cfg.seed, SignPenalty(bits, sign_weight))


def memorization_attack_eval(train_set, selection, spec, cfg, *, method="lsb", defense=None,
                             bits_per_feature=8, k_bits=16, sign_weight=10.0, val_set=None,
                             obfuscate_selection=None, seed=0, sample_shape=None, curve_every=None):
    """Run the attack end to end and score it against the clean samples.

    The trainer sees the (possibly obfuscated) data, encodes the sensitive
    samples as it sees them, and the receiver decodes. Errors are measured
    against the ORIGINAL samples. ``obfuscate_selection`` widens the set of
    training samples the defense noises (defaults to ``selection``).
    """
    selection.validate(train_set)
    if not selection.indices:
        raise ValidationError("no sensitive samples selected", "selection")
    originals = train_set.features[list(selection.indices)]

    seen = train_set
    coords = {}
    if defense is not None and defense.sigma > 0 and defense.coord_ratio > 0:
        target = selection if obfuscate_selection is None else obfuscate_selection
        seen, coords = obfuscate_dataset_individual(train_set, target, defense, seed, return_coords=True)
    stolen = seen.features[list(selection.indices)]
    payload = samples_to_bits(stolen, seen.domain, bits_per_feature, sample_shape)

    if method not in ("lsb", "sign"):
        raise ValidationError(f"unknown method {method!r}", "method")
    if method == "sign":
        if payload.bits.size > spec.num_parameters:
            raise ValidationError(
                f"payload of {payload.bits.size} bits is longer than the {spec.num_parameters} parameters",
                "payload")
        cfg = _with_penalty(cfg, payload.bits, sign_weight)

    curve = None
    if val_set is None:
        trained = train(init_model(spec, cfg.seed), seen, cfg)
    else:
        every = curve_every or max(1, cfg.epochs // 20)
        trained, curve = track_curve(init_model(spec, cfg.seed), seen, val_set, cfg, every=every)

    if method == "lsb":
        model = lsb_encode(trained, payload, k_bits)
        decoded = lsb_decode(model, payload.codec, k_bits)
        aux_model = {"accuracy_change_from_encoding":
                     None if val_set is None else accuracy(model, val_set) - accuracy(trained, val_set)}
    else:
        model = trained
        decoded = SecretPayload(sign_decode(model, payload.bits.size), payload.codec)
        aux_model = {}

    recovered = bits_to_samples(decoded, seen.domain)
    err = np.abs(recovered - originals)
    noised_err = [err[row, coords[i]] for row, i in enumerate(selection.indices)
                  if i in coords and coords[i].size]
    noised_err = np.concatenate(noised_err) if noised_err else np.zeros(0)

    truth = samples_to_bits(originals, train_set.domain, bits_per_feature, sample_shape)
    aux = {
        "method": method,
        "payload_bits": int(payload.bits.size),
        "bit_recovery_rate": float(np.mean(decoded.bits == payload.bits)),
        "clean_bit_recovery_rate": float(np.mean(decoded.bits == truth.bits)),
        "recon_mae": float(err.mean()),
        "recon_mae_noised": float(noised_err.mean()) if noised_err.size else None,
        "train_accuracy": accuracy(model, seen),
        "val_accuracy": None if val_set is None else accuracy(model, val_set),
        **aux_model,
    }
    config = {"method": method, "bits_per_feature": bits_per_feature, "k_bits": k_bits,
              "sign_weight": sign_weight, "selected": len(selection),
              "defense": None if defense is None else {"coord_ratio": defense.coord_ratio, "sigma": defense.sigma}}
    return AttackReport(
        "memorization",
        confusion=confusion_binary(decoded.bits, truth.bits),
        aux=aux, config=config,
        artifacts={"recovered": recovered, "original": originals},
        curve=curve,
    )
