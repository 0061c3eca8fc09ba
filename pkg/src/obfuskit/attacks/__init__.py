"""The four privacy attacks and their evaluation procedures."""

from obfuskit.attacks.inversion import invert_class, inversion_attack_eval
from obfuskit.attacks.membership import (
    MembershipAttackModel,
    membership_attack_eval,
    membership_attack_train,
    membership_infer,
)
from obfuskit.attacks.memorization import (
    Codec,
    SecretPayload,
    bits_to_samples,
    lsb_capacity,
    lsb_decode,
    lsb_encode,
    memorization_attack_eval,
    samples_to_bits,
    sign_decode,
    sign_encode_train,
)
from obfuskit.attacks.property import (
    BlobFamily,
    PropertyAttackModel,
    model_feature,
    property_attack_eval,
    property_attack_train,
    train_family_models,
)
from obfuskit.attacks.report import AttackReport

__all__ = [
    "invert_class",
    "inversion_attack_eval",
    "MembershipAttackModel",
    "membership_attack_eval",
    "membership_attack_train",
    "membership_infer",
    "Codec",
    "SecretPayload",
    "bits_to_samples",
    "lsb_capacity",
    "lsb_decode",
    "lsb_encode",
    "memorization_attack_eval",
    "samples_to_bits",
    "sign_decode",
    "sign_encode_train",
    "BlobFamily",
    "PropertyAttackModel",
    "model_feature",
    "property_attack_eval",
    "property_attack_train",
    "train_family_models",
    "AttackReport",
]
