"""Training-data obfuscation defenses and the privacy attacks they are measured against."""

__version__ = "0.1.0"

from obfuskit.dataset import Dataset, GroupSpec, SensitiveSelection, gen_blobs, load_csv, save_csv
from obfuskit.errors import ValidationError
from obfuskit.models import Model, ModelSpec, TrainConfig, init_model, predict, predict_proba, train
from obfuskit.obfuscate import (
    GroupParams,
    IndividualParams,
    obfuscate_dataset_groups,
    obfuscate_dataset_individual,
)

__all__ = [
    "Dataset",
    "GroupSpec",
    "SensitiveSelection",
    "gen_blobs",
    "load_csv",
    "save_csv",
    "ValidationError",
    "Model",
    "ModelSpec",
    "TrainConfig",
    "init_model",
    "predict",
    "predict_proba",
    "train",
    "GroupParams",
    "IndividualParams",
    "obfuscate_dataset_groups",
    "obfuscate_dataset_individual",
]
