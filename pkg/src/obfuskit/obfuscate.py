"""Customer-side obfuscation of a training set before it is handed over.

Two transforms:

* individual: a fraction of each sensitive sample's coordinates gets
  Gaussian noise (labels untouched, dataset size unchanged);
* group: each sensitive group is augmented with noisy *negatives*
  ``lo + hi - x`` of its own samples, which drags the group mean toward the
  domain midpoint (originals untouched, new samples appended).

Noise is always followed by clipping to the domain.
"""

import math
from dataclasses import dataclass

import numpy as np

from obfuskit.dataset import BY_LABEL, Dataset, select_group
from obfuskit.errors import ValidationError
from obfuskit.seeding import make_rng

DEFAULT_GROUP_SIGMA = 5.0


@dataclass(frozen=True)
class IndividualParams:
    coord_ratio: float
    sigma: float

    def __post_init__(self):
        if not 0 <= self.coord_ratio <= 1:
            raise ValidationError("must be in [0, 1]", "coord_ratio")
        if not (self.sigma >= 0 and math.isfinite(self.sigma)):
            raise ValidationError("must be a finite value >= 0", "sigma")

    def num_coords(self, dim):
        # ceil, with slack so e.g. (1/3)*3 is not pushed to 2
        return min(dim, int(math.ceil(self.coord_ratio * dim - 1e-9)))


@dataclass(frozen=True)
class GroupParams:
    aug_ratio: float
    sigma: float = DEFAULT_GROUP_SIGMA

    def __post_init__(self):
        if not (self.aug_ratio >= 0 and math.isfinite(self.aug_ratio)):
            raise ValidationError("must be a finite value >= 0", "aug_ratio")
        if not (self.sigma >= 0 and math.isfinite(self.sigma)):
            raise ValidationError("must be a finite value >= 0", "sigma")

    def num_new(self, group_size):
        return int(math.floor(self.aug_ratio * group_size + 1e-9))


def negative(features, domain):
    """Reflect through the domain midpoint: ``lo + hi - x`` (``255 - x`` for pixels)."""
    lo, hi = domain
    return (lo + hi) - np.asarray(features, dtype=np.float64)


def obfuscate_individual_sample(sample, domain, params, rng, return_coords=False):
    """Add N(0, sigma) noise to ``ceil(coord_ratio * d)`` random coordinates.

    With ``return_coords`` the sorted indices of the noised coordinates are
    returned as well.
    """
    x = np.array(sample, dtype=np.float64).reshape(-1)
    k = params.num_coords(x.size)
    coords = np.sort(rng.choice(x.size, size=k, replace=False)) if k else np.zeros(0, dtype=np.int64)
    if k and params.sigma > 0:
        x[coords] += rng.normal(0.0, params.sigma, size=k)
        np.clip(x, domain[0], domain[1], out=x)
    return (x, coords) if return_coords else x


def obfuscate_dataset_individual(dataset, selection, params, seed, return_coords=False):
    """Replace every selected sample by its obfuscated version, in place.

    Each sample's noise comes from a stream keyed by ``(seed, index)`` so the
    result does not depend on processing order. ``return_coords`` adds a
    ``{index: noised coordinate indices}`` map.
    """
    selection.validate(dataset)
    feats = np.array(dataset.features)
    coords = {}
    for i in selection.indices:
        rng = make_rng(seed, "individual", i)
        feats[i], coords[i] = obfuscate_individual_sample(
            dataset.features[i], dataset.domain, params, rng, return_coords=True)
    out = dataset.replace(features=feats)
    return (out, coords) if return_coords else out


def obfuscate_group(features, labels, spec, domain, params, rng):
    """Append ``floor(aug_ratio * |g|)`` noisy negatives to one group.

    Sources are drawn without replacement until the group is exhausted, then
    with replacement. New labels: the group's class for ``by_label``
    groups, the source sample's own label for ``whole_dataset``.
    Returns ``(features', labels')`` with the originals first, unchanged.
    """
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    n = features.shape[0]
    if n == 0:
        raise ValidationError("group is empty", "group")
    if spec.kind == BY_LABEL and np.any(labels != spec.label):
        raise ValidationError(f"group contains labels other than {spec.label}", "group")
    m = params.num_new(n)
    if m == 0:
        return features.copy(), labels.copy()
    head = rng.permutation(n)[:m]
    extra = rng.integers(0, n, size=m - head.size) if m > n else np.zeros(0, dtype=np.int64)
    src = np.concatenate([head, extra])
    new = negative(features[src], domain)
    if params.sigma > 0:
        new += rng.normal(0.0, params.sigma, size=new.shape)
    np.clip(new, domain[0], domain[1], out=new)
    new_labels = np.full(m, spec.label) if spec.kind == BY_LABEL else labels[src]
    return np.concatenate([features, new]), np.concatenate([labels, new_labels])


def obfuscate_dataset_groups(dataset, groups, params, seed):
    """Augment every group in ``groups``; new samples are appended in group order.

    Groups are selected from the original dataset, so output size is
    ``N + sum(floor(aug_ratio * |g|))``.
    """
    seen = set()
    for g in groups:
        g.validate(dataset)
        if g.kind == BY_LABEL:
            if g.label in seen:
                raise ValidationError(f"class {g.label} listed twice", "groups")
            seen.add(g.label)
    feats = [dataset.features]
    labels = [dataset.labels]
    for gi, g in enumerate(groups):
        idx = select_group(dataset, g)
        f2, l2 = obfuscate_group(dataset.features[idx], dataset.labels[idx], g, dataset.domain,
                                 params, make_rng(seed, "group", gi))
        feats.append(f2[idx.size:])
        labels.append(l2[idx.size:])
    return Dataset(np.concatenate(feats), np.concatenate(labels), dataset.num_classes,
                   dataset.domain, dataset.name)

