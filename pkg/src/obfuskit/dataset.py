"""Labeled datasets with a declared feature domain, plus sensitive selections.

CSV layout::

    # name=<tag> d=<d> C=<C> domain=<lo>,<hi>
    label,f0,...,f(d-1)

A bare ``# domain <lo> <hi>`` header is also accepted.
"""

import math
import re
from dataclasses import dataclass

import numpy as np

from obfuskit.errors import ValidationError
from obfuskit.seeding import make_rng

BY_LABEL = "by_label"
WHOLE_DATASET = "whole_dataset"


class Dataset:
    """Immutable (features, labels) pair with ``domain`` and ``num_classes``.

    Invariants are checked on construction: ``lo < hi``, every feature in
    ``[lo, hi]``, every label in ``[0, C)``.
    """

    __slots__ = ("name", "features", "labels", "num_classes", "domain")

    def __init__(self, features, labels, num_classes, domain, name="data"):
        features = np.array(features, dtype=np.float64)
        labels = np.array(labels, dtype=np.int64).reshape(-1)
        if features.ndim != 2:
            if features.size == 0:
                raise ValidationError("empty datasets need an explicit (0, d) feature shape", "features")
            raise ValidationError(f"features must be 2-D, got shape {features.shape}", "features")
        if features.shape[1] < 1:
            raise ValidationError("dimension must be >= 1", "features")
        if labels.shape[0] != features.shape[0]:
            raise ValidationError("features and labels differ in length", "labels")
        lo, hi = float(domain[0]), float(domain[1])
        if not lo < hi:
            raise ValidationError("lo must be < hi", "domain")
        if int(num_classes) < 2:
            raise ValidationError("must be >= 2", "num_classes")
        if features.size:
            if not np.all(np.isfinite(features)):
                raise ValidationError("features must be finite", "features")
            if features.min() < lo or features.max() > hi:
                raise ValidationError(f"feature outside domain [{lo}, {hi}]", "features")
        if labels.size and (labels.min() < 0 or labels.max() >= num_classes):
            raise ValidationError(f"label outside [0, {num_classes})", "labels")
        features.setflags(write=False)
        labels.setflags(write=False)
        self.name = str(name)
        self.features = features
        self.labels = labels
        self.num_classes = int(num_classes)
        self.domain = (lo, hi)

    @property
    def dim(self):
        return self.features.shape[1]

    @property
    def midpoint(self):
        return 0.5 * (self.domain[0] + self.domain[1])

    def __len__(self):
        return self.features.shape[0]

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.num_classes == other.num_classes
            and self.domain == other.domain
            and np.array_equal(self.features, other.features)
            and np.array_equal(self.labels, other.labels)
        )

    def __repr__(self):
        return f"Dataset({self.name!r}, N={len(self)}, d={self.dim}, C={self.num_classes}, domain={self.domain})"

    def subset(self, indices, name=None):
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(self.features[idx], self.labels[idx], self.num_classes, self.domain,
                       name or self.name)

    def replace(self, features=None, labels=None, name=None):
        return Dataset(
            self.features if features is None else features,
            self.labels if labels is None else labels,
            self.num_classes, self.domain, name or self.name,
        )

    def class_counts(self):
        return np.bincount(self.labels, minlength=self.num_classes)


def concat(datasets, name=None):
    first = datasets[0]
    for ds in datasets[1:]:
        if ds.dim != first.dim or ds.domain != first.domain or ds.num_classes != first.num_classes:
            raise ValidationError("datasets disagree on dim/domain/classes", "datasets")
    return Dataset(
        np.concatenate([d.features for d in datasets]),
        np.concatenate([d.labels for d in datasets]),
        first.num_classes, first.domain, name or first.name,
    )


@dataclass(frozen=True)
class SensitiveSelection:
    """Indices of the sensitive samples (unique, validated against a dataset)."""

    indices: tuple

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        if len(set(idx)) != len(idx):
            raise ValidationError("indices must be unique", "indices")
        object.__setattr__(self, "indices", tuple(sorted(idx)))

    def validate(self, dataset):
        n = len(dataset)
        for i in self.indices:
            if not 0 <= i < n:
                raise ValidationError(f"index {i} outside [0, {n})", "indices")

    def __len__(self):
        return len(self.indices)

    @classmethod
    def all(cls, dataset):
        return cls(tuple(range(len(dataset))))

    @classmethod
    def fraction(cls, dataset, fraction, seed):
        """A random ``floor(fraction * N)`` subset."""
        if not 0 <= fraction <= 1:
            raise ValidationError("must be in [0, 1]", "fraction")
        k = int(math.floor(fraction * len(dataset) + 1e-9))
        rng = make_rng(seed, "select")
        return cls(tuple(rng.choice(len(dataset), size=k, replace=False).tolist()))

    @classmethod
    def sample(cls, dataset, count, seed):
        """``count`` distinct indices drawn uniformly."""
        if not 0 <= count <= len(dataset):
            raise ValidationError(f"must be in [0, {len(dataset)}]", "count")
        rng = make_rng(seed, "select")
        return cls(tuple(rng.choice(len(dataset), size=count, replace=False).tolist()))

    @classmethod
    def one_per_class(cls, dataset):
        """First sample of each class present."""
        picks = []
        for c in range(dataset.num_classes):
            hits = np.flatnonzero(dataset.labels == c)
            if hits.size:
                picks.append(int(hits[0]))
        return cls(tuple(picks))


@dataclass(frozen=True)
class GroupSpec:
    """Common feature of a sensitive group: one label, or the whole dataset."""

    kind: str
    label: int = None

    def __post_init__(self):
        if self.kind not in (BY_LABEL, WHOLE_DATASET):
            raise ValidationError(f"unknown group kind {self.kind!r}", "kind")
        if self.kind == BY_LABEL and (self.label is None or int(self.label) < 0):
            raise ValidationError("by_label needs a class id", "label")

    @classmethod
    def by_label(cls, label):
        return cls(BY_LABEL, int(label))

    @classmethod
    def whole(cls):
        return cls(WHOLE_DATASET)

    def validate(self, dataset):
        if self.kind == BY_LABEL and self.label >= dataset.num_classes:
            raise ValidationError(f"class {self.label} >= C={dataset.num_classes}", "label")

    def to_dict(self):
        return {"kind": self.kind} if self.kind == WHOLE_DATASET else {"kind": self.kind, "label": self.label}


def select_group(dataset, spec):
    spec.validate(dataset)
    if spec.kind == WHOLE_DATASET:
        return np.arange(len(dataset))
    return np.flatnonzero(dataset.labels == spec.label)


def class_mean(dataset, label):
    idx = np.flatnonzero(dataset.labels == label)
    if idx.size == 0:
        raise ValidationError(f"class {label} has no samples", "label")
    return dataset.features[idx].mean(axis=0)


def split(dataset, fraction, seed):
    """Random disjoint split into ``floor(fraction * N)`` and the remainder."""
    if not 0 < fraction < 1:
        raise ValidationError("must be in (0, 1)", "fraction")
    n = len(dataset)
    k = int(math.floor(fraction * n))
    if k == 0 or k == n:
        raise ValidationError(f"split of N={n} at {fraction} leaves an empty side", "fraction")
    perm = make_rng(seed, "split").permutation(n)
    return dataset.subset(np.sort(perm[:k])), dataset.subset(np.sort(perm[k:]))


def gen_blobs(num_classes, dim, per_class_n, centers_seed, spread, domain=(0.0, 255.0),
              sample_seed=None, centers=None, name="blobs"):
    """Gaussian blobs around per-class centers, clipped to ``domain``.

    Centers are drawn uniformly in the domain from ``centers_seed`` unless
    given explicitly as a ``(C, d)`` array. Points use ``sample_seed``
    (defaults to ``centers_seed``).
    """
    lo, hi = float(domain[0]), float(domain[1])
    if per_class_n < 0 or spread < 0:
        raise ValidationError("per_class_n and spread must be >= 0", "gen_blobs")
    if centers is None:
        centers = make_rng(centers_seed, "centers").uniform(lo, hi, size=(num_classes, dim))
    centers = np.asarray(centers, dtype=np.float64)
    if centers.shape != (num_classes, dim):
        raise ValidationError(f"centers must have shape {(num_classes, dim)}", "centers")
    rng = make_rng(centers_seed if sample_seed is None else sample_seed, "points")
    feats = []
    labels = []
    for c in range(num_classes):
        pts = centers[c] + spread * rng.standard_normal((per_class_n, dim))
        feats.append(np.clip(pts, lo, hi))
        labels.append(np.full(per_class_n, c))
    return Dataset(np.concatenate(feats).reshape(-1, dim), np.concatenate(labels),
                   num_classes, (lo, hi), name)


def signed_centers(amplitudes, dim, domain, seed):
    """Class centers ``mid + a_c * s`` with an independent random sign vector ``s`` per class.

    Larger ``a_c`` makes class ``c`` more distinctive against the midpoint;
    useful for inversion benchmarks where the class mean must be recoverable.
    """
    lo, hi = float(domain[0]), float(domain[1])
    amps = np.asarray(amplitudes, dtype=np.float64).reshape(-1, 1)
    if np.any(amps < 0) or np.any(amps > 0.5 * (hi - lo)):
        raise ValidationError("amplitudes must lie in [0, (hi - lo) / 2]", "amplitudes")
    signs = make_rng(seed, "signed-centers").choice([-1.0, 1.0], size=(amps.shape[0], dim))
    return 0.5 * (lo + hi) + amps * signs


# --- files ---------------------------------------------------------------

_HEADER_KV = re.compile(r"(\w+)=(\S+)")


def _parse_header(line):
    body = line.lstrip("#").strip()
    if body.startswith("domain ") and "=" not in body:
        parts = body.split()
        return {"domain": (float(parts[1]), float(parts[2]))}
    meta = dict(_HEADER_KV.findall(body))
    out = {}
    if "name" in meta:
        out["name"] = meta["name"]
    if "d" in meta:
        out["d"] = int(meta["d"])
    if "C" in meta:
        out["C"] = int(meta["C"])
    if "domain" in meta:
        lo, hi = meta["domain"].split(",")
        out["domain"] = (float(lo), float(hi))
    return out


def save_csv(dataset, path):
    lo, hi = dataset.domain
    with open(path, "w") as fh:
        fh.write(f"# name={dataset.name} d={dataset.dim} C={dataset.num_classes} domain={lo!r},{hi!r}\n")
        for x, y in zip(dataset.features.tolist(), dataset.labels.tolist()):
            fh.write(str(y) + "," + ",".join(repr(v) for v in x) + "\n")


def load_csv(path, num_classes=None):
    """Read a dataset written by :func:`save_csv`.

    ``num_classes`` overrides the header; without either it is inferred
    as ``max(label) + 1``.
    """
    meta = {}
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                meta.update(_parse_header(line))
                continue
            parts = line.split(",")
            try:
                label = int(parts[0])
                values = [float(v) for v in parts[1:]]
            except ValueError:
                raise ValidationError(f"malformed row: {line[:60]!r}", f"{path}:{lineno}") from None
            if not values:
                raise ValidationError("row has no features", f"{path}:{lineno}")
            d = meta.get("d", len(rows[0][1]) if rows else len(values))
            if len(values) != d:
                raise ValidationError(f"row has {len(values)} features, expected {d}", f"{path}:{lineno}")
            rows.append((label, values))
    if "domain" not in meta:
        raise ValidationError("missing '# domain' header", str(path))
    C = num_classes or meta.get("C") or (max(r[0] for r in rows) + 1 if rows else 2)
    d = meta.get("d", len(rows[0][1]) if rows else 1)
    feats = np.array([r[1] for r in rows], dtype=np.float64).reshape(len(rows), d)
    labels = np.array([r[0] for r in rows], dtype=np.int64)
    if labels.size and (labels.min() < 0 or labels.max() >= C):
        raise ValidationError(f"label out of range [0, {C})", str(path))
    return Dataset(feats, labels, max(int(C), 2), meta["domain"], meta.get("name", "data"))


def save_pgm(features, path, height, width, domain=(0.0, 255.0)):
    """Write one sample as an ASCII PGM (P2, maxval 255), rescaled from ``domain``."""
    x = np.asarray(features, dtype=np.float64).reshape(-1)
    if x.size != height * width:
        raise ValidationError(f"{x.size} values do not fit {height}x{width}", "shape")
    lo, hi = domain
    pix = np.clip(np.rint((x - lo) / (hi - lo) * 255.0), 0, 255).astype(int).reshape(height, width)
    with open(path, "w") as fh:
        fh.write(f"P2\n{width} {height}\n255\n")
        for row in pix:
            fh.write(" ".join(str(v) for v in row) + "\n")


def load_pgm(path):
    with open(path) as fh:
        tokens = [t for line in fh if not line.startswith("#") for t in line.split()]
    if tokens[0] != "P2":
        raise ValidationError("not an ASCII PGM", str(path))
    w, h, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    pix = np.array([int(t) for t in tokens[4:4 + w * h]], dtype=np.float64).reshape(h, w)
    return pix * (255.0 / maxval)
