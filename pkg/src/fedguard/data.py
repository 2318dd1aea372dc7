"""Labeled classification data: synthetic generation, CSV ingestion, and
Non-IID partitioning of samples across federated clients.

The default corpus is synthetic: per-tag Gaussian clusters with a binary
label, where each "tag" plays the role of an attack family so that whole
families can be handed to individual clients. Real intrusion-detection
CSVs (KDD-format included) can be ingested instead.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from .errors import IngestionError, ParameterError

# Std-dev of the per-tag cluster offsets in generate_synthetic. Offsets are
# kept orthogonal to the class axis so tag diversity never eats into class
# separation.
TAG_SPREAD = 1.0

# Canonical column names for KDD-format files that ship without a header row
# (41 features, then the label string, then a difficulty score).
NSL_KDD_COLUMNS = (
    "duration", "protocol_type", "service", "flag", "src_bytes", "dst_bytes",
    "land", "wrong_fragment", "urgent", "hot", "num_failed_logins",
    "logged_in", "num_compromised", "root_shell", "su_attempted", "num_root",
    "num_file_creations", "num_shells", "num_access_files",
    "num_outbound_cmds", "is_host_login", "is_guest_login", "count",
    "srv_count", "serror_rate", "srv_serror_rate", "rerror_rate",
    "srv_rerror_rate", "same_srv_rate", "diff_srv_rate", "srv_diff_host_rate",
    "dst_host_count", "dst_host_srv_count", "dst_host_same_srv_rate",
    "dst_host_diff_srv_rate", "dst_host_same_src_port_rate",
    "dst_host_srv_diff_host_rate", "dst_host_serror_rate",
    "dst_host_srv_serror_rate", "dst_host_rerror_rate",
    "dst_host_srv_rerror_rate", "label", "difficulty",
)

PARTITION_MODES = ("by_tag", "proportional")


@dataclass(frozen=True, eq=False)
class Dataset:
    """A labeled sample matrix, optionally with a per-sample string tag.

    ``features`` is (n_samples, n_features) float64, ``labels`` is binary
    (attack=1, benign=0), and ``class_tags``, when present, names the attack
    family of each row.
    """

    features: np.ndarray
    labels: np.ndarray
    class_tags: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        features = np.array(self.features, dtype=np.float64)
        labels = np.array(self.labels, dtype=np.int64)
        if features.ndim != 2:
            raise ParameterError("features must be a 2-D matrix")
        if labels.ndim != 1 or len(labels) != features.shape[0]:
            raise ParameterError("labels length must equal the feature row count")
        if not np.all(np.isfinite(features)):
            raise ParameterError("features contain non-finite values")
        if labels.size and not np.isin(labels, (0, 1)).all():
            raise ParameterError("labels must be binary (0 = benign, 1 = attack)")
        if self.class_tags is not None and len(self.class_tags) != len(labels):
            raise ParameterError("class_tags length must equal the sample count")
        features.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)
        if self.class_tags is not None:
            object.__setattr__(self, "class_tags", tuple(self.class_tags))

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def subset(self, indices: np.ndarray) -> "Dataset":
        """New dataset holding the given rows, in the given order."""
        idx = np.asarray(indices, dtype=np.int64)
        tags = None
        if self.class_tags is not None:
            tags = tuple(self.class_tags[i] for i in idx)
        return Dataset(self.features[idx], self.labels[idx], tags)


@dataclass(frozen=True)
class ClientShard:
    """One client's local slice of the corpus and the tags it owns."""

    client_id: int
    data: Dataset
    tag_set: frozenset[str] = frozenset()


@dataclass(frozen=True)
class PartitionSpec:
    """How to split a dataset across clients.

    ``by_tag`` hands whole tag groups to clients (each tag to exactly one
    client, dealt round-robin by descending tag size); ``proportional``
    splits a seeded shuffle by explicit counts or fractions, or evenly when
    ``proportions`` is None.
    """

    n_clients: int
    mode: str = "by_tag"
    proportions: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        if self.n_clients < 1:
            raise ParameterError("n_clients must be >= 1")
        if self.mode not in PARTITION_MODES:
            raise ParameterError(f"unknown partition mode: {self.mode!r}")
        if self.proportions is not None:
            object.__setattr__(self, "proportions", tuple(float(p) for p in self.proportions))
            if len(self.proportions) != self.n_clients:
                raise ParameterError("proportions must list one entry per client")
            if any(p <= 0 for p in self.proportions):
                raise ParameterError("proportions must be positive")


def generate_synthetic(
    n_samples: int,
    n_features: int,
    n_tags: int,
    separation: float,
    seed: int,
) -> Dataset:
    """Generate a binary-labeled Gaussian-cluster dataset, one cluster per tag.

    Each tag gets a random center; attack samples of a tag are displaced from
    its benign samples by ``separation`` along a shared unit axis, so a large
    separation forces linear separability. Tag centers are projected onto the
    subspace orthogonal to that axis. Deterministic for a fixed seed.
    """
    if n_samples < 2:
        raise ParameterError("n_samples must be >= 2")
    if n_features < 1:
        raise ParameterError("n_features must be >= 1")
    if n_tags < 1:
        raise ParameterError("n_tags must be >= 1")
    if not separation > 0:
        raise ParameterError("separation must be positive")

    rng = np.random.default_rng(seed)
    axis = rng.normal(size=n_features)
    axis /= np.linalg.norm(axis)
    centers = rng.normal(scale=TAG_SPREAD, size=(n_tags, n_features))
    centers -= np.outer(centers @ axis, axis)

    # Equal-count tags with labels balanced inside every tag. Equal tag
    # groups keep per-client shard sizes (and so SGD step counts) comparable
    # under tag-based partitioning, and per-tag balance keeps any client's
    # class mix at one half, so no client carries a systematic gradient bias.
    tag_idx = rng.permutation(np.arange(n_samples) % n_tags)
    labels = np.empty(n_samples, dtype=np.int64)
    for tag in range(n_tags):
        members = np.flatnonzero(tag_idx == tag)
        labels[members] = rng.permutation(np.arange(members.size) % 2)
    noise = rng.normal(size=(n_samples, n_features))
    features = centers[tag_idx] + labels[:, None] * (separation * axis) + noise
    tags = tuple(f"tag{t:02d}" for t in tag_idx)
    return Dataset(features, labels, tags)


def load_csv(
    path: str | Path,
    label_column: str,
    tag_column: str | None = None,
    *,
    benign_label: str = "normal",
    drop_columns: tuple[str, ...] = (),
    column_names: tuple[str, ...] | None = None,
    one_hot: bool = True,
    normalize: bool = True,
) -> Dataset:
    """Ingest a comma-separated file into a :class:`Dataset`.

    The first row is the header unless ``column_names`` supplies names for a
    headerless file. Labels binarize as ``benign_label`` -> 0, everything
    else -> 1. Fully non-numeric feature columns are one-hot encoded (or
    dropped when ``one_hot`` is False); columns mixing numeric and
    non-numeric cells raise, naming the first bad row and column. Numeric
    features are min-max normalized to [0, 1] per column unless disabled.

    ``tag_column`` may equal ``label_column``, in which case the raw label
    strings (attack family names) double as tags.
    """
    file_path = Path(path)
    if not file_path.exists():
        raise IngestionError(f"no such file: {file_path}")
    if column_names is not None:
        frame = pd.read_csv(file_path, header=None, names=list(column_names))
    else:
        frame = pd.read_csv(file_path, header=0)
    if frame.shape[0] == 0:
        raise IngestionError(f"{file_path}: no data rows")
    if label_column not in frame.columns:
        raise IngestionError(f"missing label column: {label_column!r}")
    if tag_column is not None and tag_column not in frame.columns:
        raise IngestionError(f"missing tag column: {tag_column!r}")

    raw_labels = frame[label_column].astype(str).str.strip()
    labels = (raw_labels != benign_label).astype(np.int64).to_numpy()
    tags: tuple[str, ...] | None = None
    if tag_column is not None:
        tags = tuple(frame[tag_column].astype(str).str.strip())

    reserved = {label_column}
    if tag_column is not None:
        reserved.add(tag_column)
    reserved.update(drop_columns)
    feature_cols = [c for c in frame.columns if c not in reserved]

    blocks: list[np.ndarray] = []
    for col in feature_cols:
        series = frame[col]
        missing = series.isna()
        if missing.any():
            row = int(np.flatnonzero(missing.to_numpy())[0])
            raise IngestionError(f"empty cell at row {row}, column {col!r}")
        coerced = pd.to_numeric(series, errors="coerce")
        bad = coerced.isna()
        if not bad.any():
            blocks.append(coerced.to_numpy(dtype=np.float64).reshape(-1, 1))
        elif bad.all():
            if one_hot:
                dummies = pd.get_dummies(series.astype(str), prefix=col)
                blocks.append(dummies.to_numpy(dtype=np.float64))
            # else: categorical column dropped
        else:
            row = int(np.flatnonzero(bad.to_numpy())[0])
            raise IngestionError(
                f"non-numeric value in numeric column at row {row}, column {col!r}"
            )

    if not blocks:
        raise IngestionError(f"{file_path}: no usable feature columns")
    features = np.hstack(blocks)
    if not np.all(np.isfinite(features)):
        raise IngestionError(f"{file_path}: non-finite feature values")
    if normalize:
        lo = features.min(axis=0)
        span = features.max(axis=0) - lo
        span[span == 0] = 1.0
        features = (features - lo) / span
    return Dataset(features, labels, tags)


def partition(dataset: Dataset, spec: PartitionSpec, seed: int) -> list[ClientShard]:
    """Split a dataset into disjoint client shards covering every sample."""
    if spec.mode == "by_tag":
        return _partition_by_tag(dataset, spec)
    return _partition_proportional(dataset, spec, seed)


def _partition_by_tag(dataset: Dataset, spec: PartitionSpec) -> list[ClientShard]:
    if dataset.class_tags is None:
        raise ParameterError("by_tag partitioning requires a dataset with tags")
    tags = np.asarray(dataset.class_tags, dtype=object)
    groups: dict[str, np.ndarray] = {
        str(tag): np.flatnonzero(tags == tag) for tag in sorted(set(dataset.class_tags))
    }
    if spec.n_clients > len(groups):
        raise ParameterError(
            f"by_tag mode cannot serve {spec.n_clients} clients with "
            f"{len(groups)} distinct tags"
        )
    # Deal tags to clients round-robin, largest group first.
    ranked = sorted(groups, key=lambda t: (-len(groups[t]), t))
    assigned: list[list[str]] = [[] for _ in range(spec.n_clients)]
    for rank, tag in enumerate(ranked):
        assigned[rank % spec.n_clients].append(tag)
    shards = []
    for cid, tag_list in enumerate(assigned):
        idx = np.sort(np.concatenate([groups[t] for t in tag_list]))
        shards.append(ClientShard(cid, dataset.subset(idx), frozenset(tag_list)))
    return shards


def _partition_proportional(
    dataset: Dataset, spec: PartitionSpec, seed: int
) -> list[ClientShard]:
    n = dataset.n_samples
    perm = np.random.default_rng(seed).permutation(n)
    if spec.proportions is None:
        pieces = np.array_split(perm, spec.n_clients)
    else:
        props = np.asarray(spec.proportions, dtype=np.float64)
        if np.isclose(props.sum(), 1.0):
            cuts = np.floor(np.cumsum(props) * n + 0.5).astype(np.int64)
            cuts[-1] = n
        elif float(props.sum()).is_integer() and int(props.sum()) == n:
            cuts = np.cumsum(props).astype(np.int64)
        else:
            raise ParameterError(
                "proportions must be fractions summing to 1 or counts summing "
                "to the dataset size"
            )
        pieces = np.split(perm, cuts[:-1])
    shards = []
    for cid, idx in enumerate(pieces):
        sub = dataset.subset(np.sort(idx))
        tag_set = frozenset(sub.class_tags) if sub.class_tags is not None else frozenset()
        shards.append(ClientShard(cid, sub, tag_set))
    return shards


def train_test_split(
    dataset: Dataset, test_fraction: float, seed: int
) -> tuple[Dataset, Dataset]:
    """Seeded split into (train, test), stratified so both sides keep the
    dataset's (tag, label) composition; both parts stay non-empty.

    Stratification keeps downstream client shards representative: without
    it, sampling noise skews each tag group's class mix, which turns into
    spurious per-client gradient bias.
    """
    if not 0 < test_fraction < 1:
        raise ParameterError("test_fraction must be in (0, 1)")
    if dataset.n_samples < 2:
        raise ParameterError("need at least 2 samples to split")
    rng = np.random.default_rng(seed)
    if dataset.class_tags is not None:
        keys = [(tag, int(lab)) for tag, lab in zip(dataset.class_tags, dataset.labels)]
    else:
        keys = [("", int(lab)) for lab in dataset.labels]
    groups: dict[tuple[str, int], list[int]] = {}
    for i, key in enumerate(keys):
        groups.setdefault(key, []).append(i)
    test_parts: list[np.ndarray] = []
    train_parts: list[np.ndarray] = []
    for key in sorted(groups):
        idx = np.asarray(groups[key], dtype=np.int64)
        perm = idx[rng.permutation(idx.size)]
        n_test = int(round(idx.size * test_fraction))
        test_parts.append(perm[:n_test])
        train_parts.append(perm[n_test:])
    test_idx = np.sort(np.concatenate(test_parts))
    train_idx = np.sort(np.concatenate(train_parts))
    # Degenerate fractions on tiny groups can empty one side; rebalance.
    if test_idx.size == 0:
        test_idx, train_idx = train_idx[:1], train_idx[1:]
    elif train_idx.size == 0:
        train_idx, test_idx = test_idx[:1], test_idx[1:]
    return dataset.subset(train_idx), dataset.subset(test_idx)
