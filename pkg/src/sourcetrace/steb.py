"""Embedding-table I/O, view pairing, stratified folds, deterministic batching.

STEB file format, little-endian throughout:

    bytes 0-3    magic "STEB"
    byte  4      version, currently 1
    bytes 5-8    uint32 N, number of rows
    bytes 9-12   uint32 D, embedding dimension
    bytes 13-16  uint32 C, class count (0 = labels absent)
    then         N*D float32 values, row-major
    then         N uint16 labels, present only when C > 0

A sidecar manifest "<name>.manifest.json" next to the file carries the
utterance ids, class names and source-model tag; defaults are generated
when it is missing.
"""

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError

STEB_MAGIC = b"STEB"
STEB_VERSION = 1
_HEADER = struct.Struct("<4sBIII")

# embedding widths of the upstream speech models this pipeline is used with
KNOWN_MODEL_DIMS = {
    "wav2vec2": 768,
    "wavlm": 768,
    "unispeech-sat": 768,
    "xls-r": 1280,
    "whisper": 512,
    "mms": 1280,
    "x-vector": 512,
    "ecapa": 192,
    "wav2vec2-emo": 768,
    "trillsson": 1024,
}


@dataclass
class EmbeddingTable:
    """N fixed-dimension embedding rows with ids, integer labels and class names."""

    ids: list
    vectors: np.ndarray  # (N, D) float32
    labels: np.ndarray  # (N,) int64
    class_names: list
    source_model: str = ""

    def __post_init__(self):
        self.vectors = np.ascontiguousarray(self.vectors, dtype=np.float32)
        if self.vectors.ndim != 2:
            raise DataError(f"vectors must be 2-d, got shape {self.vectors.shape}")
        self.labels = np.asarray(self.labels, dtype=np.int64)
        self.ids = list(self.ids)
        self.class_names = list(self.class_names)
        n = self.vectors.shape[0]
        if len(self.ids) != n or self.labels.shape != (n,):
            raise DataError(
                f"row count mismatch: {n} vectors, {len(self.ids)} ids, "
                f"{self.labels.shape[0]} labels"
            )
        c = len(self.class_names)
        if n and c and (self.labels.min() < 0 or self.labels.max() >= c):
            raise DataError("label out of range")
        if self.source_model in KNOWN_MODEL_DIMS:
            expected = KNOWN_MODEL_DIMS[self.source_model]
            if self.dim != expected:
                raise DataError(
                    f"source model {self.source_model!r} produces {expected}-dim "
                    f"embeddings, file has {self.dim}"
                )

    @property
    def n(self):
        return self.vectors.shape[0]

    @property
    def dim(self):
        return self.vectors.shape[1]

    @property
    def n_classes(self):
        return len(self.class_names)

    def subset(self, indices):
        idx = np.asarray(indices)
        return EmbeddingTable(
            ids=[self.ids[i] for i in idx],
            vectors=self.vectors[idx],
            labels=self.labels[idx],
            class_names=self.class_names,
            source_model=self.source_model,
        )


@dataclass
class PairedDataset:
    """Two embedding views of the same utterances, aligned row by row."""

    view_a: EmbeddingTable
    view_b: EmbeddingTable

    def __post_init__(self):
        if self.view_a.ids != self.view_b.ids:
            raise DataError("paired views must share the same id sequence")
        if not np.array_equal(self.view_a.labels, self.view_b.labels):
            raise DataError("paired views must share the same labels")

    @property
    def n(self):
        return self.view_a.n

    @property
    def labels(self):
        return self.view_a.labels

    @property
    def class_names(self):
        return self.view_a.class_names

    def subset(self, indices):
        return PairedDataset(self.view_a.subset(indices), self.view_b.subset(indices))


@dataclass
class FoldPlan:
    k: int
    assignments: np.ndarray
    seed: int = 0

    def test_indices(self, fold):
        return np.flatnonzero(self.assignments == fold)

    def train_indices(self, fold):
        return np.flatnonzero(self.assignments != fold)


def manifest_path(path):
    p = Path(path)
    stem = p.stem if p.suffix else p.name
    return p.with_name(stem + ".manifest.json")


def write_embedding_file(table, path):
    """Write a table as STEB plus its sidecar manifest."""
    n, d = table.vectors.shape
    c = len(table.class_names)
    if max(n, d, c) > 0xFFFFFFFF:
        raise DataError("dimension exceeds STEB format limit (2^32 - 1)")
    if c > 0xFFFF:
        raise DataError("STEB labels are uint16; class count exceeds 65535")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(STEB_MAGIC, STEB_VERSION, n, d, c))
        fh.write(np.ascontiguousarray(table.vectors, dtype="<f4").tobytes())
        if c > 0:
            fh.write(table.labels.astype("<u2").tobytes())
    manifest = {
        "ids": table.ids,
        "class_names": table.class_names,
        "source_model": table.source_model,
    }
    with open(manifest_path(path), "w") as fh:
        json.dump(manifest, fh, indent=1)


def load_embedding_file(path):
    """Load an STEB file, consulting the sidecar manifest when present."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size or raw[:4] != STEB_MAGIC:
        raise DataError(f"not an STEB file: {path}")
    magic, version, n, d, c = _HEADER.unpack_from(raw)
    if version != STEB_VERSION:
        raise DataError(f"unsupported STEB version {version}")
    vec_bytes = n * d * 4
    label_bytes = n * 2 if c > 0 else 0
    expected = _HEADER.size + vec_bytes + label_bytes
    if len(raw) != expected:
        raise DataError(f"corrupt file: expected {expected} bytes, found {len(raw)}")
    vectors = np.frombuffer(raw, dtype="<f4", count=n * d, offset=_HEADER.size)
    vectors = vectors.reshape(n, d).copy()
    if c > 0:
        labels = np.frombuffer(
            raw, dtype="<u2", count=n, offset=_HEADER.size + vec_bytes
        ).astype(np.int64)
        if labels.size and labels.max() >= c:
            raise DataError(f"label out of range: {labels.max()} >= {c} classes")
    else:
        labels = np.zeros(n, dtype=np.int64)

    mpath = manifest_path(path)
    ids = [f"utt_{i:06d}" for i in range(n)]
    class_names = [f"class_{i}" for i in range(c)]
    source_model = ""
    if mpath.exists():
        with open(mpath) as fh:
            manifest = json.load(fh)
        if "ids" in manifest:
            if len(manifest["ids"]) != n:
                raise DataError(
                    f"manifest lists {len(manifest['ids'])} ids for {n} rows"
                )
            ids = [str(i) for i in manifest["ids"]]
        if "class_names" in manifest and manifest["class_names"]:
            if c > 0 and len(manifest["class_names"]) != c:
                raise DataError(
                    f"manifest lists {len(manifest['class_names'])} class names, "
                    f"file declares {c}"
                )
            class_names = [str(s) for s in manifest["class_names"]]
        source_model = str(manifest.get("source_model", ""))
    return EmbeddingTable(
        ids=ids,
        vectors=vectors,
        labels=labels,
        class_names=class_names,
        source_model=source_model,
    )


def pair_align(a, b):
    """Reorder b's rows to a's id order and return the paired dataset."""
    if a.n == 0 or b.n == 0:
        raise DataError("cannot pair empty tables")
    pos_b = {uid: i for i, uid in enumerate(b.ids)}
    order = []
    for uid in a.ids:
        if uid not in pos_b:
            raise DataError(f"unpairable sample {uid!r}")
        order.append(pos_b[uid])
    only_b = set(b.ids) - set(a.ids)
    if only_b:
        raise DataError(f"unpairable sample {sorted(only_b)[0]!r}")
    b_aligned = b.subset(np.asarray(order))
    if not np.array_equal(a.labels, b_aligned.labels):
        bad = int(np.flatnonzero(a.labels != b_aligned.labels)[0])
        raise DataError(f"label conflict for sample {a.ids[bad]!r}")
    return PairedDataset(view_a=a, view_b=b_aligned)


def stratified_kfold(labels, k, seed):
    """Assign each sample to one of k folds, class counts differing by <= 1."""
    labels = np.asarray(labels, dtype=np.int64)
    if k < 2:
        raise ConfigError(f"need k >= 2 folds, got {k}")
    rng = np.random.default_rng(seed)
    assignments = np.full(labels.shape[0], -1, dtype=np.int64)
    classes = np.unique(labels)
    for ci, cls in enumerate(classes):
        members = np.flatnonzero(labels == cls)
        if members.size < k:
            raise DataError(
                f"class {int(cls)} too small for {k} folds ({members.size} samples)"
            )
        rng.shuffle(members)
        # rotate the start fold per class so remainders spread across folds
        folds = (np.arange(members.size) + ci) % k
        assignments[members] = folds
    return FoldPlan(k=k, assignments=assignments, seed=seed)


def stratified_holdout(labels, fraction, seed):
    """Split indices into (rest, held_out) keeping class proportions."""
    labels = np.asarray(labels, dtype=np.int64)
    if not 0.0 < fraction < 1.0:
        raise ConfigError(f"holdout fraction must be in (0, 1), got {fraction}")
    rng = np.random.default_rng(seed)
    held = []
    rest = []
    for cls in np.unique(labels):
        members = np.flatnonzero(labels == cls)
        rng.shuffle(members)
        n_held = max(1, int(round(fraction * members.size)))
        if n_held >= members.size:
            raise DataError(
                f"class {int(cls)} has too few samples ({members.size}) to hold out "
                f"{fraction:.0%}"
            )
        held.append(members[:n_held])
        rest.append(members[n_held:])
    return np.sort(np.concatenate(rest)), np.sort(np.concatenate(held))


def batch_iter(data, batch_size, shuffle_seed, epoch):
    """Deterministic shuffled index batches; a final batch of size < 2 is dropped."""
    if batch_size < 2:
        raise ConfigError(f"batch_size must be >= 2, got {batch_size}")
    n = data if isinstance(data, int) else data.n
    rng = np.random.default_rng((shuffle_seed, epoch))
    perm = rng.permutation(n)
    batches = []
    for start in range(0, n, batch_size):
        chunk = perm[start : start + batch_size]
        if chunk.size >= 2:
            batches.append(chunk)
    return batches
