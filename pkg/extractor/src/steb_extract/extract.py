"""Run a frozen model over a protocol's utterances and write an STEB table.

Each utterance is decoded, resampled to 16 kHz mono, embedded by the
backend (mean-pooled last hidden state for the real models) and written as
one row, in protocol order. Undecodable files are skipped with a logged
id; a protocol id with no audio file underneath the root is a hard error.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
from sourcetrace.steb import EmbeddingTable, write_embedding_file

from .audio import load_16k_mono
from .backends import make_backend
from .errors import ExtractError
from .protocols import AUDIO_SUFFIXES, read_protocol
from .registry import expected_dim

log = logging.getLogger("steb_extract")


@dataclass
class ExtractionJob:
    audio_root: str
    protocol: str  # CSV path or pre-parsed rows
    model_id: str
    out_path: str
    split: Optional[str] = None  # keep only rows with this split tag
    backend: str = "hf"


def index_audio_files(root):
    """Map utterance id (file stem) to path for every audio file under root."""
    index = {}
    for path in Path(root).rglob("*"):
        if path.suffix.lower() in AUDIO_SUFFIXES and path.is_file():
            index.setdefault(path.stem, path)
    return index


def extract(job):
    """Run the job; returns the EmbeddingTable written to job.out_path."""
    rows = (
        read_protocol(job.protocol)
        if isinstance(job.protocol, (str, Path))
        else list(job.protocol)
    )
    dim = expected_dim(job.model_id)
    class_names = sorted({label for _, label, _ in rows})
    label_index = {name: i for i, name in enumerate(class_names)}
    if job.split is not None:
        rows = [r for r in rows if r[2] == job.split]
        if not rows:
            raise ExtractError(f"no protocol rows with split {job.split!r}")

    audio_index = index_audio_files(job.audio_root)
    backend = make_backend(job.backend, job.model_id)

    ids, vectors, labels = [], [], []
    for utt_id, label, _ in rows:
        path = audio_index.get(utt_id)
        if path is None:
            raise ExtractError(
                f"protocol id {utt_id!r} has no audio file under {job.audio_root}"
            )
        try:
            wav = load_16k_mono(path)
        except Exception as exc:  # undecodable file: skip, keep going
            log.warning("skipping undecodable file %s (%s)", path, exc)
            continue
        vec = np.asarray(backend.embed(wav), dtype=np.float64).reshape(-1)
        if vec.shape[0] != dim:
            raise ExtractError(
                f"model {job.model_id!r} produced a {vec.shape[0]}-dim embedding, "
                f"expected {dim}"
            )
        ids.append(utt_id)
        vectors.append(vec.astype(np.float32))
        labels.append(label_index[label])

    if not ids:
        raise ExtractError("no utterances could be extracted")
    table = EmbeddingTable(
        ids=ids,
        vectors=np.stack(vectors),
        labels=np.asarray(labels),
        class_names=class_names,
        source_model=job.model_id,
    )
    write_embedding_file(table, job.out_path)
    log.info(
        "wrote %d x %d embeddings (%s) to %s",
        table.n, table.dim, job.model_id, job.out_path,
    )
    return table
