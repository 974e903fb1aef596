"""Protocol builders: map corpus layouts to (utterance id, class, split) rows.

Bona fide speech is excluded everywhere; the classes are the synthetic
generation systems only.
"""

import csv
from pathlib import Path

from .errors import ExtractError

ASV_PROTOCOL_FILES = {
    "train": "ASVspoof2019_LA_cm_protocols/ASVspoof2019.LA.cm.train.trn.txt",
    "dev": "ASVspoof2019_LA_cm_protocols/ASVspoof2019.LA.cm.dev.trl.txt",
    "eval": "ASVspoof2019_LA_cm_protocols/ASVspoof2019.LA.cm.eval.trl.txt",
}

CFAD_SPLITS = ("train", "dev", "test")
AUDIO_SUFFIXES = (".wav", ".flac")


def build_protocol(dataset_root, dataset_kind):
    """Return protocol rows [(utt_id, label, split), ...] for a corpus layout."""
    root = Path(dataset_root)
    if dataset_kind == "asv":
        return _build_asv(root)
    if dataset_kind == "cfad":
        return _build_cfad(root)
    raise ExtractError(f"unknown dataset kind {dataset_kind!r}; choose asv or cfad")


def _build_asv(root):
    """ASVspoof-2019 LA: merge train/dev/eval, keep the A01..A19 spoof classes."""
    rows = []
    for split, rel in ASV_PROTOCOL_FILES.items():
        path = root / rel
        if not path.exists():
            expected = "\n  ".join(ASV_PROTOCOL_FILES.values())
            raise ExtractError(
                f"unrecognized ASVspoof-2019 layout: missing {path}; expected the "
                f"official protocol files under {root}:\n  {expected}"
            )
        for line in path.read_text().splitlines():
            parts = line.split()
            if len(parts) < 5:
                continue
            _, utt_id, _, attack, key = parts[:5]
            if key == "bonafide" or attack == "-":
                continue
            rows.append((utt_id, attack, split))
    if not rows:
        raise ExtractError("ASV protocol files contain no spoofed entries")
    return rows


def _build_cfad(root):
    """CFAD: <root>/<split>/fake/<method>/*.wav|*.flac, split in train/dev/test."""
    rows = []
    seen_split = False
    for split in CFAD_SPLITS:
        fake_dir = root / split / "fake"
        if not fake_dir.is_dir():
            continue
        seen_split = True
        for method_dir in sorted(p for p in fake_dir.iterdir() if p.is_dir()):
            for audio in sorted(method_dir.rglob("*")):
                if audio.suffix.lower() in AUDIO_SUFFIXES:
                    rows.append((audio.stem, method_dir.name, split))
    if not seen_split or not rows:
        raise ExtractError(
            f"unrecognized CFAD layout under {root}; expected "
            "<root>/{train,dev,test}/fake/<method>/*.wav|*.flac with one "
            "directory per synthesis method"
        )
    return rows


def write_protocol(rows, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["utt_id", "label", "split"])
        writer.writerows(rows)


def read_protocol(path):
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["utt_id", "label", "split"]:
            raise ExtractError(
                f"{path} is not a protocol CSV (expected header utt_id,label,split)"
            )
        for record in reader:
            if len(record) != 3:
                raise ExtractError(f"malformed protocol row: {record}")
            rows.append(tuple(record))
    if not rows:
        raise ExtractError(f"protocol {path} is empty")
    return rows
