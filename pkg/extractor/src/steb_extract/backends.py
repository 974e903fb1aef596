"""Embedding backends.

``hf``   runs the real frozen models (transformers for the wav2vec2 family
         and Whisper's encoder, speechbrain for the speaker/emotion models,
         tensorflow_hub for trillsson) and mean-pools the last hidden state
         over time. Needs the packages installed and the weights available
         (first use downloads them).
``stub`` is a deterministic offline stand-in: a fixed random projection of
         log-spectrum summary features at the correct output width. It
         exists so the full pipeline (decode, resample, pool, serialize)
         can run and be tested without model weights; it is never selected
         implicitly.
"""

import hashlib

import numpy as np

from .errors import ExtractError
from .registry import expected_dim, model_entry

STUB_FEATURES = 64


def make_backend(name, model_id):
    if name == "hf":
        return _RealBackend(model_id)
    if name == "stub":
        return StubBackend(model_id)
    raise ExtractError(f"unknown backend {name!r}; choose hf or stub")


class StubBackend:
    """Deterministic projection of 64 log-spectrum features to the model width."""

    def __init__(self, model_id):
        self.model_id = model_id
        self.dim = expected_dim(model_id)
        seed = int.from_bytes(
            hashlib.sha256(model_id.encode()).digest()[:8], "little"
        )
        rng = np.random.default_rng(seed)
        self._proj = rng.standard_normal((STUB_FEATURES, self.dim))
        self._proj /= np.sqrt(STUB_FEATURES)

    def embed(self, wav16k):
        return _summary_features(wav16k) @ self._proj


def _summary_features(wav):
    power = np.abs(np.fft.rfft(wav)) ** 2
    bands = [
        float(np.log1p(chunk.mean())) if chunk.size else 0.0
        for chunk in np.array_split(power, STUB_FEATURES - 2)
    ]
    return np.array([float(wav.mean()), float(wav.std())] + bands)


class _RealBackend:
    """Lazy wrapper over the real frozen models; loads on first embed call."""

    def __init__(self, model_id):
        self.model_id = model_id
        self.dim = expected_dim(model_id)
        self._entry = model_entry(model_id)
        self._embed = None

    def embed(self, wav16k):
        if self._embed is None:
            self._embed = self._load()
        return self._embed(wav16k)

    def _load(self):
        family = self._entry["family"]
        source = self._entry["source"]
        if family in ("hf", "hf-whisper"):
            return _load_hf(source, family == "hf-whisper")
        if family == "speechbrain":
            return _load_speechbrain(source)
        if family == "tfhub":
            return _load_trillsson(source)
        raise ExtractError(f"no loader for model family {family!r}")


def _load_hf(source, whisper):
    try:
        import torch
        from transformers import AutoFeatureExtractor, AutoModel
    except ImportError as exc:
        raise RuntimeError(
            "the hf backend needs torch and transformers installed"
        ) from exc
    extractor = AutoFeatureExtractor.from_pretrained(source)
    model = AutoModel.from_pretrained(source)
    model.eval()

    def embed(wav16k):
        inputs = extractor(
            wav16k.astype(np.float32), sampling_rate=16000, return_tensors="pt"
        )
        with torch.no_grad():
            if whisper:
                hidden = model.encoder(
                    inputs["input_features"]
                ).last_hidden_state
            else:
                hidden = model(inputs["input_values"]).last_hidden_state
        return hidden.squeeze(0).mean(dim=0).numpy()

    return embed


def _load_speechbrain(source):
    try:
        import torch
        from speechbrain.inference import EncoderClassifier
    except ImportError as exc:
        raise RuntimeError(
            "this model needs the speechbrain package (pip install speechbrain)"
        ) from exc
    classifier = EncoderClassifier.from_hparams(source=source)

    def embed(wav16k):
        with torch.no_grad():
            batch = torch.from_numpy(wav16k.astype(np.float32)).unsqueeze(0)
            emb = classifier.encode_batch(batch)
        return emb.squeeze().numpy()

    return embed


def _load_trillsson(source):
    try:
        import tensorflow_hub as hub
    except ImportError as exc:
        raise RuntimeError(
            "trillsson is distributed for TensorFlow; install tensorflow and "
            "tensorflow_hub and fetch the model from its kaggle page "
            f"({source})"
        ) from exc
    model = hub.load(source)

    def embed(wav16k):
        out = model(np.asarray(wav16k, dtype=np.float32)[None, :])
        return np.asarray(out["embedding"])[0]

    return embed
