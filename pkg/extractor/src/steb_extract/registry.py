"""Supported frozen speech models: embedding widths and upstream sources.

Each entry records the output dimension contract and where the weights
live. The hf family runs through transformers AutoModel (Whisper uses the
encoder's last hidden state); the speechbrain family needs the speechbrain
package; trillsson is distributed for TensorFlow.
"""

from .errors import ExtractError

MODELS = {
    "wav2vec2": {"dim": 768, "family": "hf", "source": "facebook/wav2vec2-base"},
    "wavlm": {"dim": 768, "family": "hf", "source": "microsoft/wavlm-base"},
    "unispeech-sat": {
        "dim": 768,
        "family": "hf",
        "source": "microsoft/unispeech-sat-base",
    },
    "xls-r": {"dim": 1280, "family": "hf", "source": "facebook/wav2vec2-xls-r-300m"},
    "whisper": {"dim": 512, "family": "hf-whisper", "source": "openai/whisper-base"},
    "mms": {"dim": 1280, "family": "hf", "source": "facebook/mms-1b"},
    "x-vector": {
        "dim": 512,
        "family": "speechbrain",
        "source": "speechbrain/spkrec-xvect-voxceleb",
    },
    "ecapa": {
        "dim": 192,
        "family": "speechbrain",
        "source": "speechbrain/spkrec-ecapa-voxceleb",
    },
    "wav2vec2-emo": {
        "dim": 768,
        "family": "speechbrain",
        "source": "speechbrain/emotion-recognition-wav2vec2-IEMOCAP",
    },
    "trillsson": {"dim": 1024, "family": "tfhub", "source": "google/trillsson"},
}


def model_entry(model_id):
    try:
        return MODELS[model_id]
    except KeyError:
        raise ExtractError(
            f"unknown model id {model_id!r}; supported: {', '.join(sorted(MODELS))}"
        ) from None


def expected_dim(model_id):
    return model_entry(model_id)["dim"]
