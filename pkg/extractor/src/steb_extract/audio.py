"""Audio loading and resampling to the 16 kHz mono float format models expect."""

import math

import numpy as np
import scipy.io.wavfile
import scipy.signal

TARGET_SR = 16000

_INT_SCALE = {
    np.dtype(np.int16): 2**15,
    np.dtype(np.int32): 2**31,
    np.dtype(np.uint8): 2**7,  # uint8 wavs are offset binary
}


def load_audio(path):
    """Decode a WAV or FLAC file to (float64 samples in [-1, 1], sample rate)."""
    suffix = str(path).lower().rsplit(".", 1)[-1]
    if suffix == "wav":
        sr, data = scipy.io.wavfile.read(path)
        data = np.asarray(data)
        if data.dtype in _INT_SCALE:
            scale = _INT_SCALE[data.dtype]
            if data.dtype == np.dtype(np.uint8):
                data = data.astype(np.float64) - 128.0
            data = data.astype(np.float64) / scale
        else:
            data = data.astype(np.float64)
        return data, int(sr)
    if suffix == "flac":
        try:
            import soundfile
        except ImportError as exc:
            raise RuntimeError(
                "FLAC decoding needs the soundfile package (pip install soundfile)"
            ) from exc
        data, sr = soundfile.read(path, dtype="float64")
        return np.asarray(data), int(sr)
    raise ValueError(f"unsupported audio format: {path}")


def to_mono_16k(data, sr):
    """Average channels and polyphase-resample to 16 kHz."""
    if data.ndim == 2:
        data = data.mean(axis=1)
    if data.ndim != 1 or data.size == 0:
        raise ValueError("empty or malformed audio")
    if sr == TARGET_SR:
        return data
    g = math.gcd(TARGET_SR, sr)
    return scipy.signal.resample_poly(data, TARGET_SR // g, sr // g)


def load_16k_mono(path):
    data, sr = load_audio(path)
    return to_mono_16k(data, sr)
