import numpy as np
import pytest
import scipy.io.wavfile

from steb_extract.audio import TARGET_SR, load_16k_mono, load_audio, to_mono_16k


def write_sine(path, sr, seconds=0.5, freq=440.0, stereo=False, dtype=np.int16):
    t = np.arange(int(sr * seconds)) / sr
    wave = 0.5 * np.sin(2 * np.pi * freq * t)
    if stereo:
        wave = np.stack([wave, wave], axis=1)
    if dtype == np.int16:
        data = (wave * 32767).astype(np.int16)
    else:
        data = wave.astype(np.float32)
    scipy.io.wavfile.write(path, sr, data)
    return wave


@pytest.mark.parametrize("sr", [8000, 16000, 44100])
@pytest.mark.parametrize("dtype", [np.int16, np.float32])
def test_resampled_length_and_scale(tmp_path, sr, dtype):
    path = tmp_path / "tone.wav"
    write_sine(path, sr, dtype=dtype)
    wav = load_16k_mono(path)
    expected = int(round(0.5 * TARGET_SR))
    assert abs(len(wav) - expected) <= 2
    assert np.abs(wav).max() <= 0.6  # amplitude preserved, not integer-scaled


def test_stereo_averaged_to_mono(tmp_path):
    path = tmp_path / "stereo.wav"
    write_sine(path, 16000, stereo=True)
    wav = load_16k_mono(path)
    assert wav.ndim == 1


def test_tone_frequency_survives_resample(tmp_path):
    path = tmp_path / "tone.wav"
    write_sine(path, 44100, seconds=1.0, freq=1000.0)
    wav = load_16k_mono(path)
    spectrum = np.abs(np.fft.rfft(wav))
    peak_hz = np.fft.rfftfreq(len(wav), 1 / TARGET_SR)[np.argmax(spectrum)]
    assert abs(peak_hz - 1000.0) < 5.0


def test_unsupported_format_rejected(tmp_path):
    path = tmp_path / "clip.mp3"
    path.write_bytes(b"\xff\xfb")
    with pytest.raises(ValueError, match="unsupported audio format"):
        load_audio(path)


def test_empty_audio_rejected():
    with pytest.raises(ValueError, match="empty or malformed"):
        to_mono_16k(np.zeros(0), 16000)
