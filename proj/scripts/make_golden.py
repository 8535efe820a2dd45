#!/usr/bin/env python3
"""Regenerates the MFCC golden vectors under tests/data/golden.

Each clip is written as a 22050 Hz PCM16 WAV together with <id>.mfcc.f32,
the 40x87 MFCC matrix (row-major, little-endian float32) computed by librosa
from the decoded int16/32768 samples. librosa is only needed to regenerate;
the C++ test suite reads the committed files.
"""
import pathlib
import wave

import librosa
import numpy as np

SR = 22050
N = 2 * SR
OUT = pathlib.Path(__file__).resolve().parent.parent / "tests" / "data" / "golden"


def clips():
    t = np.arange(N) / SR
    rng = np.random.default_rng(1234)
    yield "sine440", 0.5 * np.sin(2 * np.pi * 440.0 * t)
    yield "chirp", 0.4 * librosa.chirp(fmin=100.0, fmax=5000.0, sr=SR, length=N)
    env = np.minimum(1.0, t / 0.1) * np.exp(-0.8 * t)
    harm = sum(np.sin(2 * np.pi * 180.0 * h * t) / h for h in range(1, 8))
    yield "harmonic_noise", 0.3 * env * harm / 2.6 + 0.02 * rng.standard_normal(N)


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    for name, x in clips():
        pcm = np.clip(np.round(x * 32768.0), -32768, 32767).astype("<i2")
        with wave.open(str(OUT / f"{name}.wav"), "wb") as w:
            w.setnchannels(1)
            w.setsampwidth(2)
            w.setframerate(SR)
            w.writeframes(pcm.tobytes())
        y = pcm.astype(np.float64) / 32768.0
        m = librosa.feature.mfcc(y=y, sr=SR, n_mfcc=40, n_fft=2048, hop_length=512,
                                 window="hann", center=True, pad_mode="reflect",
                                 n_mels=128, htk=False)
        assert m.shape == (40, 87), m.shape
        m.astype("<f4").tofile(OUT / f"{name}.mfcc.f32")
        print(name, m.shape, float(m.min()), float(m.max()))


if __name__ == "__main__":
    main()
