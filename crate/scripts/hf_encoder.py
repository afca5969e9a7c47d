#!/usr/bin/env python3
"""Writes every hidden state of a wav2vec2-style checkpoint as a TPRB file.

usage: hf_encoder.py MODEL_PATH INPUT_WAV OUTPUT_TPRB
"""

import struct
import sys

import numpy as np
from scipy.io import wavfile
import torch
from transformers import AutoFeatureExtractor, AutoModel

_CACHE = {}


def load(path):
    if path not in _CACHE:
        model = AutoModel.from_pretrained(path, output_hidden_states=True).eval()
        try:
            fe = AutoFeatureExtractor.from_pretrained(path)
        except OSError:
            fe = None
        _CACHE[path] = (model, fe)
    return _CACHE[path]


def write_tprb(path, layers):
    n_frames, dim = layers[0].shape
    with open(path, "wb") as f:
        f.write(b"TPRB")
        f.write(struct.pack("<4I", 1, len(layers), n_frames, dim))
        for layer in layers:
            f.write(np.ascontiguousarray(layer, dtype="<f4").tobytes())


def main(model_path, wav_path, out_path):
    sr, audio = wavfile.read(wav_path)
    if audio.dtype.kind == "i":
        audio = audio / float(np.iinfo(audio.dtype).max)
    audio = audio.astype(np.float32)
    if sr != 16000:
        sys.exit(f"expected 16 kHz input, got {sr}")
    model, fe = load(model_path)
    if fe is not None:
        x = fe(audio, sampling_rate=sr, return_tensors="pt").input_values
    else:
        x = torch.from_numpy((audio - audio.mean()) / (audio.std() + 1e-7))[None]
    with torch.no_grad():
        states = model(x).hidden_states
    write_tprb(out_path, [s[0].numpy() for s in states])


if __name__ == "__main__":
    if len(sys.argv) != 4:
        sys.exit(__doc__)
    main(*sys.argv[1:])
