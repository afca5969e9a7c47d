#!/usr/bin/env python3
"""Encodes one sentence with a BERT-style model for the text baseline.

Reads {"chars": [...]} on stdin and writes {"pieces": [[...], ...],
"char_pieces": [[...], ...]} on stdout. Special tokens are dropped.

usage: hf_text_encoder.py [MODEL]   (default bert-base-chinese)
"""

import json
import sys

import torch
from transformers import AutoModel, AutoTokenizer


def main(name):
    chars = json.load(sys.stdin)["chars"]
    tok = AutoTokenizer.from_pretrained(name)
    model = AutoModel.from_pretrained(name).eval()
    enc = tok(chars, is_split_into_words=True, return_tensors="pt")
    with torch.no_grad():
        hidden = model(**enc).last_hidden_state[0]
    word_ids = enc.word_ids(0)
    keep = [i for i, w in enumerate(word_ids) if w is not None]
    pieces = [hidden[i].tolist() for i in keep]
    char_pieces = [[] for _ in chars]
    for j, i in enumerate(keep):
        char_pieces[word_ids[i]].append(j)
    json.dump({"pieces": pieces, "char_pieces": char_pieces}, sys.stdout)


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "bert-base-chinese")
