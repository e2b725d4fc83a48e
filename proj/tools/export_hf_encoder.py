#!/usr/bin/env python3
"""Convert a Hugging Face BERT or RoBERTa checkpoint into a stancekit .skt file.

    export_hf_encoder.py bert-base-uncased bert-base-uncased.skt
    export_hf_encoder.py ./local/roberta-dir roberta-base.skt --dtype f64

The output holds the encoder weights (model prefix stripped), the encoder
configuration and the tokenizer vocabulary, so the C++ side needs nothing
else at run time.
"""

import argparse
import json
import struct
import sys

import numpy as np

MAGIC = b"SKT1"
VERSION = 1


def write_skt(path, meta, tensors):
    """tensors: dict name -> 2-D numpy array (f32 or f64)."""
    index = {}
    offset = 0
    blobs = []
    for name in sorted(tensors):
        arr = np.ascontiguousarray(tensors[name])
        if arr.ndim == 1:
            arr = arr.reshape(1, -1)
        if arr.ndim != 2:
            raise ValueError(f"{name}: expected a 1-D or 2-D tensor, got shape {arr.shape}")
        dtype = {np.dtype("<f4"): "f32", np.dtype("<f8"): "f64"}.get(arr.dtype.newbyteorder("<"))
        if dtype is None:
            raise ValueError(f"{name}: unsupported dtype {arr.dtype}")
        raw = arr.astype(arr.dtype.newbyteorder("<"), copy=False).tobytes()
        index[name] = {"dtype": dtype, "shape": [int(arr.shape[0]), int(arr.shape[1])], "offset": offset}
        offset += len(raw)
        blobs.append(raw)
    meta = dict(meta)
    meta["tensors"] = index
    text = json.dumps(meta, ensure_ascii=False).encode("utf-8")
    with open(path, "wb") as out:
        out.write(MAGIC)
        out.write(struct.pack("<IQ", VERSION, len(text)))
        out.write(text)
        for raw in blobs:
            out.write(raw)


def tokenizer_spec(tokenizer, family):
    if family == "bert":
        vocab = tokenizer.get_vocab()
        ordered = [None] * (max(vocab.values()) + 1)
        for token, idx in vocab.items():
            ordered[idx] = token
        ordered = [t if t is not None else f"[unused_{i}]" for i, t in enumerate(ordered)]
        lowercase = bool(getattr(tokenizer, "do_lower_case", True))
        return {"type": "wordpiece", "lowercase": lowercase, "vocab": ordered}
    model = json.loads(tokenizer.backend_tokenizer.to_str())["model"]
    merges = [m if isinstance(m, str) else " ".join(m) for m in model["merges"]]
    return {"type": "byte_bpe", "vocab": model["vocab"], "merges": merges}


def encoder_config(config, family):
    offset = config.pad_token_id + 1 if family == "roberta" else 0
    return {
        "family": family,
        "vocab_size": config.vocab_size,
        "hidden": config.hidden_size,
        "layers": config.num_hidden_layers,
        "heads": config.num_attention_heads,
        "intermediate": config.intermediate_size,
        "max_positions": config.max_position_embeddings,
        "type_vocab": config.type_vocab_size,
        "position_offset": offset,
        "layer_norm_eps": config.layer_norm_eps,
    }


def export(source, output, dtype="f32"):
    from transformers import AutoModel, AutoTokenizer

    model = AutoModel.from_pretrained(source)
    tokenizer = AutoTokenizer.from_pretrained(source)
    family = model.config.model_type
    if family not in ("bert", "roberta"):
        raise SystemExit(f"unsupported model type {family}")
    if getattr(model.config, "hidden_act", "gelu") != "gelu":
        raise SystemExit("only exact GELU encoders are supported")
    np_dtype = np.float32 if dtype == "f32" else np.float64
    tensors = {}
    for name, value in model.state_dict().items():
        if name.endswith("position_ids") or name.endswith("token_type_ids"):
            continue
        for prefix in ("bert.", "roberta."):
            if name.startswith(prefix):
                name = name[len(prefix):]
        tensors[name] = value.detach().cpu().numpy().astype(np_dtype)
    meta = {
        "format": "stancekit-encoder",
        "source": str(source),
        "config": encoder_config(model.config, family),
        "tokenizer": tokenizer_spec(tokenizer, family),
    }
    write_skt(output, meta, tensors)


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("source", help="model id or local directory")
    parser.add_argument("output", help="destination .skt file")
    parser.add_argument("--dtype", choices=["f32", "f64"], default="f32")
    args = parser.parse_args(argv)
    export(args.source, args.output, args.dtype)
    return 0


if __name__ == "__main__":
    sys.exit(main())
