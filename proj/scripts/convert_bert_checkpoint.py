#!/usr/bin/env python3
"""Convert a Hugging Face BERT checkpoint into a pcred pretrained directory.

Writes weights.bin (encoder tensors only), model.json (encoder section) and
vocab.txt. Point `pretrained_dir` in a run config at the output directory and
set `encoder = pretrained`.

    python scripts/convert_bert_checkpoint.py bert-base-cased out/bert-base-cased
"""

import argparse
import json
import shutil
import struct
from pathlib import Path

import numpy as np
import torch
from transformers import BertModel, BertTokenizer

MAGIC = b"PCRW"
VERSION = 1

LINEAR_SUFFIXES = (
    "attention.self.query",
    "attention.self.key",
    "attention.self.value",
    "attention.output.dense",
    "intermediate.dense",
    "output.dense",
)
NORM_SUFFIXES = ("attention.output.LayerNorm", "output.LayerNorm")


def collect_tensors(model: BertModel) -> list[tuple[str, np.ndarray]]:
    state = {k: v.detach().to(torch.float64).cpu().numpy() for k, v in model.state_dict().items()}

    def norm(prefix: str) -> list[tuple[str, np.ndarray]]:
        weight = state.get(prefix + ".weight", state.get(prefix + ".gamma"))
        bias = state.get(prefix + ".bias", state.get(prefix + ".beta"))
        return [(prefix + ".weight", weight[None, :]), (prefix + ".bias", bias[None, :])]

    out = [
        ("embeddings.word_embeddings.weight", state["embeddings.word_embeddings.weight"]),
        ("embeddings.position_embeddings.weight", state["embeddings.position_embeddings.weight"]),
        ("embeddings.token_type_embeddings.weight",
         state["embeddings.token_type_embeddings.weight"]),
    ]
    out += norm("embeddings.LayerNorm")
    for i in range(model.config.num_hidden_layers):
        lp = f"encoder.layer.{i}."
        for suffix in LINEAR_SUFFIXES:
            # nn.Linear stores out x in; pcred stores in x out.
            out.append((f"layer.{i}.{suffix}.weight", state[lp + suffix + ".weight"].T))
            out.append((f"layer.{i}.{suffix}.bias", state[lp + suffix + ".bias"][None, :]))
        for suffix in NORM_SUFFIXES:
            out += [(name.replace("encoder.", "", 1), t) for name, t in norm(lp + suffix)]
    return [("encoder." + name, np.ascontiguousarray(t, dtype="<f8")) for name, t in out]


def write_weights(path: Path, tensors: list[tuple[str, np.ndarray]]) -> None:
    with path.open("wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<IQ", VERSION, len(tensors)))
        for name, t in tensors:
            encoded = name.encode()
            f.write(struct.pack("<I", len(encoded)))
            f.write(encoded)
            f.write(struct.pack("<QQ", t.shape[0], t.shape[1]))
            f.write(t.tobytes(order="C"))


def model_json(model: BertModel) -> dict:
    c = model.config
    if c.hidden_act != "gelu":
        raise SystemExit(f"unsupported activation {c.hidden_act!r}; pcred uses erf GELU")
    return {
        "encoder": {
            "vocab_size": c.vocab_size,
            "hidden_size": c.hidden_size,
            "layers": c.num_hidden_layers,
            "heads": c.num_attention_heads,
            "intermediate_size": c.intermediate_size,
            "max_positions": c.max_position_embeddings,
            "type_vocab_size": c.type_vocab_size,
            "layer_norm_eps": c.layer_norm_eps,
            "freeze_word_embeddings": True,
        }
    }


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("source", help="model name or local Hugging Face directory")
    parser.add_argument("out", type=Path, help="output directory")
    args = parser.parse_args()

    model = BertModel.from_pretrained(args.source, add_pooling_layer=False)
    args.out.mkdir(parents=True, exist_ok=True)
    write_weights(args.out / "weights.bin", collect_tensors(model))
    (args.out / "model.json").write_text(json.dumps(model_json(model), indent=2) + "\n")

    vocab = Path(args.source) / "vocab.txt"
    if vocab.is_file():
        shutil.copyfile(vocab, args.out / "vocab.txt")
    else:
        BertTokenizer.from_pretrained(args.source).save_vocabulary(str(args.out))
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
