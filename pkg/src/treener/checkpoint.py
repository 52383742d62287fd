"""Checkpoints: a flat float64 binary plus a JSON manifest.

The manifest lists ``name``, ``shape`` and byte ``offset`` of every tensor,
the SHA-256 of the binary, the config and the vocabulary. Output is
byte-stable: no timestamps, sorted keys, little-endian floats.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .config import TrainConfig
from .corpus import EmbeddingProvider, Vocab
from .errors import CheckpointError, ConfigError
from .io_utils import atomic_write_bytes, atomic_write_text, sha256_bytes

FORMAT = "treener-checkpoint/1"


def _paths(path) -> tuple[Path, Path]:
    path = Path(path)
    if path.suffix in (".json", ".bin"):
        path = path.with_suffix("")
    return path.with_suffix(".json"), path.with_suffix(".bin")


def save_tensors(path, tensors, extra: dict | None = None) -> None:
    """Write named arrays to ``<path>.bin`` with manifest ``<path>.json``."""
    manifest_path, bin_path = _paths(path)
    entries, chunks, offset = [], [], 0
    for name, value in tensors:
        arr = np.ascontiguousarray(value, dtype="<f8")
        data = arr.tobytes()
        entries.append({"name": name, "shape": list(arr.shape), "offset": offset, "nbytes": len(data)})
        chunks.append(data)
        offset += len(data)
    blob = b"".join(chunks)
    manifest = {"format": FORMAT, "tensors": entries, "sha256": sha256_bytes(blob), "size": len(blob)}
    manifest.update(extra or {})
    atomic_write_bytes(bin_path, blob)
    atomic_write_text(manifest_path, json.dumps(manifest, indent=1, sort_keys=True) + "\n")


def load_tensors(path) -> tuple[dict[str, np.ndarray], dict]:
    manifest_path, bin_path = _paths(path)
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise CheckpointError(f"checkpoint manifest not found: {manifest_path}") from None
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"checkpoint manifest unreadable: {exc}") from None
    if manifest.get("format") != FORMAT:
        raise CheckpointError(f"manifest mismatch: unknown format {manifest.get('format')!r}")
    try:
        blob = bin_path.read_bytes()
    except FileNotFoundError:
        raise CheckpointError(f"checkpoint binary not found: {bin_path}") from None
    if len(blob) != manifest["size"] or sha256_bytes(blob) != manifest["sha256"]:
        raise CheckpointError("manifest mismatch: binary does not match recorded size/hash (corrupted checkpoint)")
    out = {}
    for e in manifest["tensors"]:
        raw = blob[e["offset"]: e["offset"] + e["nbytes"]]
        expected = 8 * int(np.prod(e["shape"], dtype=np.int64))
        if len(raw) != expected:
            raise CheckpointError(f"manifest mismatch: tensor {e['name']} has {len(raw)} bytes, expected {expected}")
        out[e["name"]] = np.frombuffer(raw, dtype="<f8").reshape(e["shape"]).astype(np.float64)
    return out, manifest


def save_model(path, model) -> None:
    extra = {"config": model.config.to_dict(), "vocab": model.vocab.to_dict(),
             "embedding-kind": model.provider.kind}
    save_tensors(path, ((n, t.value) for n, t in model.named_tensors()), extra)


def load_model(path):
    from .model import Model

    tensors, manifest = load_tensors(path)
    try:
        config = TrainConfig.from_dict(manifest["config"])
        vocab = Vocab.from_dict(manifest["vocab"])
    except (KeyError, ConfigError) as exc:
        raise CheckpointError(f"manifest mismatch: {exc}") from None
    kind = manifest.get("embedding-kind", "table")
    word = tensors.get("embed.word")
    if word is None:
        raise CheckpointError("manifest mismatch: missing tensor embed.word")
    provider = EmbeddingProvider(vocab, word.shape[1], kind=kind, word_vectors=word,
                                 freeze=config.freeze_embeddings, use_pos=config.use_pos,
                                 use_deprel=config.use_deprel)
    model = Model(config, vocab, provider, rng=np.random.default_rng(0))
    names = {n for n, _ in model.named_tensors()}
    if names != set(tensors):
        missing = sorted(names - set(tensors))
        extra = sorted(set(tensors) - names)
        raise CheckpointError(f"manifest mismatch: missing {missing}, unexpected {extra}")
    for n, t in model.named_tensors():
        if t.value.shape != tensors[n].shape:
            raise CheckpointError(f"manifest mismatch: {n} has shape {tensors[n].shape}, model expects {t.value.shape}")
    model.load_state(tensors)
    return model
