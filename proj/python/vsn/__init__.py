"""Bindings for the vsn speech-and-picture-description toolkit."""

from ._vsn import (
    EMBEDDING_VERSION,
    VsnError,
    acoustic_features,
    bleu,
    decode_embeddings,
    encode_embeddings,
    meteor,
    read_embeddings,
    rouge_l,
    write_embeddings,
)

__all__ = [
    "EMBEDDING_VERSION",
    "VsnError",
    "acoustic_features",
    "bleu",
    "decode_embeddings",
    "encode_embeddings",
    "meteor",
    "read_embeddings",
    "rouge_l",
    "write_embeddings",
]
