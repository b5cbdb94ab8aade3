"""Frozen-encoder extraction: TSV records to an embedded-dataset directory."""

from pathlib import Path

import numpy as np
import torch

from .records import ExtractError, read_tsv
from .writer import write_dataset_dir

DEFAULT_ENCODER = "roberta-base"


def _load_encoder(encoder_name):
    from transformers import AutoModel, AutoTokenizer

    try:
        tokenizer = AutoTokenizer.from_pretrained(encoder_name)
        model = AutoModel.from_pretrained(encoder_name)
    except Exception as exc:
        raise ExtractError(f"cannot load encoder {encoder_name!r}: {exc}") from exc
    model.eval()
    return tokenizer, model


def _encode_batch(tokenizer, model, batch, max_len, pooled):
    texts = [r.text for r in batch]
    pairs = [r.text_pair for r in batch]
    if any(p is None for p in pairs):
        if any(p is not None for p in pairs):
            raise ExtractError("rows mix single-segment and paired-segment inputs")
        pairs = None
    enc = tokenizer(
        texts,
        pairs,
        padding="max_length",
        truncation=True,
        max_length=max_len,
        return_tensors="pt",
    )
    with torch.no_grad():
        hidden = model(**enc).last_hidden_state  # (B, S, D)
    mask = enc["attention_mask"].to(hidden.dtype)  # (B, S)
    lengths = enc["attention_mask"].sum(dim=1)
    if pooled:
        counts = lengths.to(hidden.dtype).clamp(min=1).unsqueeze(-1)
        mean = (hidden * mask.unsqueeze(-1)).sum(dim=1, keepdim=True) / counts.unsqueeze(-1)
        return mean.numpy().astype(np.float32), np.ones(len(batch), dtype=np.int64)
    # Zero out positions past each length so padding carries no encoder noise.
    hidden = hidden * mask.unsqueeze(-1)
    return hidden.numpy().astype(np.float32), lengths.numpy().astype(np.int64)


def extract(
    input_tsv,
    encoder_name,
    max_len,
    out_dir,
    *,
    pooled=False,
    classes=None,
    name=None,
    dialect="unspecified",
    task="unspecified",
    metric="accuracy",
    batch_size=16,
):
    """Embed every TSV row with a frozen encoder and write a dataset directory.

    Deterministic: the encoder runs in evaluation mode and padded positions
    are zeroed, so batch size never changes the output bytes.  Lengths record
    the tokenizer's truncated token count, min(token count, max_len).
    """
    if max_len < 1:
        raise ExtractError("max_len must be >= 1")
    records = read_tsv(input_tsv)
    k = classes if classes is not None else max(r.label for r in records) + 1
    if k < 2:
        raise ExtractError(f"class count {k} must be >= 2")
    for row_no, rec in enumerate(records, start=1):
        if rec.label >= k:
            raise ExtractError(f"row {row_no}: label {rec.label} outside [0, {k})")

    tokenizer, model = _load_encoder(encoder_name)
    chunks, length_chunks = [], []
    for start in range(0, len(records), batch_size):
        emb, lens = _encode_batch(
            tokenizer, model, records[start : start + batch_size], max_len, pooled
        )
        chunks.append(emb)
        length_chunks.append(lens)
    embeddings = np.concatenate(chunks)
    lengths = np.concatenate(length_chunks)
    labels = np.array([r.label for r in records], dtype=np.int64)

    return write_dataset_dir(
        out_dir,
        embeddings,
        lengths,
        labels,
        name=name or Path(input_tsv).stem,
        dialect=dialect,
        task=task,
        metric=metric,
        k=k,
    )
