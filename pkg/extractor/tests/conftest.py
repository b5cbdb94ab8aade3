import os

import pytest
import torch

os.environ.setdefault("HF_HUB_OFFLINE", "1")
os.environ.setdefault("TRANSFORMERS_OFFLINE", "1")

VOCAB = (
    ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"]
    + list("abcdefghijklmnopqrstuvwxyz")
    + ["the", "cat", "sat", "on", "mat", "dog", "good", "bad", "fine", "##s", "##ing"]
)


@pytest.fixture(scope="session")
def tiny_encoder_dir(tmp_path_factory):
    """A small randomly initialized encoder saved locally, loadable offline."""
    from transformers import BertConfig, BertModel, BertTokenizer

    d = tmp_path_factory.mktemp("tinyenc")
    (d / "vocab.txt").write_text("\n".join(VOCAB) + "\n")
    tokenizer = BertTokenizer(str(d / "vocab.txt"))
    config = BertConfig(
        vocab_size=len(VOCAB),
        hidden_size=32,
        num_hidden_layers=2,
        num_attention_heads=2,
        intermediate_size=64,
        max_position_embeddings=64,
    )
    torch.manual_seed(0)
    model = BertModel(config)
    model.save_pretrained(d)
    tokenizer.save_pretrained(d)
    return d


@pytest.fixture(scope="session")
def ten_row_tsv(tmp_path_factory):
    rows = [
        ("the cat sat on the mat", 0),
        ("good dog", 1),
        ("bad cat", 0),
        ("the dog sat", 1),
        ("fine mat", 0),
        ("the the the", 1),
        ("cat dog mat", 0),
        ("good good good dog", 1),
        ("sat on mat", 0),
        ("the bad dog sat on the good mat", 1),
    ]
    path = tmp_path_factory.mktemp("tsv") / "ten.tsv"
    path.write_text("\n".join(f"{text}\t{label}" for text, label in rows) + "\n")
    return path
