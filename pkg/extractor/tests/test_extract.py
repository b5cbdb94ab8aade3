import hashlib
import json

import numpy as np
import pytest

from embed_extractor import ExtractError, extract, read_tsv
from embed_extractor.cli import main as cli_main

# The dataset-directory format is the contract with the training side; its
# loader is the authoritative validator.
from dialectshot.data import load_dataset


def run_extract(tsv, encoder, out, max_len=16, **kwargs):
    return extract(tsv, str(encoder), max_len, out, **kwargs)


class TestContract:
    def test_output_passes_training_side_load_validation(
        self, ten_row_tsv, tiny_encoder_dir, tmp_path
    ):
        manifest = run_extract(ten_row_tsv, tiny_encoder_dir, tmp_path / "ds")
        ds = load_dataset(tmp_path / "ds")
        assert (ds.n, ds.s, ds.d) == (10, 16, 32)
        assert manifest["n"] == 10 and manifest["k"] == 2
        assert ds.labels is not None and set(ds.labels.tolist()) == {0, 1}

    def test_digests_round_trip(self, ten_row_tsv, tiny_encoder_dir, tmp_path):
        run_extract(ten_row_tsv, tiny_encoder_dir, tmp_path / "ds")
        manifest = json.loads((tmp_path / "ds" / "manifest.json").read_text())
        for fname, digest in manifest["digests"].items():
            data = (tmp_path / "ds" / fname).read_bytes()
            assert hashlib.sha256(data).hexdigest() == digest, fname

    def test_byte_identical_across_runs(self, ten_row_tsv, tiny_encoder_dir, tmp_path):
        run_extract(ten_row_tsv, tiny_encoder_dir, tmp_path / "a")
        run_extract(ten_row_tsv, tiny_encoder_dir, tmp_path / "b")
        for fname in ("embeddings.bin", "labels.bin", "lengths.bin", "manifest.json"):
            assert (tmp_path / "a" / fname).read_bytes() == (tmp_path / "b" / fname).read_bytes()

    def test_batch_size_does_not_change_bytes(self, ten_row_tsv, tiny_encoder_dir, tmp_path):
        run_extract(ten_row_tsv, tiny_encoder_dir, tmp_path / "a", batch_size=3)
        run_extract(ten_row_tsv, tiny_encoder_dir, tmp_path / "b", batch_size=10)
        assert (tmp_path / "a" / "embeddings.bin").read_bytes() == (
            tmp_path / "b" / "embeddings.bin"
        ).read_bytes()


class TestLengths:
    def test_lengths_are_truncated_token_counts(self, ten_row_tsv, tiny_encoder_dir, tmp_path):
        from transformers import AutoTokenizer

        max_len = 6
        run_extract(ten_row_tsv, tiny_encoder_dir, tmp_path / "ds", max_len=max_len)
        ds = load_dataset(tmp_path / "ds")
        tokenizer = AutoTokenizer.from_pretrained(str(tiny_encoder_dir))
        for i, rec in enumerate(read_tsv(ten_row_tsv)):
            full = len(tokenizer(rec.text)["input_ids"])
            assert ds.lengths[i] == min(full, max_len), i

    def test_padded_positions_are_zero(self, ten_row_tsv, tiny_encoder_dir, tmp_path):
        run_extract(ten_row_tsv, tiny_encoder_dir, tmp_path / "ds", max_len=16)
        ds = load_dataset(tmp_path / "ds")
        for i in range(ds.n):
            assert np.all(ds.embeddings[i, ds.lengths[i] :, :] == 0.0)

    def test_pooled_mode_single_position(self, ten_row_tsv, tiny_encoder_dir, tmp_path):
        run_extract(ten_row_tsv, tiny_encoder_dir, tmp_path / "ds", pooled=True)
        ds = load_dataset(tmp_path / "ds")
        assert ds.s == 1
        np.testing.assert_array_equal(ds.lengths, 1)


class TestPairs:
    def test_paired_segments(self, tiny_encoder_dir, tmp_path):
        tsv = tmp_path / "pairs.tsv"
        tsv.write_text("the cat\tsat on mat\t0\ngood dog\tbad cat\t1\n")
        run_extract(tsv, tiny_encoder_dir, tmp_path / "ds")
        ds = load_dataset(tmp_path / "ds")
        assert ds.n == 2
        # Both [SEP]-joined segments count toward the length.
        assert ds.lengths[0] > 4


class TestErrors:
    def test_empty_text_names_row(self, tiny_encoder_dir, tmp_path):
        tsv = tmp_path / "bad.tsv"
        tsv.write_text("good dog\t1\n\t0\n")
        with pytest.raises(ExtractError, match="row 2"):
            run_extract(tsv, tiny_encoder_dir, tmp_path / "ds")

    def test_label_parse_failure_names_row(self, tiny_encoder_dir, tmp_path):
        tsv = tmp_path / "bad.tsv"
        tsv.write_text("good dog\t1\nbad cat\tx\n")
        with pytest.raises(ExtractError, match="row 2"):
            run_extract(tsv, tiny_encoder_dir, tmp_path / "ds")

    def test_label_outside_declared_classes_names_row(self, tiny_encoder_dir, tmp_path):
        tsv = tmp_path / "bad.tsv"
        tsv.write_text("good dog\t1\nbad cat\t5\n")
        with pytest.raises(ExtractError, match="row 2"):
            run_extract(tsv, tiny_encoder_dir, tmp_path / "ds", classes=2)

    def test_encoder_load_failure(self, ten_row_tsv, tmp_path):
        with pytest.raises(ExtractError, match="encoder"):
            run_extract(ten_row_tsv, tmp_path / "no-such-encoder", tmp_path / "ds")


class TestCli:
    def test_happy_path(self, ten_row_tsv, tiny_encoder_dir, tmp_path, capsys):
        code = cli_main(
            [
                "--input",
                str(ten_row_tsv),
                "--encoder",
                str(tiny_encoder_dir),
                "--max-len",
                "12",
                "--out",
                str(tmp_path / "ds"),
                "--dialect",
                "base",
                "--task",
                "toy",
            ]
        )
        assert code == 0
        assert "n=10 s=12 d=32 k=2" in capsys.readouterr().out
        ds = load_dataset(tmp_path / "ds")
        assert ds.dialect == "base" and ds.task == "toy"

    def test_missing_input_is_user_error(self, tiny_encoder_dir, tmp_path, capsys):
        code = cli_main(
            [
                "--input",
                str(tmp_path / "nope.tsv"),
                "--encoder",
                str(tiny_encoder_dir),
                "--out",
                str(tmp_path / "ds"),
            ]
        )
        assert code == 1
        err = capsys.readouterr().err
        assert err.startswith("error:") and len(err.strip().splitlines()) == 1

    def test_unknown_flag_is_user_error(self, capsys):
        assert cli_main(["--bogus"]) == 1
        assert capsys.readouterr().err.startswith("error:")
