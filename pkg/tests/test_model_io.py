import numpy as np
import pytest

from toy import toy_corpus
from raretag import crf, neural
from raretag.crf import TrainConfig
from raretag.embeddings import random_table
from raretag.model_io import (
    MAGIC,
    ModelFormatError,
    dump_text,
    load_model,
    model_kind,
    save_model,
)
from raretag.tokenizer import Sentence


def trained_crf():
    corpus = toy_corpus(seed=1, size=10)
    model, _ = crf.train(corpus, TrainConfig(max_iterations=15))
    return model, corpus


def built_tagger(head_kind):
    corpus = toy_corpus(seed=2, size=8)
    vocab = sorted({t.surface for ts in corpus for t in ts.tokens})
    table = random_table(vocab, 6, seed=3)
    tagger = neural.build_tagger(corpus, table, head_kind=head_kind,
                                 hidden_dim=4, seed=3)
    return tagger, corpus


class TestCrfContainer:
    def test_round_trip_is_exact(self, tmp_path):
        model, corpus = trained_crf()
        path = tmp_path / "model.bin"
        save_model(model, path)
        loaded = load_model(path)
        assert loaded.label_set == model.label_set
        assert loaded.feature_index == model.feature_index
        assert np.array_equal(loaded.state_weights, model.state_weights)
        assert np.array_equal(loaded.transition_weights, model.transition_weights)
        assert loaded.window == model.window

    def test_predictions_identical_after_reload(self, tmp_path):
        model, corpus = trained_crf()
        path = tmp_path / "model.bin"
        save_model(model, path)
        loaded = load_model(path)
        for ts in corpus:
            sent = Sentence(ts.tokens)
            assert crf.predict_tags(model, sent) == crf.predict_tags(loaded, sent)

    def test_kind_probe(self, tmp_path):
        model, _ = trained_crf()
        path = tmp_path / "model.bin"
        save_model(model, path)
        assert model_kind(path) == "crf"


class TestTaggerContainer:
    @pytest.mark.parametrize("head_kind,expect_kind", [
        (neural.HEAD_SOFTMAX, "bilstm"),
        (neural.HEAD_CRF, "bilstm-crf"),
    ])
    def test_round_trip(self, tmp_path, head_kind, expect_kind):
        tagger, corpus = built_tagger(head_kind)
        path = tmp_path / "tagger.bin"
        save_model(tagger, path)
        assert model_kind(path) == expect_kind
        loaded = load_model(path)
        assert loaded.label_set == tagger.label_set
        assert loaded.head_kind == tagger.head_kind
        assert np.array_equal(loaded.embedding.matrix, tagger.embedding.matrix)
        assert loaded.embedding.vocab == tagger.embedding.vocab
        for key, value in tagger.parameters().items():
            assert np.array_equal(loaded.parameters()[key], value), key
        for ts in corpus:
            assert neural.predict(loaded, ts.tokens) == \
                neural.predict(tagger, ts.tokens)

    def test_oov_vectors_survive_reload(self, tmp_path):
        tagger, _ = built_tagger(neural.HEAD_CRF)
        path = tmp_path / "tagger.bin"
        save_model(tagger, path)
        loaded = load_model(path)
        fresh = tagger.embedding._oov_vector("neverseen")
        assert np.array_equal(loaded.embedding._oov_vector("neverseen"), fresh)


class TestFormat:
    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "bogus.bin"
        path.write_bytes(b"NOTAMODEL" + b"\0" * 32)
        with pytest.raises(ModelFormatError, match="magic"):
            load_model(path)

    def test_bad_version_rejected(self, tmp_path):
        model, _ = trained_crf()
        path = tmp_path / "model.bin"
        save_model(model, path)
        data = bytearray(path.read_bytes())
        data[len(MAGIC)] = 99
        path.write_bytes(bytes(data))
        with pytest.raises(ModelFormatError, match="version"):
            load_model(path)

    def test_truncated_payload_rejected(self, tmp_path):
        model, _ = trained_crf()
        path = tmp_path / "model.bin"
        save_model(model, path)
        data = path.read_bytes()
        path.write_bytes(data + b"extra")
        with pytest.raises(ModelFormatError):
            load_model(path)

    def test_no_temp_file_left_behind(self, tmp_path):
        model, _ = trained_crf()
        path = tmp_path / "model.bin"
        save_model(model, path)
        assert not list(tmp_path.glob("*.tmp"))

    def test_dump_text_is_lossless(self, tmp_path):
        model, _ = trained_crf()
        path = tmp_path / "model.bin"
        save_model(model, path)
        text = dump_text(path)
        assert text.startswith("kind: crf")
        sample = float(model.state_weights.ravel()[0])
        assert sample.hex() in text
        # identical models dump to identical text
        path2 = tmp_path / "model2.bin"
        save_model(model, path2)
        assert dump_text(path2) == text
