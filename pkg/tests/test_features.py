import logging

import numpy as np
import pytest

from mtaffect.features import (
    ExternalFeatureSet,
    FeatureConfig,
    FeatureError,
    FeatureSource,
    HandcraftedVector,
    ScoredLexicon,
    assemble_features,
    lexicon_features,
    lexicon_width,
    load_external_features,
)


@pytest.fixture
def afinn():
    return ScoredLexicon(
        name="afinn",
        arity=1,
        entries={"good": np.array([3.0]), "bad": np.array([-3.0])},
    )


@pytest.fixture
def emo2():
    return ScoredLexicon(
        name="emo",
        arity=2,
        entries={"good": np.array([0.9, 0.0]), "angry": np.array([0.0, 0.8])},
    )


class TestLexiconFeatures:
    def test_single_match(self, afinn):
        np.testing.assert_array_equal(lexicon_features(["good"], [afinn]), [3.0, 1.0])

    def test_empty_tokens_zero_vector(self, afinn, emo2):
        vec = lexicon_features([], [afinn, emo2])
        assert vec.shape == (lexicon_width([afinn, emo2]),)
        np.testing.assert_array_equal(vec, np.zeros(5))

    def test_repeated_token_sums(self, afinn):
        np.testing.assert_array_equal(
            lexicon_features(["good", "good"], [afinn]), [6.0, 2.0]
        )

    def test_additive_over_token_multisets(self, afinn, emo2, rng):
        vocab = ["good", "bad", "angry", "meh", "other"]
        for _ in range(25):
            a = list(rng.choice(vocab, size=rng.integers(0, 6)))
            b = list(rng.choice(vocab, size=rng.integers(0, 6)))
            lhs = lexicon_features(a + b, [afinn, emo2])
            rhs = lexicon_features(a, [afinn, emo2]) + lexicon_features(b, [afinn, emo2])
            np.testing.assert_allclose(lhs, rhs, rtol=1e-15)

    def test_requires_some_lexicon(self):
        with pytest.raises(FeatureError):
            lexicon_features(["good"], [])

    def test_arity_enforced(self):
        with pytest.raises(FeatureError):
            ScoredLexicon(name="bad", arity=2, entries={"w": np.array([1.0])})

    def test_load_from_tsv(self, tmp_path):
        path = tmp_path / "lex.tsv"
        path.write_text("mylex\tjoy\tanger\nhappy\t0.9\t0.0\n", encoding="utf-8")
        lex = ScoredLexicon.load(path)
        assert lex.name == "mylex" and lex.arity == 2
        np.testing.assert_array_equal(lex.entries["happy"], [0.9, 0.0])

    def test_load_rejects_bad_row(self, tmp_path):
        path = tmp_path / "lex.tsv"
        path.write_text("mylex\tjoy\nhappy\t0.9\t0.5\n", encoding="utf-8")
        with pytest.raises(FeatureError, match="line 2"):
            ScoredLexicon.load(path)


class TestExternalFeatures:
    def write(self, path, name, dim, rows):
        with open(path, "w", encoding="utf-8") as f:
            f.write(f"{name}\t{dim}\n")
            for tweet_id, vec in rows:
                f.write(tweet_id + "\t" + " ".join(str(v) for v in vec) + "\n")

    def test_loads_two_rows(self, tmp_path, rng):
        path = tmp_path / "dm.tsv"
        rows = [("a", rng.uniform(-1, 1, 64)), ("b", rng.uniform(-1, 1, 64))]
        self.write(path, "deepmoji_softmax", 64, rows)
        fs = load_external_features(path, 64)
        assert fs.dim == 64 and len(fs.vectors) == 2

    def test_dimension_mismatch(self, tmp_path, rng):
        path = tmp_path / "dm.tsv"
        self.write(path, "deepmoji_softmax", 64, [("a", rng.uniform(-1, 1, 63))])
        with pytest.raises(FeatureError, match="line 2"):
            load_external_features(path, 64)

    def test_declared_vs_expected_dim(self, tmp_path, rng):
        path = tmp_path / "dm.tsv"
        self.write(path, "deepmoji_softmax", 32, [("a", rng.uniform(-1, 1, 32))])
        with pytest.raises(FeatureError, match="expected dim"):
            load_external_features(path, 64)

    def test_duplicate_id_rejected(self, tmp_path):
        path = tmp_path / "dm.tsv"
        self.write(path, "x", 2, [("a", [1, 2]), ("a", [3, 4])])
        with pytest.raises(FeatureError, match="duplicate"):
            load_external_features(path, 2)

    def test_known_source_names_pin_their_dims(self, tmp_path, rng):
        path = tmp_path / "dm.tsv"
        self.write(path, "deepmoji_softmax", 32, [("a", rng.uniform(-1, 1, 32))])
        with pytest.raises(FeatureError, match="must have dim 64"):
            load_external_features(path)

    def test_missing_id_is_none(self, tmp_path):
        path = tmp_path / "dm.tsv"
        self.write(path, "x", 2, [("a", [1, 2])])
        fs = load_external_features(path, 2)
        assert fs.get("absent") is None
        assert fs.get("a") is not None


def external(name, dim, ids, seed=0):
    rng = np.random.default_rng(seed)
    return ExternalFeatureSet(
        name=name, dim=dim, vectors={i: rng.uniform(-1, 1, dim) for i in ids}
    )


class TestAssembleFeatures:
    def test_single_lexicon_source(self, afinn):
        config = FeatureConfig([FeatureSource(name="lexicons", lexicons=[afinn])])
        hv = assemble_features("t1", ["good"], config)
        assert hv.values.shape == (2,)
        assert hv.layout == [("lexicons", 0, 2)]

    def test_layout_offsets(self, afinn):
        dm = external("deepmoji64", 64, ["t1"])
        config = FeatureConfig(
            [
                FeatureSource(name="deepmoji64", external=dm),
                FeatureSource(name="lexicons", lexicons=[afinn]),
            ]
        )
        hv = assemble_features("t1", ["good"], config)
        assert hv.layout == [("deepmoji64", 0, 64), ("lexicons", 64, 2)]
        np.testing.assert_array_equal(hv.values[:64], dm.get("t1"))
        np.testing.assert_array_equal(hv.values[64:], [3.0, 1.0])

    def test_full_transfer_stack_width(self, afinn, emo2):
        sources = [
            FeatureSource(name="deepmoji_softmax", external=external("a", 64, ["t"])),
            FeatureSource(name="deepmoji_attention", external=external("b", 2304, ["t"])),
            FeatureSource(name="skip_thought", external=external("c", 4800, ["t"])),
            FeatureSource(name="sentiment_neuron", external=external("d", 4096, ["t"])),
            FeatureSource(name="lexicons", lexicons=[afinn, emo2]),
        ]
        config = FeatureConfig(sources)
        hv = assemble_features("t", [], config)
        w = lexicon_width([afinn, emo2])
        assert hv.values.shape == (64 + 2304 + 4800 + 4096 + w,)

    def test_width_constant_across_tweets(self, afinn):
        dm = external("dm", 8, ["a", "b"])
        config = FeatureConfig(
            [
                FeatureSource(name="dm", external=dm),
                FeatureSource(name="lexicons", lexicons=[afinn]),
            ]
        )
        widths = {
            assemble_features(i, toks, config).values.shape[0]
            for i, toks in [("a", ["good"]), ("b", [])]
        }
        assert widths == {10}

    def test_missing_errors_by_default(self, afinn):
        dm = external("dm", 4, ["known"])
        config = FeatureConfig([FeatureSource(name="dm", external=dm)])
        with pytest.raises(FeatureError, match="unknown_id"):
            assemble_features("unknown_id", [], config)

    def test_missing_zero_fills_when_allowed(self, afinn, caplog):
        dm = external("dm", 4, ["known"])
        config = FeatureConfig(
            [FeatureSource(name="dm", external=dm)], allow_missing=True
        )
        with caplog.at_level(logging.WARNING):
            hv = assemble_features("unknown_id", [], config)
        np.testing.assert_array_equal(hv.values, np.zeros(4))
        assert any("zero-filling" in r.message for r in caplog.records)

    def test_layout_json_round_trip(self, afinn):
        config = FeatureConfig([FeatureSource(name="lexicons", lexicons=[afinn])])
        hv = assemble_features("t", ["bad"], config)
        back = HandcraftedVector.layout_from_json(hv.layout_json())
        assert back == hv.layout

    def test_source_must_be_single_kind(self, afinn):
        with pytest.raises(FeatureError):
            FeatureSource(name="both", lexicons=[afinn], external=external("x", 2, []))
        with pytest.raises(FeatureError):
            FeatureSource(name="neither")
