"""Hashing-trick featurizer: frozen hash oracles, tokenize rules, context
construction."""

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from agentbuddy.core import Query, Session, ValidationError
from agentbuddy.featurizer import (
    FeaturizerConfig,
    build_context,
    char_ngrams,
    fnv1a64,
    hash_features,
    tokenize,
)

# Reference FNV-1a 64-bit values, frozen before the implementation existed.
FNV_ORACLE = {
    "payment": 13976534181414136113,
    "how": 3701720407854142957,
    "receive": 17932960027327562562,
    "a": 12638187200555641996,
    "supplier": 6612602141284468265,
}


class TestFnv1a64:
    def test_frozen_oracle_values(self):
        for text, expected in FNV_ORACLE.items():
            assert fnv1a64(text) == expected

    def test_bytes_and_str_agree(self):
        assert fnv1a64("payment") == fnv1a64(b"payment")

    def test_64_bit_range(self):
        for text in FNV_ORACLE:
            assert 0 <= fnv1a64(text) < 2**64


class TestTokenize:
    def test_customer_question(self):
        assert tokenize("How can I receive payment?") == [
            "how",
            "can",
            "i",
            "receive",
            "payment",
        ]

    def test_empty(self):
        assert tokenize("") == []

    def test_separator_collapse(self):
        assert tokenize("a-b  c") == ["a", "b", "c"]

    def test_underscore_splits(self):
        assert tokenize("wire_transfer") == ["wire", "transfer"]

    def test_case_preserved_when_disabled(self):
        assert tokenize("Wire ACH", lowercase=False) == ["Wire", "ACH"]


class TestCharNgrams:
    def test_suplier(self):
        assert char_ngrams("suplier") == {"sup", "upl", "pli", "lie", "ier"}

    def test_supplier(self):
        assert char_ngrams("supplier") == {"sup", "upp", "ppl", "pli", "lie", "ier"}

    def test_short_token_singleton(self):
        assert char_ngrams("ab") == {"ab"}

    def test_dedup(self):
        assert char_ngrams("aaaa") == {"aaa"}


class TestHashFeatures:
    def test_empty_tokens_zero_vector(self):
        config = FeaturizerConfig(dimension=16, ngram_max=1)
        vec = hash_features([], config)
        assert vec.entries == {}
        assert vec.norm() == 0.0

    def test_payment_single_entry_dimension_16(self):
        # fnv1a64("payment") = 13976534181414136113: index = hash mod 16 = 1,
        # bit 63 set so the sign is negative; magnitude 1 after L2.
        config = FeaturizerConfig(dimension=16, ngram_max=1)
        vec = hash_features(["payment"], config)
        assert set(vec.entries) == {FNV_ORACLE["payment"] % 16} == {1}
        assert vec.entries[1] == -1.0

    def test_bigrams_included(self):
        config1 = FeaturizerConfig(dimension=2**10, ngram_max=1)
        config2 = FeaturizerConfig(dimension=2**10, ngram_max=2)
        uni = hash_features(["receive", "payment"], config1)
        bi = hash_features(["receive", "payment"], config2)
        assert uni != bi
        bigram_hash = fnv1a64("receive payment")
        index = bigram_hash % (2**10)
        assert index in bi.entries

    def test_determinism(self):
        config = FeaturizerConfig(dimension=2**12)
        a = hash_features(["wire", "transfer", "fee"], config)
        b = hash_features(["wire", "transfer", "fee"], config)
        assert a == b

    def test_collisions_sum_and_may_cancel(self):
        # dimension 1 forces every feature into index 0 with signed weights
        config = FeaturizerConfig(dimension=1, ngram_max=1)
        vec = hash_features(["payment", "payment"], config)
        assert set(vec.entries) <= {0}

    def test_dimension_must_be_power_of_two(self):
        with pytest.raises(ValidationError):
            FeaturizerConfig(dimension=12)

    def test_decay_bounds(self):
        with pytest.raises(ValidationError):
            FeaturizerConfig(history_decay=1.0)
        FeaturizerConfig(history_decay=0.0)

    @given(st.lists(st.text(min_size=1, max_size=12), max_size=8))
    def test_indices_in_bounds_and_unit_norm(self, texts):
        config = FeaturizerConfig(dimension=2**8)
        tokens = [t for text in texts for t in tokenize(text)]
        vec = hash_features(tokens, config)
        assert all(0 <= i < 2**8 for i in vec.entries)
        if vec.entries:
            assert math.isclose(vec.norm(), 1.0, abs_tol=1e-9)


class TestBuildContext:
    config = FeaturizerConfig(dimension=2**10)

    def test_empty_history_equals_query_vector(self):
        query = Query("s", "receive payment")
        session = Session("s")
        ctx = build_context(query, session, self.config)
        assert ctx == hash_features(tokenize("receive payment"), self.config)

    def test_zero_decay_ignores_history(self):
        config = FeaturizerConfig(dimension=2**10, history_decay=0.0)
        query = Query("s", "receive payment")
        session = Session("s", history=("unrelated words here",))
        ctx = build_context(query, session, config)
        assert ctx == hash_features(tokenize("receive payment"), config)

    def test_single_history_halved(self):
        query = Query("s", "receive payment")
        session = Session("s", history=("wire transfer",))
        ctx = build_context(query, session, self.config)
        vq = hash_features(tokenize("receive payment"), self.config).to_dense()
        vh = hash_features(tokenize("wire transfer"), self.config).to_dense()
        expected = vq + 0.5 * vh
        expected = expected / np.linalg.norm(expected)
        np.testing.assert_allclose(ctx.to_dense(), expected, atol=1e-12)

    def test_decay_weights_most_recent_highest(self):
        query = Query("s", "question")
        session = Session("s", history=("oldest utterance", "newest utterance"))
        ctx = build_context(query, session, self.config)
        vq = hash_features(tokenize("question"), self.config).to_dense()
        v_new = hash_features(tokenize("newest utterance"), self.config).to_dense()
        v_old = hash_features(tokenize("oldest utterance"), self.config).to_dense()
        expected = vq + 0.5 * v_new + 0.25 * v_old
        expected = expected / np.linalg.norm(expected)
        np.testing.assert_allclose(ctx.to_dense(), expected, atol=1e-12)

    def test_output_unit_norm(self):
        query = Query("s", "anything at all")
        session = Session("s", history=("one", "two", "three"))
        ctx = build_context(query, session, self.config)
        assert math.isclose(ctx.norm(), 1.0, abs_tol=1e-9)
