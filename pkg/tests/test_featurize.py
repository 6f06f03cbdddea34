import numpy as np
import pytest
from hypothesis import given, strategies as st

from notepool.categories import CANONICAL_CATEGORIES, N_CATEGORIES
from notepool.errors import FeaturizeError
from notepool.featurize import (
    BasicFeaturesEncoder,
    Vocabulary,
    build_vocabulary,
    build_vocabulary_from_streams,
    featurize_admission,
    note_corpus_stats,
    tokenize,
    vectorize,
)
from conftest import make_instance


class TestTokenize:
    def test_lowercases_and_splits_on_non_alphanumerics(self):
        assert tokenize("Chest X-Ray: CLEAR.") == ["chest", "x", "ray", "clear"]

    def test_keeps_digits(self):
        assert tokenize("BP 120/80, HR 72") == ["bp", "120", "80", "hr", "72"]

    def test_strips_deid_placeholders_entirely(self):
        text = "Seen by [**First Name8 (NamePattern2) 1764**] at [**2101-4-2**] today"
        assert tokenize(text) == ["seen", "by", "at", "today"]

    def test_placeholder_spanning_lines(self):
        assert tokenize("a [**x\ny**] b") == ["a", "b"]

    def test_empty_and_punctuation_only(self):
        assert tokenize("") == []
        assert tokenize("--- ***") == []

    @given(st.text(max_size=200))
    def test_tokens_always_lowercase_alphanumeric(self, text):
        for tok in tokenize(text):
            assert tok
            assert all(c.islower() or c.isdigit() for c in tok)


class TestVocabulary:
    def test_orders_by_frequency_then_token(self):
        vocab = build_vocabulary(["b b b a a c", "a c"], 3)
        assert vocab.tokens == ["a", "b", "c"]
        assert vocab.frequencies == [3, 3, 2]

    def test_truncates_to_k(self):
        vocab = build_vocabulary(["a a a b b c"], 2)
        assert vocab.tokens == ["a", "b"]

    def test_too_few_distinct_tokens(self):
        with pytest.raises(FeaturizeError, match="distinct"):
            build_vocabulary(["a b a b"], 3)

    def test_k_must_be_positive(self):
        with pytest.raises(FeaturizeError):
            build_vocabulary(["a b"], 0)

    def test_duplicate_tokens_rejected(self):
        with pytest.raises(FeaturizeError, match="duplicate"):
            Vocabulary(["a", "a"], [2, 1])

    def test_csv_round_trip(self, tmp_path):
        vocab = build_vocabulary(["alpha beta beta gamma"], 3)
        path = tmp_path / "vocab.csv"
        vocab.save_csv(path)
        loaded = Vocabulary.load_csv(path)
        assert loaded.tokens == vocab.tokens
        assert loaded.frequencies == vocab.frequencies
        assert loaded.fingerprint() == vocab.fingerprint()

    @given(st.lists(st.text(alphabet="abcde", min_size=1, max_size=3),
                    min_size=1, max_size=50))
    def test_frequencies_non_increasing(self, tokens):
        distinct = len(set(tokens))
        vocab = build_vocabulary_from_streams([tokens], distinct)
        freqs = vocab.frequencies
        assert all(a >= b for a, b in zip(freqs, freqs[1:]))
        assert sum(freqs) == len(tokens)


class TestVectorize:
    def test_counts_and_length(self):
        vocab = build_vocabulary(["a b c"], 3)
        vec, length = vectorize("c x a c".split(), vocab)
        assert vec.tolist() == [1, 0, 2]
        assert length == 4  # out-of-vocabulary token still counts

    def test_empty_tokens(self):
        vocab = build_vocabulary(["a b"], 2)
        vec, length = vectorize([], vocab)
        assert vec.tolist() == [0, 0]
        assert length == 0

    @given(st.lists(st.sampled_from(["a", "b", "c", "zz"]), max_size=60))
    def test_in_vocab_count_bounded_by_length(self, tokens):
        vocab = build_vocabulary_from_streams([["a", "b", "c"]], 3)
        vec, length = vectorize(tokens, vocab)
        assert vec.sum() <= length
        assert vec.sum() == sum(1 for t in tokens if t != "zz")


class TestFeaturizeAdmission:
    def test_rows_follow_canonical_order(self):
        vocab = build_vocabulary(["pain stable pain"], 2)
        matrix = featurize_admission(
            {"Nursing": ["pain", "stable"], "ECG": ["pain"]}, vocab)
        assert matrix.rows.shape == (N_CATEGORIES, 2)
        nursing = CANONICAL_CATEGORIES.index("Nursing")
        ecg = CANONICAL_CATEGORIES.index("ECG")
        assert matrix.rows[nursing].tolist() == [1, 1]
        assert matrix.rows[ecg].tolist() == [1, 0]
        assert matrix.token_lengths[nursing] == 2
        assert matrix.token_lengths[ecg] == 1

    def test_missing_categories_are_zero(self):
        vocab = build_vocabulary(["a b"], 2)
        matrix = featurize_admission({}, vocab)
        assert not matrix.rows.any()
        assert not matrix.token_lengths.any()

    def test_all_notes_is_column_sum(self):
        vocab = build_vocabulary(["a b c"], 3)
        matrix = featurize_admission(
            {"Nursing": ["a", "b"], "Radiology": ["a", "c", "c"]}, vocab)
        assert matrix.all_notes().tolist() == matrix.rows.sum(axis=0).tolist()
        assert matrix.all_notes().tolist() == [2, 1, 2]

    def test_unknown_category_rejected(self):
        vocab = build_vocabulary(["a"], 1)
        with pytest.raises(FeaturizeError, match="unknown note category"):
            featurize_admission({"nursing": ["a"]}, vocab)


class TestBasicFeaturesEncoder:
    def test_one_hot_blocks_sum_to_one(self):
        insts = [make_instance(1, 1), make_instance(2, 2, basic={"INSURANCE": "Private"})]
        enc = BasicFeaturesEncoder.fit(insts)
        vec = enc.transform(insts[0])
        # 7 categorical blocks plus the age slot
        assert vec.shape == (enc.dim,)
        offset = 0
        for fld, levels in enc.levels.items():
            block = vec[offset:offset + len(levels)]
            assert block.sum() == 1.0
            offset += len(levels)
        assert vec[-1] == insts[0].admit_age

    def test_unknown_always_present_and_catches_unseen(self):
        insts = [make_instance(1, 1)]
        enc = BasicFeaturesEncoder.fit(insts)
        assert all("UNKNOWN" in lv for lv in enc.levels.values())
        novel = make_instance(2, 2, basic={"RELIGION": "NEVER SEEN"})
        vec = enc.transform(novel)
        names = enc.feature_names
        assert vec[names.index("RELIGION=UNKNOWN")] == 1.0
        assert "RELIGION=NEVER SEEN" not in names

    def test_empty_value_maps_to_unknown(self):
        inst = make_instance(1, 1, basic={"LANGUAGE": ""})
        enc = BasicFeaturesEncoder.fit([inst])
        vec = enc.transform(inst)
        assert vec[enc.feature_names.index("LANGUAGE=UNKNOWN")] == 1.0

    def test_levels_sorted_deterministically(self):
        insts = [make_instance(1, 1, basic={"INSURANCE": "Private"}),
                 make_instance(2, 2, basic={"INSURANCE": "Medicaid"})]
        enc = BasicFeaturesEncoder.fit(insts)
        assert enc.levels["INSURANCE"] == sorted(enc.levels["INSURANCE"])

    def test_round_trip(self):
        enc = BasicFeaturesEncoder.fit([make_instance(1, 1)])
        again = BasicFeaturesEncoder.from_dict(enc.to_dict())
        assert again.levels == enc.levels
        assert again.feature_names == enc.feature_names


class _Note:
    def __init__(self, category, text):
        self.category = category
        self.text = text


class TestNoteCorpusStats:
    def test_counts_fractions_lengths(self):
        notes = [_Note("Nursing", "a b c"), _Note("Nursing", "d e"),
                 _Note("ECG", "sinus rhythm rate 70"), _Note("Mystery", "zzz")]
        stats = note_corpus_stats(notes)
        assert stats.total_notes == 3
        assert stats.unmatched_notes == 1
        nursing = stats.per_category["Nursing"]
        assert nursing.note_count == 2
        assert nursing.fraction == 2 / 3
        assert nursing.mean_token_length == 2.5
        assert stats.per_category["ECG"].mean_token_length == 4.0

    def test_empty_category_has_none_mean(self):
        stats = note_corpus_stats([_Note("Nursing", "hello")])
        assert stats.per_category["Echo"].note_count == 0
        assert stats.per_category["Echo"].mean_token_length is None
        assert stats.per_category["Echo"].fraction == 0.0

    def test_case_insensitive_category_match(self):
        stats = note_corpus_stats([_Note(" nursing/OTHER ", "word")])
        assert stats.per_category["Nursing/other"].note_count == 1

    def test_round_trip(self):
        from notepool.featurize import NoteCorpusStats

        stats = note_corpus_stats([_Note("Nursing", "a b")])
        again = NoteCorpusStats.from_dict(stats.to_dict())
        assert again.to_dict() == stats.to_dict()
