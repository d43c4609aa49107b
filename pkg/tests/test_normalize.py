import itertools
import math
import re
from functools import lru_cache

import pytest

from mtaffect.normalize import (
    EmojiLexicon,
    FrequencyLexicon,
    LexiconError,
    NormalizeOptions,
    correct_spelling,
    damerau_levenshtein,
    normalize,
    replace_entities,
    segment_hashtag,
)

# ---------------------------------------------------------------- oracles


def brute_force_segment(tag, freq):
    """Score every one of the 2^(n-1) segmentations and return the best
    log-probability; independent of the DP implementation."""
    n = len(tag)
    best_score = -math.inf
    best_words = None
    for cuts in itertools.product([0, 1], repeat=n - 1):
        words = []
        start = 0
        for i, cut in enumerate(cuts, start=1):
            if cut:
                words.append(tag[start:i])
                start = i
        words.append(tag[start:])
        score = sum(freq.log_prob(w) for w in words)
        if score > best_score:
            best_score = score
            best_words = words
    return best_words, best_score


def reference_osa(a, b):
    """Recursive optimal-string-alignment distance, written independently of
    the package's iterative DP."""

    @lru_cache(maxsize=None)
    def go(i, j):
        if i == 0:
            return j
        if j == 0:
            return i
        cost = 0 if a[i - 1] == b[j - 1] else 1
        best = min(go(i - 1, j) + 1, go(i, j - 1) + 1, go(i - 1, j - 1) + cost)
        if i > 1 and j > 1 and a[i - 1] == b[j - 2] and a[i - 2] == b[j - 1]:
            best = min(best, go(i - 2, j - 2) + 1)
        return best

    return go(len(a), len(b))


def oracle_correction(word, freq, max_edit):
    """Exhaustive scan of the lexicon by reference distance."""
    if word in freq:
        return word
    candidates = {
        w: reference_osa(word, w)
        for w in freq.counts
        if reference_osa(word, w) <= max_edit
    }
    if not candidates:
        return word
    return min(candidates, key=lambda w: (-freq.count(w), candidates[w], w))


# ---------------------------------------------------------------- lexicons


class TestLexicons:
    def test_frequency_total(self, tiny_freq):
        assert tiny_freq.total == sum(tiny_freq.counts.values())

    def test_frequency_rejects_zero_counts(self):
        with pytest.raises(LexiconError):
            FrequencyLexicon({"word": 0})

    def test_frequency_load(self, tmp_path):
        path = tmp_path / "freq.tsv"
        path.write_text("alpha\t10\nbeta\t3\n", encoding="utf-8")
        freq = FrequencyLexicon.load(path)
        assert freq.count("alpha") == 10 and freq.total == 13

    def test_unknown_smoothing(self, tiny_freq):
        expected = -math.log(tiny_freq.total) - 4 * math.log(10.0)
        assert tiny_freq.log_prob("zzzz") == pytest.approx(expected, rel=1e-12)

    def test_emoji_rejects_empty_replacement(self):
        with pytest.raises(LexiconError):
            EmojiLexicon({"\U0001F602": []})

    def test_emoji_rejects_uppercase(self):
        with pytest.raises(LexiconError):
            EmojiLexicon({"\U0001F602": ["Laughing"]})

    def test_emoji_load_and_replace(self, tmp_path):
        path = tmp_path / "emoji.tsv"
        path.write_text("\U0001F602\tlaughing out loud\n", encoding="utf-8")
        emo = EmojiLexicon.load(path)
        assert emo.replace("ha \U0001F602").split() == ["ha", "laughing", "out", "loud"]


# ---------------------------------------------------------------- entities


class TestReplaceEntities:
    def test_mention(self):
        assert replace_entities("@VescioDiana hi") == "username hi"

    def test_url(self):
        assert replace_entities("see https://a.b/c") == "see url"

    def test_identity_without_entities(self):
        assert replace_entities("email me") == "email me"

    def test_url_with_hashtag_not_segmented(self, tiny_freq, tiny_emoji):
        tokens = normalize("see https://a.b/#iamcool hi", tiny_freq, tiny_emoji).tokens
        assert tokens == ["see", "url", "hi"]
        assert "cool" not in tokens


# ---------------------------------------------------------------- hashtags


class TestSegmentHashtag:
    def test_multiword_tag_splits(self, tiny_freq):
        assert segment_hashtag("iamcool", tiny_freq) == ["i", "am", "cool"]

    def test_whole_word_outweighs_splits(self, tiny_freq):
        assert segment_hashtag("laughter", tiny_freq) == ["laughter"]

    def test_single_character(self, tiny_freq):
        assert segment_hashtag("x", tiny_freq) == ["x"]

    def test_rejects_empty_or_symbolic(self, tiny_freq):
        with pytest.raises(ValueError):
            segment_hashtag("", tiny_freq)
        with pytest.raises(ValueError):
            segment_hashtag("a-b", tiny_freq)

    @pytest.mark.parametrize(
        "tag",
        ["iamcool", "laughter", "checkme", "youandi", "goodday1", "hamisspam", "x"],
    )
    def test_matches_brute_force_argmax(self, tiny_freq, tag):
        got = segment_hashtag(tag, tiny_freq)
        _, best_score = brute_force_segment(tag, tiny_freq)
        got_score = sum(tiny_freq.log_prob(w) for w in got)
        assert got_score == pytest.approx(best_score, abs=1e-9)

    def test_random_tags_match_exhaustive_oracle(self, tiny_freq, rng):
        words = list(tiny_freq.counts)
        for _ in range(40):
            pieces = [words[rng.integers(len(words))] for _ in range(rng.integers(1, 4))]
            if rng.random() < 0.4:
                pieces.append("".join(rng.choice(list("abcxyz"), size=rng.integers(1, 4))))
            tag = "".join(pieces)[:12]
            if not tag:
                continue
            got = segment_hashtag(tag, tiny_freq)
            assert "".join(got) == tag
            _, best_score = brute_force_segment(tag, tiny_freq)
            got_score = sum(tiny_freq.log_prob(w) for w in got)
            assert got_score == pytest.approx(best_score, abs=1e-9), tag


# ---------------------------------------------------------------- spelling


class TestCorrectSpelling:
    def test_distance_two_correction(self, tiny_freq):
        assert damerau_levenshtein("facbok", "facebook") == 2
        assert correct_spelling("facbok", tiny_freq, 2) == "facebook"

    def test_identity_on_known_words(self, tiny_freq):
        assert correct_spelling("cool", tiny_freq, 2) == "cool"

    def test_no_candidate_within_two_edits(self, tiny_freq):
        # exhaustive check that nothing in the lexicon is reachable
        assert all(
            reference_osa("zzzzzz", w) > 2 for w in tiny_freq.counts
        )
        assert correct_spelling("zzzzzz", tiny_freq, 2) == "zzzzzz"

    def test_invalid_max_edit(self, tiny_freq):
        with pytest.raises(ValueError):
            correct_spelling("word", tiny_freq, 3)

    @pytest.mark.parametrize(
        "word", ["facbok", "coool", "lauhgter", "spamm", "hma", "dwn", "chekc", "qqq"]
    )
    def test_matches_exhaustive_oracle(self, tiny_freq, word):
        assert correct_spelling(word, tiny_freq, 2) == oracle_correction(
            word, tiny_freq, 2
        )

    def test_never_exceeds_max_edit(self, tiny_freq, rng):
        alphabet = "abcdefghijklmnopqrstuvwxyz"
        for _ in range(60):
            word = "".join(rng.choice(list(alphabet), size=rng.integers(2, 9)))
            for max_edit in (1, 2):
                got = correct_spelling(word, tiny_freq, max_edit)
                if got != word:
                    assert reference_osa(word, got) <= max_edit

    def test_long_garbage_token_returns_fast(self, tiny_freq):
        import time

        word = "q" * 40
        start = time.monotonic()
        assert correct_spelling(word, tiny_freq, 2) == word
        assert time.monotonic() - start < 0.05

    def test_distance_matches_reference(self, rng):
        alphabet = "abcde"
        for _ in range(200):
            a = "".join(rng.choice(list(alphabet), size=rng.integers(0, 7)))
            b = "".join(rng.choice(list(alphabet), size=rng.integers(0, 7)))
            assert damerau_levenshtein(a, b) == reference_osa(a, b)

    def test_transposition_counts_as_one(self):
        assert damerau_levenshtein("ab", "ba") == 1


# ---------------------------------------------------------------- pipeline


class TestNormalizePipeline:
    def test_full_pipeline_golden(self, tiny_freq, tiny_emoji):
        tokens = normalize(
            "@shikhar check https://www.iitp.ac.in #iamcool!!", tiny_freq, tiny_emoji
        ).tokens
        assert tokens == ["username", "check", "url", "i", "am", "cool", "!", "!"]

    def test_misspelling_golden(self, tiny_freq, tiny_emoji):
        assert normalize("facbok is down", tiny_freq, tiny_emoji).tokens == [
            "facebook",
            "is",
            "down",
        ]

    def test_empty_input(self, tiny_freq, tiny_emoji):
        assert normalize("", tiny_freq, tiny_emoji).tokens == []

    def test_emoji_replacement(self, tiny_freq, tiny_emoji):
        tokens = normalize("so good \U0001F620", tiny_freq, tiny_emoji).tokens
        assert tokens[-2:] == ["angry", "face"]

    def test_unmatched_emoji_dropped(self, tiny_freq, tiny_emoji):
        assert normalize("fine \U0001F921", tiny_freq, tiny_emoji).tokens == ["fine"]

    def test_whitespace_and_newlines_collapse(self, tiny_freq, tiny_emoji):
        tokens = normalize("i  am\n\ncool \t !", tiny_freq, tiny_emoji).tokens
        assert tokens == ["i", "am", "cool", "!"]

    def test_keeps_question_and_exclamation_only(self, tiny_freq, tiny_emoji):
        tokens = normalize("why?! (really) [ok]; #x,", tiny_freq, tiny_emoji).tokens
        assert "?" in tokens and "!" in tokens
        assert not any(t in "()[];," for t in tokens)

    def test_stage_toggles(self, tiny_freq, tiny_emoji):
        opts = NormalizeOptions(mask_entities=False, spell_correct=False)
        tokens = normalize("@someone facbok", tiny_freq, tiny_emoji, opts).tokens
        assert tokens == ["someone", "facbok"]  # "@" dropped by the filter

    def test_punctuation_filter_toggle(self, tiny_freq, tiny_emoji):
        opts = NormalizeOptions(filter_punctuation=False, spell_correct=False)
        tokens = normalize("ok, (fine)", tiny_freq, tiny_emoji, opts).tokens
        assert tokens == ["ok", ",", "(", "fine", ")"]

    def test_output_alphabet_property(self, tiny_freq, tiny_emoji):
        messy = [
            "@a_b check HTTP stuff http://x.y/#tag!!",
            "C'mon   WHY?! \U0001F602 #goodday 123",
            "plain words only",
            "❤️ ???",
        ]
        token_re = re.compile(r"[a-z0-9']+")
        for text in messy:
            for tok in normalize(text, tiny_freq, tiny_emoji).tokens:
                assert tok in ("!", "?", "username", "url") or token_re.fullmatch(tok)

    def test_idempotence(self, tiny_freq, tiny_emoji):
        messy = [
            "@shikhar check https://www.iitp.ac.in #iamcool!!",
            "facbok is down \U0001F620",
            "I am COOL!!! #laughter",
            "what? qqq zzz 42",
        ]
        for text in messy:
            once = normalize(text, tiny_freq, tiny_emoji).tokens
            twice = normalize(" ".join(once), tiny_freq, tiny_emoji).tokens
            assert twice == once

    def test_carries_tweet_id(self, tiny_freq, tiny_emoji):
        assert normalize("hi", tiny_freq, tiny_emoji, tweet_id="t9").original_id == "t9"
