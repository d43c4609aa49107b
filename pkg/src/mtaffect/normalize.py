"""Tweet preprocessing: lowercasing, entity masking, emoji replacement,
hashtag segmentation, tokenization, punctuation filtering, spell correction.

Segmentation and correction run against a pluggable unigram frequency
lexicon (one "word<TAB>count" per line) instead of a fixed corpus, so the
pipeline works at test scale and at full scale with the same code.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

MENTION_TOKEN = "username"
URL_TOKEN = "url"
_PROTECTED_TOKENS = frozenset({MENTION_TOKEN, URL_TOKEN, "!", "?"})

_URL_RE = re.compile(r"(?:https?://|www\.)\S+")
_MENTION_RE = re.compile(r"@[A-Za-z0-9_]+")
_HASHTAG_RE = re.compile(r"#([A-Za-z0-9_]+)")
_TOKEN_RE = re.compile(r"[a-zA-Z0-9']+|[^a-zA-Z0-9'\s]")
_WORD_RE = re.compile(r"[a-zA-Z0-9']*[a-zA-Z0-9][a-zA-Z0-9']*")

_EDIT_ALPHABET = "abcdefghijklmnopqrstuvwxyz0123456789'"


class LexiconError(ValueError):
    pass


class FrequencyLexicon:
    """Unigram counts with total, used for segmentation scores and spelling."""

    def __init__(self, counts: dict[str, int]):
        for word, n in counts.items():
            if n < 1:
                raise LexiconError(f"count for {word!r} must be >= 1, got {n}")
        self.counts = dict(counts)
        self.total = sum(self.counts.values())
        self.lengths = {len(w) for w in self.counts}

    def __contains__(self, word: str) -> bool:
        return word in self.counts

    def __len__(self) -> int:
        return len(self.counts)

    def count(self, word: str) -> int:
        return self.counts.get(word, 0)

    def log_prob(self, word: str) -> float:
        """log P(word); unknown words get the 1/(total * 10^len) smoothing."""
        n = self.counts.get(word)
        if n is not None:
            return math.log(n) - math.log(self.total)
        return -math.log(self.total) - len(word) * math.log(10.0)

    @classmethod
    def load(cls, path) -> "FrequencyLexicon":
        counts = {}
        with open(path, encoding="utf-8") as f:
            for line_no, line in enumerate(f, start=1):
                line = line.rstrip("\n")
                if not line:
                    continue
                parts = line.split("\t")
                if len(parts) != 2:
                    raise LexiconError(f"{path} line {line_no}: expected word<TAB>count")
                try:
                    counts[parts[0]] = int(parts[1])
                except ValueError:
                    raise LexiconError(
                        f"{path} line {line_no}: bad count {parts[1]!r}"
                    ) from None
        return cls(counts)


class EmojiLexicon:
    """Exact-match emoji to replacement-word mapping (TSV: emoji<TAB>words)."""

    def __init__(self, mapping: dict[str, list[str]]):
        for emoji_seq, words in mapping.items():
            if not words or any(w != w.lower() or not w for w in words):
                raise LexiconError(
                    f"replacement for {emoji_seq!r} must be non-empty lowercase words"
                )
        self.mapping = dict(mapping)
        # longest keys first so multi-codepoint sequences win over prefixes
        self._ordered = sorted(self.mapping, key=len, reverse=True)

    def __contains__(self, emoji_seq: str) -> bool:
        return emoji_seq in self.mapping

    def replace(self, text: str) -> str:
        for key in self._ordered:
            if key in text:
                text = text.replace(key, " " + " ".join(self.mapping[key]) + " ")
        return text

    @classmethod
    def load(cls, path) -> "EmojiLexicon":
        mapping = {}
        with open(path, encoding="utf-8") as f:
            for line_no, line in enumerate(f, start=1):
                line = line.rstrip("\n")
                if not line:
                    continue
                parts = line.split("\t")
                if len(parts) != 2:
                    raise LexiconError(
                        f"{path} line {line_no}: expected emoji<TAB>words"
                    )
                mapping[parts[0]] = parts[1].split()
        return cls(mapping)


@dataclass(frozen=True)
class NormalizeOptions:
    lowercase: bool = True
    mask_entities: bool = True
    replace_emoji: bool = True
    segment_hashtags: bool = True
    filter_punctuation: bool = True
    spell_correct: bool = True
    max_edit: int = 2


@dataclass
class NormalizedTweet:
    tokens: list[str]
    original_id: str = ""


def replace_entities(text: str) -> str:
    """Mask @-mentions as "username" and http/https/www URLs as "url".

    URLs are replaced first so their paths cannot leak mentions or hashtags.
    """
    text = _URL_RE.sub(URL_TOKEN, text)
    return _MENTION_RE.sub(MENTION_TOKEN, text)


def segment_hashtag(tag: str, freq: FrequencyLexicon) -> list[str]:
    """Best segmentation of a hashtag body by unigram probability product.

    Dynamic program over split points; each piece scores log P(w) from the
    lexicon, with unknown pieces smoothed as 1/(total * 10^len).
    """
    if not tag or not tag.isalnum():
        raise ValueError(f"hashtag body must be non-empty alphanumeric, got {tag!r}")
    tag = tag.lower()
    n = len(tag)
    best = [-math.inf] * (n + 1)
    back = [0] * (n + 1)
    best[0] = 0.0
    for i in range(1, n + 1):
        for j in range(i):
            score = best[j] + freq.log_prob(tag[j:i])
            if score > best[i]:
                best[i] = score
                back[i] = j
    words = []
    i = n
    while i > 0:
        j = back[i]
        words.append(tag[j:i])
        i = j
    words.reverse()
    return words


def damerau_levenshtein(a: str, b: str) -> int:
    """Optimal-string-alignment edit distance (insert, delete, substitute,
    adjacent transposition)."""
    la, lb = len(a), len(b)
    prev2 = None
    prev = list(range(lb + 1))
    for i in range(1, la + 1):
        cur = [i] + [0] * lb
        for j in range(1, lb + 1):
            cost = 0 if a[i - 1] == b[j - 1] else 1
            cur[j] = min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + cost)
            if (
                i > 1
                and j > 1
                and a[i - 1] == b[j - 2]
                and a[i - 2] == b[j - 1]
            ):
                cur[j] = min(cur[j], prev2[j - 2] + 1)
        prev2, prev = prev, cur
    return prev[lb]


def _edits1(word: str) -> set[str]:
    splits = [(word[:i], word[i:]) for i in range(len(word) + 1)]
    deletes = [a + b[1:] for a, b in splits if b]
    transposes = [a + b[1] + b[0] + b[2:] for a, b in splits if len(b) > 1]
    replaces = [a + c + b[1:] for a, b in splits if b for c in _EDIT_ALPHABET]
    inserts = [a + c + b for a, b in splits for c in _EDIT_ALPHABET]
    return set(deletes + transposes + replaces + inserts)


def correct_spelling(word: str, freq: FrequencyLexicon, max_edit: int = 2) -> str:
    """Known words pass through; otherwise the highest-count lexicon word
    within edit distance max_edit wins, ties broken by smaller distance then
    lexicographic order; with no candidate the word is returned unchanged."""
    if max_edit not in (1, 2):
        raise ValueError(f"max_edit must be 1 or 2, got {max_edit}")
    if word in freq:
        return word
    # an edit changes length by at most one, so candidate generation is
    # pointless when no lexicon word is within max_edit of this length
    near = range(len(word) - max_edit, len(word) + max_edit + 1)
    if not any(n in freq.lengths for n in near):
        return word
    candidates = {}
    level1 = _edits1(word)
    for cand in level1:
        if cand in freq:
            candidates[cand] = damerau_levenshtein(word, cand)
    if max_edit >= 2:
        for mid in level1:
            for cand in _edits1(mid):
                if cand in freq and cand not in candidates:
                    candidates[cand] = damerau_levenshtein(word, cand)
    candidates = {c: d for c, d in candidates.items() if d <= max_edit}
    if not candidates:
        return word
    return min(candidates, key=lambda c: (-freq.count(c), candidates[c], c))


def _segment_hashtags_in_text(text: str, freq: FrequencyLexicon) -> str:
    def expand(match: re.Match) -> str:
        words = []
        for piece in match.group(1).split("_"):
            if piece:
                words.extend(segment_hashtag(piece, freq))
        return " " + " ".join(words) + " "

    return _HASHTAG_RE.sub(expand, text)


def _keep_token(token: str) -> bool:
    return token in ("!", "?") or bool(_WORD_RE.fullmatch(token))


def normalize(
    text: str,
    freq: FrequencyLexicon,
    emo: EmojiLexicon,
    opts: NormalizeOptions = NormalizeOptions(),
    tweet_id: str = "",
) -> NormalizedTweet:
    """Run the full pipeline on raw tweet text.

    Stage order: lowercase, entity masking, emoji replacement, hashtag
    segmentation, tokenization, punctuation filter (keeping ! and ?), spell
    correction. Unmatched emoji and other symbols fall out at the punctuation
    filter; whitespace and newlines disappear with tokenization.
    """
    s = text
    if opts.lowercase:
        s = s.lower()
    if opts.mask_entities:
        s = replace_entities(s)
    if opts.replace_emoji:
        s = emo.replace(s)
    if opts.segment_hashtags:
        s = _segment_hashtags_in_text(s, freq)
    tokens = _TOKEN_RE.findall(s)
    if opts.filter_punctuation:
        tokens = [t for t in tokens if _keep_token(t)]
    if opts.spell_correct:
        tokens = [
            t if t in _PROTECTED_TOKENS else correct_spelling(t, freq, opts.max_edit)
            for t in tokens
        ]
    return NormalizedTweet(tokens=tokens, original_id=tweet_id)
