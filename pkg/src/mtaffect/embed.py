"""Per-word vector composition from three pretrained tables (word vectors
zero-padded to the target width, emoji vectors, character-mean fallback)
and fixed-length tweet encoding."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .normalize import NormalizedTweet


class EmbeddingError(ValueError):
    pass


@dataclass
class EmbeddingTable:
    name: str
    dim: int
    vectors: dict[str, np.ndarray]

    def __contains__(self, token: str) -> bool:
        return token in self.vectors

    def __len__(self) -> int:
        return len(self.vectors)

    def get(self, token: str) -> np.ndarray | None:
        return self.vectors.get(token)


def load_embedding_table(path, expected_dim: int, name: str = "") -> EmbeddingTable:
    """Parse a text table of "token v1 ... v_dim" lines.

    Duplicate tokens keep their first occurrence; a row whose float count
    differs from expected_dim raises with the line number.
    """
    vectors: dict[str, np.ndarray] = {}
    with open(path, encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            parts = line.rstrip("\n").split(" ")
            if parts == [""]:
                continue
            token = parts[0]
            values = parts[1:]
            if len(values) != expected_dim:
                raise EmbeddingError(
                    f"{path} line {line_no}: expected {expected_dim} floats, "
                    f"got {len(values)}"
                )
            if token in vectors:
                continue
            try:
                vectors[token] = np.array(values, dtype=np.float64)
            except ValueError:
                raise EmbeddingError(
                    f"{path} line {line_no}: non-numeric vector entry"
                ) from None
    return EmbeddingTable(name=name or str(path), dim=expected_dim, vectors=vectors)


def compose_word_vector(
    word: str,
    glove: EmbeddingTable,
    emoji: EmbeddingTable,
    chars: EmbeddingTable,
) -> np.ndarray:
    """Compose one word vector of width chars.dim.

    Branch priority: a word-table hit returns the word vector zero-padded at
    the end to the target width; otherwise an emoji-table hit returns the
    emoji vector; otherwise the arithmetic mean of per-character vectors,
    where characters missing from the table contribute zeros but still count
    in the denominator.
    """
    if not word:
        raise ValueError("word must be non-empty")
    target = chars.dim
    if emoji.dim != target:
        raise EmbeddingError(
            f"emoji table dim {emoji.dim} != character table dim {target}"
        )
    if glove.dim > target:
        raise EmbeddingError(
            f"word table dim {glove.dim} exceeds target dim {target}"
        )
    vec = glove.get(word)
    if vec is not None:
        out = np.zeros(target)
        out[: glove.dim] = vec
        return out
    vec = emoji.get(word)
    if vec is not None:
        return vec.copy()
    out = np.zeros(target)
    for ch in word:
        cv = chars.get(ch)
        if cv is not None:
            out += cv
    out /= len(word)
    return out


@dataclass
class TweetMatrix:
    values: np.ndarray  # [max_len, dim]
    mask: np.ndarray  # [max_len] bool, true exactly for rows < length
    length: int


def encode_tweet(
    tweet: NormalizedTweet | list[str],
    glove: EmbeddingTable,
    emoji: EmbeddingTable,
    chars: EmbeddingTable,
    max_len: int = 50,
) -> TweetMatrix:
    """Stack composed word vectors into a zero-padded [max_len, dim] matrix;
    tweets longer than max_len keep their first max_len tokens."""
    if max_len < 1:
        raise ValueError(f"max_len must be >= 1, got {max_len}")
    tokens = tweet.tokens if isinstance(tweet, NormalizedTweet) else tweet
    length = min(len(tokens), max_len)
    values = np.zeros((max_len, chars.dim))
    for i in range(length):
        values[i] = compose_word_vector(tokens[i], glove, emoji, chars)
    mask = np.zeros(max_len, dtype=bool)
    mask[:length] = True
    return TweetMatrix(values=values, mask=mask, length=length)
