"""Hand-crafted per-tweet features: native lexicon aggregation (per-column
sum plus match count for each scored lexicon) concatenated with precomputed
transfer-feature vectors loaded from per-tweet files."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass

import numpy as np

log = logging.getLogger(__name__)

# Expected widths of the supported transfer-feature exports.
EXTERNAL_DIMS = {
    "deepmoji_softmax": 64,
    "deepmoji_attention": 2304,
    "skip_thought": 4800,
    "sentiment_neuron": 4096,
}


class FeatureError(ValueError):
    pass


@dataclass
class ScoredLexicon:
    """Word-to-score-vector lexicon with a fixed arity per lexicon."""

    name: str
    arity: int
    entries: dict[str, np.ndarray]

    def __post_init__(self):
        if self.arity < 1:
            raise FeatureError(f"lexicon {self.name!r} arity must be >= 1")
        for word, scores in self.entries.items():
            if scores.shape != (self.arity,):
                raise FeatureError(
                    f"lexicon {self.name!r} entry {word!r} has arity "
                    f"{scores.shape}, expected ({self.arity},)"
                )

    @classmethod
    def load(cls, path) -> "ScoredLexicon":
        """TSV with a header row "name<TAB>col1<TAB>...<TAB>colk" that
        declares the lexicon name and score arity; data rows are
        word<TAB>s1<TAB>...<TAB>sk."""
        with open(path, encoding="utf-8") as f:
            lines = f.read().splitlines()
        if not lines:
            raise FeatureError(f"{path}: empty lexicon file")
        header = lines[0].split("\t")
        if len(header) < 2:
            raise FeatureError(f"{path}: header must declare name and columns")
        name, arity = header[0], len(header) - 1
        entries = {}
        for line_no, line in enumerate(lines[1:], start=2):
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != arity + 1:
                raise FeatureError(
                    f"{path} line {line_no}: expected {arity + 1} columns, "
                    f"got {len(parts)}"
                )
            entries[parts[0]] = np.array(parts[1:], dtype=np.float64)
        return cls(name=name, arity=arity, entries=entries)


def lexicon_features(tokens: list[str], lexicons: list[ScoredLexicon]) -> np.ndarray:
    """Per lexicon, the column-wise sum of scores over matched tokens plus
    the matched-token count, concatenated in lexicon order."""
    if not lexicons:
        raise FeatureError("lexicon list must be non-empty")
    blocks = []
    for lex in lexicons:
        sums = np.zeros(lex.arity)
        matched = 0
        for tok in tokens:
            scores = lex.entries.get(tok)
            if scores is not None:
                sums += scores
                matched += 1
        blocks.append(np.concatenate([sums, [float(matched)]]))
    return np.concatenate(blocks)


def lexicon_width(lexicons: list[ScoredLexicon]) -> int:
    return sum(lex.arity + 1 for lex in lexicons)


@dataclass
class ExternalFeatureSet:
    """Per-tweet vectors exported by an out-of-scope upstream model."""

    name: str
    dim: int
    vectors: dict[str, np.ndarray]

    def get(self, tweet_id: str) -> np.ndarray | None:
        """None marks a missing id; the caller decides zero-fill vs error."""
        return self.vectors.get(tweet_id)


def load_external_features(path, expected_dim: int | None = None) -> ExternalFeatureSet:
    """TSV with header "name<TAB>dim"; rows are "tweet_id<TAB>f1 f2 ... f_dim"
    with the floats space-separated inside the second field."""
    with open(path, encoding="utf-8") as f:
        lines = f.read().splitlines()
    if not lines:
        raise FeatureError(f"{path}: empty feature file")
    header = lines[0].split("\t")
    if len(header) != 2:
        raise FeatureError(f"{path}: header must be name<TAB>dim")
    name = header[0]
    try:
        dim = int(header[1])
    except ValueError:
        raise FeatureError(f"{path}: non-integer dim {header[1]!r}") from None
    if expected_dim is not None and dim != expected_dim:
        raise FeatureError(
            f"{path}: declared dim {dim} != expected dim {expected_dim}"
        )
    if name in EXTERNAL_DIMS and dim != EXTERNAL_DIMS[name]:
        raise FeatureError(
            f"{path}: source {name!r} must have dim {EXTERNAL_DIMS[name]}, got {dim}"
        )
    vectors = {}
    for line_no, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise FeatureError(f"{path} line {line_no}: expected id<TAB>floats")
        tweet_id = parts[0]
        if tweet_id in vectors:
            raise FeatureError(f"{path} line {line_no}: duplicate id {tweet_id!r}")
        values = parts[1].split(" ")
        if len(values) != dim:
            raise FeatureError(
                f"{path} line {line_no}: expected {dim} floats, got {len(values)}"
            )
        vectors[tweet_id] = np.array(values, dtype=np.float64)
    return ExternalFeatureSet(name=name, dim=dim, vectors=vectors)


@dataclass
class FeatureSource:
    """One ordered slot of the feature layout: either the native lexicon
    block or one external feature set."""

    name: str
    lexicons: list[ScoredLexicon] | None = None
    external: ExternalFeatureSet | None = None

    def __post_init__(self):
        if (self.lexicons is None) == (self.external is None):
            raise FeatureError(
                f"source {self.name!r} must hold either lexicons or an "
                "external set, not both"
            )

    @property
    def width(self) -> int:
        if self.lexicons is not None:
            return lexicon_width(self.lexicons)
        return self.external.dim


@dataclass
class FeatureConfig:
    sources: list[FeatureSource]
    allow_missing: bool = False

    def __post_init__(self):
        if not self.sources:
            raise FeatureError("feature config must list at least one source")

    @property
    def width(self) -> int:
        return sum(s.width for s in self.sources)

    def layout(self) -> list[tuple[str, int, int]]:
        entries = []
        offset = 0
        for s in self.sources:
            entries.append((s.name, offset, s.width))
            offset += s.width
        return entries


@dataclass
class HandcraftedVector:
    values: np.ndarray
    layout: list[tuple[str, int, int]]

    def layout_json(self) -> str:
        return json.dumps([list(entry) for entry in self.layout])

    @staticmethod
    def layout_from_json(s: str) -> list[tuple[str, int, int]]:
        return [(name, int(off), int(width)) for name, off, width in json.loads(s)]


def assemble_features(
    tweet_id: str, tokens: list[str], config: FeatureConfig
) -> HandcraftedVector:
    """Concatenate all configured sources, in order, for one tweet.

    A missing external vector zero-fills with a warning when allow_missing is
    set, and raises otherwise.
    """
    blocks = []
    for source in config.sources:
        if source.lexicons is not None:
            blocks.append(lexicon_features(tokens, source.lexicons))
        else:
            vec = source.external.get(tweet_id)
            if vec is None:
                if not config.allow_missing:
                    raise FeatureError(
                        f"tweet {tweet_id!r} missing from external source "
                        f"{source.name!r}"
                    )
                log.warning(
                    "tweet %r missing from external source %r, zero-filling",
                    tweet_id,
                    source.name,
                )
                vec = np.zeros(source.external.dim)
            blocks.append(vec)
    return HandcraftedVector(values=np.concatenate(blocks), layout=config.layout())
