"""Loading and validation of tweet affect datasets (7-class valence and
real-valued intensity), plus the ordinal class mapping used everywhere else."""

from __future__ import annotations

import enum
import json
import re
from dataclasses import dataclass, field

SPLIT_NAMES = ("train", "dev", "test")
DATASET_KINDS = ("classification", "intensity", "both")


class DatasetError(ValueError):
    """Malformed dataset content; message names the offending line or ids."""


class ValenceClass(enum.IntEnum):
    """Seven-point ordinal valence scale; integer values are the ordinals."""

    NEG_V = -3
    NEG_M = -2
    NEG_S = -1
    NEU = 0
    POS_S = 1
    POS_M = 2
    POS_V = 3

    @property
    def tag(self) -> str:
        return _TAGS[self]

    @property
    def description(self) -> str:
        return _DESCRIPTIONS[self]

    @classmethod
    def from_tag(cls, tag: str) -> "ValenceClass":
        try:
            return _TAG_TO_CLASS[tag]
        except KeyError:
            raise DatasetError(f"unknown valence tag {tag!r}") from None


_TAGS = {
    ValenceClass.NEG_V: "Neg-V",
    ValenceClass.NEG_M: "Neg-M",
    ValenceClass.NEG_S: "Neg-S",
    ValenceClass.NEU: "Neu",
    ValenceClass.POS_S: "Pos-S",
    ValenceClass.POS_M: "Pos-M",
    ValenceClass.POS_V: "Pos-V",
}
_TAG_TO_CLASS = {tag: c for c, tag in _TAGS.items()}
_DESCRIPTIONS = {
    ValenceClass.NEG_V: "very negative",
    ValenceClass.NEG_M: "moderately negative",
    ValenceClass.NEG_S: "slightly negative",
    ValenceClass.NEU: "neutral or mixed",
    ValenceClass.POS_S: "slightly positive",
    ValenceClass.POS_M: "moderately positive",
    ValenceClass.POS_V: "very positive",
}

ALL_CLASSES = tuple(sorted(ValenceClass, key=int))


def class_to_ordinal(c: ValenceClass) -> int:
    """Map a valence class to its ordinal in -3..3 (Neu -> 0)."""
    return int(c)


def ordinal_to_class(n: int) -> ValenceClass:
    """Inverse of class_to_ordinal; raises on integers outside -3..3."""
    try:
        return ValenceClass(n)
    except ValueError:
        raise DatasetError(f"valence ordinal {n} outside -3..3") from None


@dataclass(eq=True)
class LabeledTweet:
    """Raw tweet with at least one of a valence class or an intensity score."""

    id: str
    text: str
    valence: ValenceClass | None = None
    intensity: float | None = None

    def __post_init__(self):
        if self.valence is None and self.intensity is None:
            raise DatasetError(f"tweet {self.id!r} has neither valence nor intensity")
        if self.intensity is not None and not 0.0 <= self.intensity <= 1.0:
            raise DatasetError(
                f"tweet {self.id!r} intensity {self.intensity} outside [0, 1]"
            )


@dataclass
class DatasetSplit:
    name: str
    examples: list[LabeledTweet] = field(default_factory=list)

    def __post_init__(self):
        if self.name not in SPLIT_NAMES:
            raise DatasetError(f"split name {self.name!r} not in {SPLIT_NAMES}")
        seen = set()
        dupes = [t.id for t in self.examples if t.id in seen or seen.add(t.id)]
        if dupes:
            raise DatasetError(f"duplicate ids in split {self.name!r}: {dupes}")

    def __len__(self) -> int:
        return len(self.examples)

    def ids(self) -> list[str]:
        return [t.id for t in self.examples]


@dataclass
class ClassHistogram:
    counts: dict[ValenceClass, int]

    def total(self) -> int:
        return sum(self.counts.values())

    def to_json(self) -> str:
        return json.dumps({c.tag: self.counts[c] for c in ALL_CLASSES})

    @classmethod
    def from_json(cls, s: str) -> "ClassHistogram":
        raw = json.loads(s)
        return cls({ValenceClass.from_tag(tag): int(n) for tag, n in raw.items()})


_CLASS_LABEL_RE = re.compile(r"^\s*(-?\d+)\s*(?::.*)?$")


def parse_class_label(label: str, line_no: int) -> ValenceClass:
    """Parse a label of the form "<int>: free text" by its leading integer."""
    m = _CLASS_LABEL_RE.match(label)
    if not m:
        raise DatasetError(f"line {line_no}: unparseable class label {label!r}")
    n = int(m.group(1))
    if not -3 <= n <= 3:
        raise DatasetError(f"line {line_no}: class integer {n} outside -3..3")
    return ValenceClass(n)


def parse_intensity_label(label: str, line_no: int) -> float:
    try:
        value = float(label)
    except ValueError:
        raise DatasetError(
            f"line {line_no}: unparseable intensity {label!r}"
        ) from None
    if not 0.0 <= value <= 1.0:
        raise DatasetError(f"line {line_no}: intensity {value} outside [0, 1]")
    return value


def load_dataset(path, kind: str, name: str = "train") -> DatasetSplit:
    """Load a tab-separated split.

    Single-label files carry columns ID / Tweet / Affect Dimension / Label;
    kind "both" expects a fifth Intensity column. The header row is required
    and skipped. Rows with text "NONE" or an empty label are rejected so split
    sizes stay auditable.
    """
    if kind not in DATASET_KINDS:
        raise ValueError(f"kind must be one of {DATASET_KINDS}, got {kind!r}")
    n_cols = 5 if kind == "both" else 4
    examples = []
    with open(path, encoding="utf-8") as f:
        lines = f.read().splitlines()
    if not lines:
        raise DatasetError(f"{path}: empty file, header row required")
    for line_no, line in enumerate(lines[1:], start=2):
        if line == "":
            continue
        cols = line.split("\t")
        if len(cols) != n_cols:
            raise DatasetError(
                f"line {line_no}: expected {n_cols} tab-separated columns, got {len(cols)}"
            )
        tweet_id, text = cols[0], cols[1]
        if text == "NONE":
            raise DatasetError(f"line {line_no}: tweet text is NONE")
        valence = None
        intensity = None
        if kind in ("classification", "both"):
            label = cols[3]
            if label.strip() == "":
                raise DatasetError(f"line {line_no}: missing class label")
            valence = parse_class_label(label, line_no)
        if kind in ("intensity", "both"):
            label = cols[4] if kind == "both" else cols[3]
            if label.strip() == "":
                raise DatasetError(f"line {line_no}: missing intensity label")
            intensity = parse_intensity_label(label, line_no)
        examples.append(LabeledTweet(tweet_id, text, valence, intensity))
    return DatasetSplit(name, examples)


def save_dataset(split: DatasetSplit, path, kind: str) -> None:
    """Write a split back to TSV; load_dataset on the result round-trips."""
    if kind not in DATASET_KINDS:
        raise ValueError(f"kind must be one of {DATASET_KINDS}, got {kind!r}")
    header = ["ID", "Tweet", "Affect Dimension", "Label"]
    if kind == "both":
        header.append("Intensity")
    rows = ["\t".join(header)]
    for t in split.examples:
        cols = [t.id, t.text, "valence"]
        if kind in ("classification", "both"):
            if t.valence is None:
                raise DatasetError(f"tweet {t.id!r} lacks a valence label")
            cols.append(f"{int(t.valence)}: {t.valence.description}")
        if kind in ("intensity", "both"):
            if t.intensity is None:
                raise DatasetError(f"tweet {t.id!r} lacks an intensity score")
            cols.append(repr(t.intensity))
        rows.append("\t".join(cols))
    with open(path, "w", encoding="utf-8") as f:
        f.write("\n".join(rows) + "\n")


def merge_splits(class_split: DatasetSplit, intensity_split: DatasetSplit) -> DatasetSplit:
    """Join class and intensity splits on tweet id into a dual-labeled split.

    Keeps the intersection of ids, in class_split order; texts must agree.
    """
    by_id = {t.id: t for t in intensity_split.examples}
    merged = []
    for t in class_split.examples:
        other = by_id.get(t.id)
        if other is None:
            continue
        if other.text != t.text:
            raise DatasetError(f"tweet {t.id!r} has differing texts across splits")
        merged.append(LabeledTweet(t.id, t.text, t.valence, other.intensity))
    return DatasetSplit(class_split.name, merged)


def histogram(split: DatasetSplit) -> ClassHistogram:
    """Exact per-class counts; errors if any example lacks a valence label."""
    missing = [t.id for t in split.examples if t.valence is None]
    if missing:
        raise DatasetError(f"examples without valence labels: {missing}")
    counts = {c: 0 for c in ALL_CLASSES}
    for t in split.examples:
        counts[t.valence] += 1
    return ClassHistogram(counts)
