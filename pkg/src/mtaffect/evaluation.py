"""Pearson correlation, confusion matrices, the paired t-test, and run
reports. Pearson over classification output uses the ordinal class codes;
an undefined correlation (constant vector) surfaces as a flag, never NaN."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .corpus import ALL_CLASSES, DatasetSplit


class MetricError(ValueError):
    pass


class PearsonScore(NamedTuple):
    value: float
    defined: bool


def pearson(x, y) -> PearsonScore:
    """Sample Pearson correlation; a zero-variance side yields (0.0, False)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise MetricError(f"pearson: shapes {x.shape} vs {y.shape}")
    n = x.size
    if n < 2:
        raise MetricError(f"pearson needs n >= 2, got {n}")
    dx = x - x.mean()
    dy = y - y.mean()
    vx = float(dx @ dx)
    vy = float(dy @ dy)
    if vx == 0.0 or vy == 0.0:
        return PearsonScore(0.0, False)
    return PearsonScore(float(dx @ dy) / math.sqrt(vx * vy), True)


def confusion(golds, preds) -> np.ndarray:
    """7x7 integer matrix, rows gold and columns predicted, Neg-V..Pos-V."""
    if len(golds) != len(preds):
        raise MetricError(f"confusion: {len(golds)} golds vs {len(preds)} preds")
    mat = np.zeros((7, 7), dtype=np.int64)
    for g, p in zip(golds, preds):
        mat[int(g) + 3, int(p) + 3] += 1
    return mat


def polarity_flip_count(mat: np.ndarray) -> int:
    """Misclassifications across polarity: gold negative predicted positive
    or vice versa, neutral excluded on both axes."""
    neg = slice(0, 3)
    pos = slice(4, 7)
    return int(mat[neg, pos].sum() + mat[pos, neg].sum())


def _contfrac_beta(a: float, b: float, x: float) -> float:
    # Lentz's continued fraction for the incomplete beta integral.
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, 300):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-15:
            return h
    raise MetricError(f"incomplete beta did not converge for a={a} b={b} x={x}")


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """I_x(a, b) by continued fraction, switching tails for stability."""
    if not 0.0 <= x <= 1.0:
        raise MetricError(f"incomplete beta x={x} outside [0, 1]")
    if x == 0.0 or x == 1.0:
        return x
    ln_front = (
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _contfrac_beta(a, b, x) / a
    return 1.0 - front * _contfrac_beta(b, a, 1.0 - x) / b


def student_t_sf_two_sided(t: float, df: int) -> float:
    """Two-sided p-value for Student's t with df degrees of freedom."""
    if df < 1:
        raise MetricError(f"degrees of freedom must be >= 1, got {df}")
    return regularized_incomplete_beta(df / 2.0, 0.5, df / (df + t * t))


class TTestResult(NamedTuple):
    t: float
    p: float
    df: int
    defined: bool


def paired_ttest(a, b) -> TTestResult:
    """Two-sided paired t-test on the per-pair differences a - b.

    Zero-variance differences make the p-value undefined (flagged), with
    t = 0 when the mean difference is also zero.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise MetricError(f"paired_ttest: shapes {a.shape} vs {b.shape}")
    k = a.size
    if k < 2:
        raise MetricError(f"paired_ttest needs k >= 2, got {k}")
    d = a - b
    mean = d.mean()
    var = float(((d - mean) ** 2).sum()) / (k - 1)
    df = k - 1
    if var == 0.0:
        t = 0.0 if mean == 0.0 else math.copysign(math.inf, mean)
        return TTestResult(t=t, p=float("nan"), df=df, defined=False)
    t = mean / math.sqrt(var / k)
    return TTestResult(t=t, p=student_t_sf_two_sided(t, df), df=df, defined=True)


@dataclass
class EvalReport:
    task: str  # classification | intensity
    pearson: float
    pearson_defined: bool
    n: int
    confusion: np.ndarray | None = None
    per_example: list[tuple[str, float, float]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "task": self.task,
            "pearson": self.pearson,
            "pearson_defined": self.pearson_defined,
            "n": self.n,
            "confusion": None if self.confusion is None else self.confusion.tolist(),
            "per_example": [list(row) for row in self.per_example],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "EvalReport":
        return cls(
            task=d["task"],
            pearson=d["pearson"],
            pearson_defined=d["pearson_defined"],
            n=d["n"],
            confusion=None
            if d.get("confusion") is None
            else np.array(d["confusion"], dtype=np.int64),
            per_example=[
                (row[0], row[1], row[2]) for row in d.get("per_example", [])
            ],
        )

    @classmethod
    def from_json(cls, s: str) -> "EvalReport":
        return cls.from_dict(json.loads(s))


def evaluate_run(predictions: dict, gold_split: DatasetSplit, task: str) -> EvalReport:
    """Score a prediction mapping (tweet id -> class or float) against gold.

    Classification Pearson runs over the ordinal class codes; intensity over
    the raw scores. Every gold id must be predicted.
    """
    if task not in ("classification", "intensity"):
        raise MetricError(f"unknown task {task!r}")
    missing = [t.id for t in gold_split.examples if t.id not in predictions]
    if missing:
        raise MetricError(f"missing predictions for ids: {missing}")
    per_example = []
    golds = []
    preds = []
    for t in gold_split.examples:
        p = predictions[t.id]
        if task == "classification":
            if t.valence is None:
                raise MetricError(f"gold tweet {t.id!r} lacks a valence label")
            g, v = float(int(t.valence)), float(int(p))
        else:
            if t.intensity is None:
                raise MetricError(f"gold tweet {t.id!r} lacks an intensity score")
            g, v = float(t.intensity), float(p)
        golds.append(g)
        preds.append(v)
        per_example.append((t.id, g, v))
    score = pearson(golds, preds)
    mat = None
    if task == "classification":
        mat = confusion([int(g) for g in golds], [int(v) for v in preds])
    return EvalReport(
        task=task,
        pearson=score.value,
        pearson_defined=score.defined,
        n=len(per_example),
        confusion=mat,
        per_example=per_example,
    )


def save_confusion_csv(mat: np.ndarray, path) -> None:
    tags = [c.tag for c in ALL_CLASSES]
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["gold\\pred"] + tags)
        for i, tag in enumerate(tags):
            writer.writerow([tag] + [int(v) for v in mat[i]])


def save_confusion_heatmap(mat: np.ndarray, path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    tags = [c.tag for c in ALL_CLASSES]
    fig, ax = plt.subplots(figsize=(6, 5))
    im = ax.imshow(mat, cmap="Blues")
    ax.set_xticks(range(7), tags, rotation=45)
    ax.set_yticks(range(7), tags)
    ax.set_xlabel("Predicted")
    ax.set_ylabel("Gold")
    for i in range(7):
        for j in range(7):
            ax.text(j, i, str(int(mat[i, j])), ha="center", va="center", fontsize=8)
    fig.colorbar(im)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
