"""Positive-class F1 scoring and per-language distribution reports.

Scores are computed from exact confusion counts. Per task we report the
micro F1 (all pairs pooled, the headline number) and the macro F1 (the
unweighted mean of per-language F1). Any ratio with a zero denominator
is 0 by convention, so F1 is 0 whenever precision + recall is 0.

Distribution reports pair the per-language positive/negative counts with
a dependency-free static SVG grouped bar chart.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Sequence, Union

from .cleanse import LabelStats, language_stats
from .errors import InputError
from .records import QCRecord, QIRecord, parse_record_file

Record = Union[QCRecord, QIRecord]


class PredictionFileError(InputError):
    """Prediction TSV is unreadable or misaligned with the gold records."""


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    def __post_init__(self) -> None:
        for name in ("tp", "fp", "fn", "tn"):
            value = getattr(self, name)
            if not isinstance(value, int) or isinstance(value, bool) or value < 0:
                raise ValueError(f"{name} must be a non-negative integer, got {value!r}")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    def merge(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(
            self.tp + other.tp,
            self.fp + other.fp,
            self.fn + other.fn,
            self.tn + other.tn,
        )


def _check_labels(labels: Sequence[int], name: str) -> None:
    for label in labels:
        if label not in (0, 1) or isinstance(label, bool):
            raise ValueError(f"{name} labels must be 0 or 1, got {label!r}")


def confusion_counts(gold: Sequence[int], pred: Sequence[int]) -> ConfusionCounts:
    """Pair labels by position and tally the four cells exactly."""
    if len(gold) != len(pred):
        raise ValueError(f"length mismatch: {len(gold)} gold vs {len(pred)} predicted")
    _check_labels(gold, "gold")
    _check_labels(pred, "predicted")
    tp = fp = fn = tn = 0
    for g, p in zip(gold, pred):
        if g == 1 and p == 1:
            tp += 1
        elif g == 0 and p == 1:
            fp += 1
        elif g == 1 and p == 0:
            fn += 1
        else:
            tn += 1
    return ConfusionCounts(tp, fp, fn, tn)


def precision_recall_f1(counts: ConfusionCounts) -> tuple[float, float, float]:
    precision = counts.tp / (counts.tp + counts.fp) if counts.tp + counts.fp else 0.0
    recall = counts.tp / (counts.tp + counts.fn) if counts.tp + counts.fn else 0.0
    f1 = (
        2.0 * precision * recall / (precision + recall)
        if precision + recall
        else 0.0
    )
    return precision, recall, f1


def f1_positive(counts: ConfusionCounts) -> float:
    return precision_recall_f1(counts)[2]


def average_f1(scores: Iterable[float]) -> float:
    """Unweighted mean, e.g. across the two tasks' headline F1 values."""
    values = list(scores)
    if not values:
        raise ValueError("average of zero scores is undefined")
    return sum(values) / len(values)


@dataclass(frozen=True)
class LanguageScore:
    language: str
    counts: ConfusionCounts
    precision: float
    recall: float
    f1: float


@dataclass(frozen=True)
class MetricsReport:
    per_language: tuple[LanguageScore, ...]  # sorted by language code
    pooled: ConfusionCounts
    micro_f1: float
    macro_f1: float

    def to_json(self) -> str:
        doc = {
            "languages": {
                score.language: {
                    "tp": score.counts.tp,
                    "fp": score.counts.fp,
                    "fn": score.counts.fn,
                    "tn": score.counts.tn,
                    "precision": score.precision,
                    "recall": score.recall,
                    "f1": score.f1,
                }
                for score in self.per_language
            },
            "micro_f1": self.micro_f1,
            "macro_f1": self.macro_f1,
            "pairs": self.pooled.total,
        }
        return json.dumps(doc, sort_keys=True, indent=2) + "\n"

    def to_table(self) -> str:
        lines = [
            f"{'language':<10} {'pairs':>8} {'precision':>10} {'recall':>10} {'f1':>8}"
        ]
        for score in self.per_language:
            lines.append(
                f"{score.language:<10} {score.counts.total:>8} "
                f"{score.precision:>10.4f} {score.recall:>10.4f} {score.f1:>8.4f}"
            )
        lines.append(
            f"{'micro':<10} {self.pooled.total:>8} {'':>10} {'':>10} {self.micro_f1:>8.4f}"
        )
        lines.append(f"{'macro':<10} {'':>8} {'':>10} {'':>10} {self.macro_f1:>8.4f}")
        return "\n".join(lines) + "\n"


def score_records(records: Sequence[Record], predicted: Sequence[int]) -> MetricsReport:
    """Per-language and pooled positive-class F1 for aligned predictions."""
    if len(records) != len(predicted):
        raise ValueError(
            f"length mismatch: {len(records)} records vs {len(predicted)} predictions"
        )
    _check_labels(predicted, "predicted")
    by_language: dict[str, ConfusionCounts] = {}
    for record, pred in zip(records, predicted):
        cell = ConfusionCounts(
            tp=int(record.label == 1 and pred == 1),
            fp=int(record.label == 0 and pred == 1),
            fn=int(record.label == 1 and pred == 0),
            tn=int(record.label == 0 and pred == 0),
        )
        current = by_language.get(record.language, ConfusionCounts())
        by_language[record.language] = current.merge(cell)
    scores = []
    pooled = ConfusionCounts()
    for language in sorted(by_language):
        counts = by_language[language]
        precision, recall, f1 = precision_recall_f1(counts)
        scores.append(LanguageScore(language, counts, precision, recall, f1))
        pooled = pooled.merge(counts)
    micro = f1_positive(pooled)
    macro = average_f1(s.f1 for s in scores) if scores else 0.0
    return MetricsReport(tuple(scores), pooled, micro, macro)


def parse_prediction_file(path: str, expected: int) -> list[int]:
    """Read an index/label TSV and return labels ordered by record index.

    Every index 0..expected-1 must appear exactly once.
    """
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            text = fh.read()
    except OSError as exc:
        raise PredictionFileError(f"cannot read {path}: {exc}") from exc
    except UnicodeDecodeError as exc:
        raise PredictionFileError(f"{path} is not valid UTF-8: {exc}") from exc
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines or lines[0] != "index\tlabel":
        raise PredictionFileError(f"{path} must start with an 'index\\tlabel' header")
    labels: dict[int, int] = {}
    for number, line in enumerate(lines[1:], start=2):
        parts = line.split("\t")
        if len(parts) != 2:
            raise PredictionFileError(f"{path}:{number}: expected 2 columns")
        try:
            index = int(parts[0])
        except ValueError:
            raise PredictionFileError(f"{path}:{number}: bad index {parts[0]!r}") from None
        if parts[1] not in ("0", "1"):
            raise PredictionFileError(f"{path}:{number}: label must be 0 or 1")
        if index in labels:
            raise PredictionFileError(f"{path}:{number}: duplicate index {index}")
        labels[index] = int(parts[1])
    if len(labels) != expected or set(labels) != set(range(expected)):
        raise PredictionFileError(
            f"{path} covers {len(labels)} indices, expected exactly 0..{expected - 1}"
        )
    return [labels[i] for i in range(expected)]


def write_prediction_file(path: str, labels: Sequence[int]) -> None:
    _check_labels(labels, "predicted")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("index\tlabel\n")
        for index, label in enumerate(labels):
            fh.write(f"{index}\t{label}\n")


def evaluate_task(gold_path: str, pred_path: str, task: str) -> MetricsReport:
    """Score a prediction file against a gold record file, joined by index."""
    records, diagnostics = parse_record_file(gold_path, task)
    if diagnostics:
        raise PredictionFileError(
            f"{gold_path} has {len(diagnostics)} invalid lines; "
            "evaluation needs a fully valid gold file"
        )
    predicted = parse_prediction_file(pred_path, len(records))
    return score_records(records, predicted)


# ---------------------------------------------------------------------------
# Distribution report

_POSITIVE_COLOR = "#4c78a8"
_NEGATIVE_COLOR = "#e45756"


@dataclass(frozen=True)
class DistributionReport:
    stats: LabelStats
    svg: str

    def to_json(self) -> str:
        return self.stats.to_json()


def render_distribution_svg(stats: LabelStats) -> str:
    """Static grouped bar chart: one group per language, positive and
    negative bars side by side, counts printed above the bars."""
    languages = sorted(stats.counts)
    bar_width = 28
    gap = 30
    left = 50
    top = 20
    plot_height = 220
    bottom = 40
    group_width = 2 * bar_width + gap
    width = left + max(1, len(languages)) * group_width + 20
    height = top + plot_height + bottom
    peak = max(
        (max(pos, neg) for pos, neg in stats.counts.values()),
        default=0,
    )
    scale = (plot_height / peak) if peak else 0.0
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">',
        f'<line x1="{left - 10}" y1="{top + plot_height}" '
        f'x2="{width - 10}" y2="{top + plot_height}" stroke="#333"/>',
    ]
    for i, language in enumerate(languages):
        positives, negatives = stats.counts[language]
        x = left + i * group_width
        for offset, count, color in (
            (0, positives, _POSITIVE_COLOR),
            (bar_width, negatives, _NEGATIVE_COLOR),
        ):
            bar_height = count * scale
            y = top + plot_height - bar_height
            parts.append(
                f'<rect x="{x + offset}" y="{y:.2f}" width="{bar_width - 2}" '
                f'height="{bar_height:.2f}" fill="{color}"/>'
            )
            parts.append(
                f'<text x="{x + offset + (bar_width - 2) / 2:.1f}" y="{y - 4:.2f}" '
                f'font-size="9" text-anchor="middle">{count}</text>'
            )
        parts.append(
            f'<text x="{x + bar_width:.1f}" y="{top + plot_height + 16}" '
            f'font-size="12" text-anchor="middle">{language}</text>'
        )
    legend_y = top + plot_height + 32
    parts.append(
        f'<rect x="{left}" y="{legend_y - 9}" width="10" height="10" '
        f'fill="{_POSITIVE_COLOR}"/>'
        f'<text x="{left + 14}" y="{legend_y}" font-size="11">positive</text>'
    )
    parts.append(
        f'<rect x="{left + 90}" y="{legend_y - 9}" width="10" height="10" '
        f'fill="{_NEGATIVE_COLOR}"/>'
        f'<text x="{left + 104}" y="{legend_y}" font-size="11">negative</text>'
    )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def distribution_report(records: Sequence[Record]) -> DistributionReport:
    stats = language_stats(records)
    return DistributionReport(stats, render_distribution_svg(stats))
