"""Corpus cleaning rules and per-language label statistics.

Three rules, applied in a fixed order: conflicting-label removal, exact
deduplication, numeric-query filtering. Each rule is a pure, idempotent
function over immutable records; `cleanse` chains them and reconciles a
CleanseReport whose counters always sum back to the input count.
"""

from __future__ import annotations

import json
import unicodedata
from collections import defaultdict
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence, Union

from .errors import InputError
from .records import CanonicalKey, Record, canonical_key, normalize_text


@dataclass(frozen=True)
class CleanseReport:
    conflicts_removed: int
    duplicates_removed: int
    numeric_removed: int
    allowlisted_kept: int
    kept: int

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


@dataclass(frozen=True)
class ConflictGroup:
    """All records sharing one canonical key with both labels present."""

    key: CanonicalKey
    records: tuple[Record, ...]


def remove_conflicts(records: Sequence[Record]) -> tuple[list[Record], list[ConflictGroup]]:
    """Drop every record whose canonical key carries both labels.

    Conflicted groups are removed entirely (no majority vote). Output
    preserves input order; groups are reported in first-occurrence order.
    """
    by_key: dict[CanonicalKey, list[Record]] = defaultdict(list)
    order: list[CanonicalKey] = []
    keys = []
    for record in records:
        key = canonical_key(record)
        keys.append(key)
        if key not in by_key:
            order.append(key)
        by_key[key].append(record)

    conflicted = {
        key for key, group in by_key.items()
        if len({r.label for r in group}) > 1
    }
    kept = [r for r, key in zip(records, keys) if key not in conflicted]
    groups = [ConflictGroup(key, tuple(by_key[key])) for key in order if key in conflicted]
    return kept, groups


def dedup(records: Sequence[Record]) -> list[Record]:
    """Keep the first occurrence of each (canonical key, label) pair.

    Origin is not part of record identity.
    """
    seen: set[tuple[CanonicalKey, int]] = set()
    kept = []
    for record in records:
        identity = (canonical_key(record), record.label)
        if identity in seen:
            continue
        seen.add(identity)
        kept.append(record)
    return kept


def is_purely_numeric(query: str, *, strict: bool = False) -> bool:
    """True when the query has no lexical content.

    Default rule: strip all whitespace and Unicode punctuation; the
    remainder must be non-empty and consist solely of decimal digits
    ("12-34" qualifies). Strict rule: the trimmed query itself must be
    all digits ("12-34" does not qualify).
    """
    if strict:
        trimmed = query.strip()
        return bool(trimmed) and all(ch.isdecimal() for ch in trimmed)
    rest = [
        ch for ch in query
        if not ch.isspace() and not unicodedata.category(ch).startswith("P")
    ]
    return bool(rest) and all(ch.isdecimal() for ch in rest)


def filter_numeric(
    records: Sequence[Record],
    allowlist: frozenset[str] = frozenset(),
    *,
    strict: bool = False,
) -> tuple[list[Record], list[Record]]:
    """Remove purely numerical queries unless allowlisted.

    The allowlist holds normalized query forms (manual-review stand-in).
    """
    kept, removed = [], []
    for record in records:
        if is_purely_numeric(record.query, strict=strict) and \
                normalize_text(record.query) not in allowlist:
            removed.append(record)
        else:
            kept.append(record)
    return kept, removed


def load_allowlist(path: Union[str, Path]) -> frozenset[str]:
    """Read a newline-delimited UTF-8 allowlist; entries are normalized."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read allowlist {path}: {exc}") from exc
    entries = {normalize_text(line) for line in text.split("\n")}
    entries.discard("")
    return frozenset(entries)


@dataclass(frozen=True)
class CleanseResult:
    kept: tuple[Record, ...]
    report: CleanseReport
    conflict_groups: tuple[ConflictGroup, ...]


def cleanse(
    records: Sequence[Record],
    *,
    allowlist: frozenset[str] = frozenset(),
    strict_numeric: bool = False,
) -> CleanseResult:
    """Full cleaning pipeline: conflicts, then dedup, then numeric filter."""
    after_conflicts, groups = remove_conflicts(records)
    after_dedup = dedup(after_conflicts)
    kept, numeric_removed = filter_numeric(
        after_dedup, allowlist, strict=strict_numeric
    )
    allowlisted = sum(
        1 for r in kept
        if is_purely_numeric(r.query, strict=strict_numeric)
        and normalize_text(r.query) in allowlist
    )
    report = CleanseReport(
        conflicts_removed=len(records) - len(after_conflicts),
        duplicates_removed=len(after_conflicts) - len(after_dedup),
        numeric_removed=len(numeric_removed),
        allowlisted_kept=allowlisted,
        kept=len(kept),
    )
    return CleanseResult(tuple(kept), report, tuple(groups))


@dataclass(frozen=True)
class LabelStats:
    """Per-language positive/negative counts; additive across shards."""

    counts: Mapping[str, tuple[int, int]]  # language -> (positives, negatives)

    def positives(self, language: str) -> int:
        return self.counts.get(language, (0, 0))[0]

    def negatives(self, language: str) -> int:
        return self.counts.get(language, (0, 0))[1]

    def language_total(self, language: str) -> int:
        pos, neg = self.counts.get(language, (0, 0))
        return pos + neg

    @property
    def total_positives(self) -> int:
        return sum(pos for pos, _ in self.counts.values())

    @property
    def total_negatives(self) -> int:
        return sum(neg for _, neg in self.counts.values())

    @property
    def total(self) -> int:
        return self.total_positives + self.total_negatives

    def merge(self, other: "LabelStats") -> "LabelStats":
        merged = dict(self.counts)
        for language, (pos, neg) in other.counts.items():
            old_pos, old_neg = merged.get(language, (0, 0))
            merged[language] = (old_pos + pos, old_neg + neg)
        return LabelStats(merged)

    def to_json(self) -> str:
        payload = {
            "languages": {
                language: {"negatives": neg, "positives": pos, "total": pos + neg}
                for language, (pos, neg) in self.counts.items()
            },
            "total": self.total,
            "total_negatives": self.total_negatives,
            "total_positives": self.total_positives,
        }
        return json.dumps(payload, sort_keys=True)

    def to_csv(self) -> str:
        lines = ["language,positives,negatives,total"]
        for language in sorted(self.counts):
            pos, neg = self.counts[language]
            lines.append(f"{language},{pos},{neg},{pos + neg}")
        return "\n".join(lines) + "\n"


def language_stats(records: Iterable[Record]) -> LabelStats:
    counts: dict[str, list[int]] = defaultdict(lambda: [0, 0])
    for record in records:
        counts[record.language][0 if record.label == 1 else 1] += 1
    return LabelStats({lang: (pos, neg) for lang, (pos, neg) in counts.items()})
