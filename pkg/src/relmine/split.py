"""Stratified and query-disjoint train/validation/test splitting.

Stratified mode shuffles each (language, label) stratum with a seeded
RNG and cuts it by the requested ratios, so per-stratum counts deviate
from exact proportionality by at most one record. Query-disjoint mode
assigns every normalized-query GROUP to one split by hashing the query
together with the seed, which makes assignments independent of record
order and guarantees zero query overlap between splits.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from typing import Sequence, Union

from .records import QCRecord, QIRecord, normalize_text
from .seeding import DEFAULT_SEED, check_seed, mix_seed

SPLIT_NAMES = ("train", "validation", "test")
DEFAULT_RATIOS = (0.9, 0.05, 0.05)

Record = Union[QCRecord, QIRecord]


def check_ratios(ratios: Sequence[float]) -> tuple[float, float, float]:
    if len(ratios) != len(SPLIT_NAMES):
        raise ValueError(f"expected {len(SPLIT_NAMES)} ratios, got {len(ratios)}")
    values = tuple(float(r) for r in ratios)
    if any(r <= 0.0 for r in values):
        raise ValueError(f"ratios must be positive, got {values}")
    if abs(sum(values) - 1.0) > 1e-9:
        raise ValueError(f"ratios must sum to 1, got {sum(values)}")
    return values


@dataclass(frozen=True)
class SplitManifest:
    mode: str
    seed: int
    ratios: tuple[float, float, float]
    assignments: tuple[str, ...]  # one split name per record index

    def __post_init__(self) -> None:
        if self.mode not in ("stratified", "query-disjoint"):
            raise ValueError(f"unknown split mode {self.mode!r}")
        check_seed(self.seed)
        check_ratios(self.ratios)
        for name in self.assignments:
            if name not in SPLIT_NAMES:
                raise ValueError(f"unknown split name {name!r}")

    def counts(self) -> dict[str, int]:
        result = {name: 0 for name in SPLIT_NAMES}
        for name in self.assignments:
            result[name] += 1
        return result

    def partition(self, records: Sequence[Record]) -> dict[str, list[Record]]:
        if len(records) != len(self.assignments):
            raise ValueError(
                f"manifest covers {len(self.assignments)} records, got {len(records)}"
            )
        result: dict[str, list[Record]] = {name: [] for name in SPLIT_NAMES}
        for record, name in zip(records, self.assignments):
            result[name].append(record)
        return result

    def to_json(self) -> str:
        doc = {
            "seed": self.seed,
            "mode": self.mode,
            "ratios": list(self.ratios),
            "assignments": [
                {"index": i, "split": name}
                for i, name in enumerate(self.assignments)
            ],
        }
        return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def _cut_points(total: int, ratios: tuple[float, float, float]) -> list[int]:
    """Integer counts per split, largest-remainder rounded, summing to total."""
    exact = [total * r for r in ratios]
    counts = [int(e) for e in exact]
    order = sorted(
        range(len(exact)),
        key=lambda i: (-(exact[i] - counts[i]), i),
    )
    for i in order[: total - sum(counts)]:
        counts[i] += 1
    return counts


def split_stratified(
    records: Sequence[Record],
    ratios: Sequence[float] = DEFAULT_RATIOS,
    seed: int = DEFAULT_SEED,
) -> SplitManifest:
    """Per-(language, label) stratum: seeded shuffle, then ratio cut."""
    checked = check_ratios(ratios)
    check_seed(seed)
    strata: dict[tuple[str, int], list[int]] = {}
    for index, record in enumerate(records):
        strata.setdefault((record.language, record.label), []).append(index)
    assignments = [""] * len(records)
    for (language, label), indices in strata.items():
        rng = random.Random(mix_seed(seed, "split-stratified", language, label))
        shuffled = rng.sample(indices, len(indices))
        counts = _cut_points(len(indices), checked)
        cursor = 0
        for name, count in zip(SPLIT_NAMES, counts):
            for index in shuffled[cursor:cursor + count]:
                assignments[index] = name
            cursor += count
    return SplitManifest("stratified", seed, checked, tuple(assignments))


def assign_query_group(seed: int, norm_query: str, ratios: tuple[float, float, float]) -> str:
    """Split for one normalized-query group: seeded 64-bit hash against
    cumulative ratios. Stable across runs, platforms, and record order."""
    u = mix_seed(seed, "split-query", norm_query) / 2**64
    if u < ratios[0]:
        return SPLIT_NAMES[0]
    if u < ratios[0] + ratios[1]:
        return SPLIT_NAMES[1]
    return SPLIT_NAMES[2]


def split_query_disjoint(
    records: Sequence[Record],
    ratios: Sequence[float] = DEFAULT_RATIOS,
    seed: int = DEFAULT_SEED,
) -> SplitManifest:
    """All records sharing a normalized query land in the same split."""
    checked = check_ratios(ratios)
    check_seed(seed)
    group_split: dict[str, str] = {}
    assignments = []
    for record in records:
        key = normalize_text(record.query)
        split = group_split.get(key)
        if split is None:
            split = group_split[key] = assign_query_group(seed, key, checked)
        assignments.append(split)
    return SplitManifest("query-disjoint", seed, checked, tuple(assignments))
