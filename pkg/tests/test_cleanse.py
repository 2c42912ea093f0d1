from __future__ import annotations

import json
import random

import pytest

from relmine import (
    CategoryPath,
    LabelStats,
    QCRecord,
    cleanse,
    dedup,
    filter_numeric,
    is_purely_numeric,
    language_stats,
    load_allowlist,
    remove_conflicts,
)
from relmine.errors import InputError


def qc(query, label=1, path=("Shoes", "Running"), language="en",
       origin="original") -> QCRecord:
    return QCRecord(query, language, CategoryPath(path), label, origin)


# ---------------------------------------------------------------------------
# Conflict removal

def test_conflicting_group_fully_removed():
    records = [qc("shoes", 1), qc("shoes", 0)]
    kept, groups = remove_conflicts(records)
    assert kept == []
    assert len(groups) == 1
    assert len(groups[0].records) == 2


def test_different_targets_do_not_conflict():
    records = [qc("shoes", 1, path=("A",)), qc("shoes", 0, path=("B",))]
    kept, groups = remove_conflicts(records)
    assert kept == records
    assert groups == []


def test_conflict_detection_uses_normalized_key():
    records = [qc("shoes", 1), qc("SHOES ", 0)]
    kept, groups = remove_conflicts(records)
    assert kept == []
    assert len(groups) == 1


def test_conflict_removal_preserves_order_of_survivors():
    records = [qc("a", 1, path=("P1",)), qc("bad", 1), qc("bad", 0),
               qc("b", 0, path=("P2",))]
    kept, _ = remove_conflicts(records)
    assert [r.query for r in kept] == ["a", "b"]


def test_conflict_removal_idempotent():
    records = [qc("a", 1), qc("a", 0), qc("b", 1, path=("X",))]
    once, _ = remove_conflicts(records)
    twice, groups = remove_conflicts(once)
    assert twice == once
    assert groups == []


# ---------------------------------------------------------------------------
# Deduplication

def test_dedup_keeps_first_occurrence():
    records = [qc("shoes"), qc("shoes"), qc("boots", path=("Shoes", "Boots"))]
    assert dedup(records) == [records[0], records[2]]


def test_dedup_ignores_origin():
    records = [qc("shoes", origin="original"), qc("shoes", origin="translated")]
    assert dedup(records) == [records[0]]


def test_dedup_three_copies_plus_distinct():
    records = [qc("shoes"), qc("shoes"), qc("shoes"), qc("hat", path=("Hats",))]
    assert len(dedup(records)) == 2


def test_dedup_idempotent():
    records = [qc("a"), qc("a"), qc("b", path=("X",))]
    assert dedup(dedup(records)) == dedup(records)


# ---------------------------------------------------------------------------
# Numeric filtering

@pytest.mark.parametrize("query,expected", [
    ("12345", True),
    ("3 in 1 charger", False),
    ("12-34", True),
    ("12 34", True),
    ("v100", False),
    ("１２３", True),       # fullwidth digits
    ("٧٨", True),             # Arabic-Indic digits
    ("...", False),                     # punctuation only: no digits left
    ("iphone 13", False),
])
def test_purely_numeric_loose(query, expected):
    assert is_purely_numeric(query) is expected


def test_purely_numeric_strict_mode():
    assert is_purely_numeric("12-34", strict=True) is False
    assert is_purely_numeric("12345", strict=True) is True
    assert is_purely_numeric(" 123 ", strict=True) is True


def test_filter_numeric_respects_allowlist():
    records = [qc("501"), qc("12345"), qc("levi jeans")]
    kept, removed = filter_numeric(records, {"501"}, strict=False)
    assert [r.query for r in kept] == ["501", "levi jeans"]
    assert [r.query for r in removed] == ["12345"]


def test_load_allowlist_normalizes(tmp_path):
    path = tmp_path / "allow.txt"
    path.write_text("  501 \n\n746\n", encoding="utf-8")
    assert load_allowlist(path) == frozenset({"501", "746"})
    with pytest.raises(InputError):
        load_allowlist(tmp_path / "missing.txt")


# ---------------------------------------------------------------------------
# Full pipeline

def test_cleanse_counters_reconcile():
    records = [
        qc("conflicted", 1), qc("conflicted", 0),   # 2 removed as conflict
        qc("dup", 1), qc("dup", 1),                 # 1 removed as duplicate
        qc("12345", 1),                             # numeric, removed
        qc("501", 1),                               # numeric, allowlisted
        qc("plain", 1),
    ]
    result = cleanse(records, allowlist=frozenset({"501"}), strict_numeric=False)
    report = result.report
    assert report.conflicts_removed == 2
    assert report.duplicates_removed == 1
    assert report.numeric_removed == 1
    assert report.allowlisted_kept == 1
    assert report.kept == 3
    assert (report.kept + report.conflicts_removed + report.duplicates_removed
            + report.numeric_removed) == len(records)
    assert [r.query for r in result.kept] == ["dup", "501", "plain"]


def test_cleanse_is_idempotent():
    records = [qc("a", 1), qc("a", 0), qc("b"), qc("b"), qc("99", 0)]
    first = cleanse(records, allowlist=frozenset(), strict_numeric=False)
    second = cleanse(first.kept, allowlist=frozenset(), strict_numeric=False)
    assert tuple(second.kept) == tuple(first.kept)
    assert second.report.conflicts_removed == 0
    assert second.report.duplicates_removed == 0
    assert second.report.numeric_removed == 0


def test_cleanse_report_json_is_stable():
    records = [qc("a")]
    result = cleanse(records, allowlist=frozenset(), strict_numeric=False)
    doc = json.loads(result.report.to_json())
    assert doc == {
        "conflicts_removed": 0, "duplicates_removed": 0,
        "numeric_removed": 0, "allowlisted_kept": 0, "kept": 1,
    }
    assert "\n" not in result.report.to_json()


# ---------------------------------------------------------------------------
# Label statistics

def test_language_stats_counts():
    records = [qc("a", 1), qc("b", 0), qc("c", 1, language="fr")]
    stats = language_stats(records)
    assert stats.positives("en") == 1
    assert stats.negatives("en") == 1
    assert stats.positives("fr") == 1
    assert stats.language_total("fr") == 1
    assert stats.total == 3
    assert stats.total_positives == 2
    assert stats.total_negatives == 1


def test_language_stats_empty():
    stats = language_stats([])
    assert stats.total == 0
    assert stats.counts == {}


def test_language_stats_permutation_invariant():
    records = [qc(f"q{i}", i % 2, language=lang)
               for i, lang in enumerate(["en", "fr", "ja"] * 5)]
    rng = random.Random(3)
    shuffled = rng.sample(records, len(records))
    assert language_stats(shuffled) == language_stats(records)


def test_language_stats_shard_additive():
    records = [qc(f"q{i}", i % 2, language=lang)
               for i, lang in enumerate(["en", "de", "pt", "th"] * 6)]
    merged = language_stats(records[:7]).merge(language_stats(records[7:]))
    assert merged == language_stats(records)


def test_label_stats_serialization():
    stats = language_stats([qc("a", 1), qc("b", 0), qc("c", 1, language="fr")])
    doc = json.loads(stats.to_json())
    assert doc["languages"]["en"] == {"positives": 1, "negatives": 1, "total": 2}
    assert doc["total"] == 3
    assert stats.to_csv() == (
        "language,positives,negatives,total\n"
        "en,1,1,2\n"
        "fr,1,0,1\n"
    )


def test_label_stats_merge_identity():
    stats = language_stats([qc("a")])
    assert stats.merge(LabelStats({})) == stats
