"""Translation-based augmentation: quota planning and batched execution.

Planning picks source records per target language (a seeded uniform
sample of size min(quota, eligible pool), label mix proportional to the
pool within one record per label). QC sources are records whose category
path also occurs in the development set, any language; QI sources are
English records only. Execution translates queries in batches through a
pluggable Translator, keeping the target field (path or item) and label
byte-identical to the source.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, replace
from typing import Iterable, Mapping, Optional, Protocol, Sequence, Union

import requests

from .errors import InputError, RelmineError
from .records import (
    LANGUAGES,
    ORIGIN_TRANSLATED,
    CategoryPath,
    QCRecord,
    QIRecord,
)
from .seeding import DEFAULT_SEED, check_seed, mix_seed

QC_DEFAULT_TARGETS = ("ar", "de", "it", "pl")
QC_DEFAULT_QUOTA = 42_000
QI_DEFAULT_TARGETS = ("ar", "de", "id", "it", "pl", "vi")
QI_DEFAULT_QUOTA = 50_000

Record = Union[QCRecord, QIRecord]


class EmptyEligiblePoolError(InputError):
    """No source record qualifies for augmentation."""


class TranslatorError(RelmineError):
    """A single translate call failed; the batch may be retried."""


class TranslatorUnavailableError(RelmineError):
    """Every batch failed after retries; the translator is unreachable."""


class Translator(Protocol):
    def translate(self, texts: Sequence[str], source_lang: str, target_lang: str) -> list[str]:
        ...


@dataclass(frozen=True)
class StubTranslator:
    """Deterministic offline translator: prefixes the target language tag."""

    def translate(self, texts: Sequence[str], source_lang: str, target_lang: str) -> list[str]:
        return [f"[{target_lang}] {text}" for text in texts]


class HttpTranslator:
    """Client for the POST /translate wire contract.

    Request JSON {"source_lang", "target_lang", "texts"}; response JSON
    {"texts"} of equal length. Any non-200 status, transport error, or
    malformed body raises TranslatorError (one batch failure).
    """

    def __init__(
        self,
        base_url: str,
        *,
        timeout: float = 30.0,
        session: Optional[requests.Session] = None,
    ):
        self._url = base_url.rstrip("/") + "/translate"
        self._timeout = timeout
        self._session = session if session is not None else requests.Session()

    def translate(self, texts: Sequence[str], source_lang: str, target_lang: str) -> list[str]:
        payload = {
            "source_lang": source_lang,
            "target_lang": target_lang,
            "texts": list(texts),
        }
        try:
            response = self._session.post(self._url, json=payload, timeout=self._timeout)
        except requests.RequestException as exc:
            raise TranslatorError(f"translate request failed: {exc}") from exc
        if response.status_code != 200:
            raise TranslatorError(f"translate returned status {response.status_code}")
        try:
            body = response.json()
        except ValueError as exc:
            raise TranslatorError("translate returned non-JSON body") from exc
        translated = body.get("texts") if isinstance(body, dict) else None
        if not isinstance(translated, list) or len(translated) != len(texts):
            raise TranslatorError("translate response length does not match request")
        if not all(isinstance(text, str) for text in translated):
            raise TranslatorError("translate response contains non-string entries")
        return translated


@dataclass(frozen=True)
class PlannedEntry:
    source_index: int
    record: Record


@dataclass(frozen=True)
class TranslationPlan:
    task: str
    seed: int
    quota: int
    entries: Mapping[str, tuple[PlannedEntry, ...]]  # target language -> sources

    def __post_init__(self) -> None:
        if self.task not in ("qc", "qi"):
            raise ValueError(f"task must be 'qc' or 'qi', got {self.task!r}")
        check_seed(self.seed)
        if self.quota < 1:
            raise ValueError("quota must be positive")
        for target, planned in self.entries.items():
            if target not in LANGUAGES:
                raise ValueError(f"unknown target language {target!r}")
            indices = [entry.source_index for entry in planned]
            if len(set(indices)) != len(indices):
                raise ValueError(f"source planned twice for target {target!r}")

    def targets(self) -> tuple[str, ...]:
        return tuple(sorted(self.entries))

    def per_language_counts(self) -> dict[str, int]:
        return {target: len(self.entries[target]) for target in self.targets()}

    def total(self) -> int:
        return sum(len(planned) for planned in self.entries.values())

    def to_json(self) -> str:
        """Audit form: source indices only, resolvable against the train file."""
        doc = {
            "task": self.task,
            "seed": self.seed,
            "quota": self.quota,
            "entries": {
                target: [entry.source_index for entry in self.entries[target]]
                for target in self.targets()
            },
        }
        return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def plan_from_json(text: str, records: Sequence[Record]) -> TranslationPlan:
    """Rebuild a plan from its audit JSON plus the train records it indexed."""
    try:
        doc = json.loads(text)
        task = doc["task"]
        seed = doc["seed"]
        quota = doc["quota"]
        raw_entries = doc["entries"]
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise InputError(f"malformed plan JSON: {exc}") from exc
    entries: dict[str, tuple[PlannedEntry, ...]] = {}
    for target, indices in raw_entries.items():
        planned = []
        for index in indices:
            if not isinstance(index, int) or not 0 <= index < len(records):
                raise InputError(f"plan references invalid source index {index!r}")
            planned.append(PlannedEntry(index, records[index]))
        entries[target] = tuple(planned)
    try:
        return TranslationPlan(task, seed, quota, entries)
    except ValueError as exc:
        raise InputError(f"invalid plan: {exc}") from exc


def _allocate_proportional(total: int, pool_sizes: Sequence[int]) -> list[int]:
    """Integer allocation proportional to pool sizes, deviation < 1 per part.

    Largest-remainder method; ties go to the earlier part.
    """
    grand = sum(pool_sizes)
    exact = [total * size / grand for size in pool_sizes]
    counts = [int(e) for e in exact]
    remainders = sorted(
        range(len(exact)),
        key=lambda i: (-(exact[i] - counts[i]), i),
    )
    for i in remainders[: total - sum(counts)]:
        counts[i] += 1
    return counts


def _plan(
    task: str,
    eligible: Sequence[tuple[int, Record]],
    targets: Sequence[str],
    quota: int,
    seed: int,
) -> TranslationPlan:
    if not targets:
        raise ValueError("at least one target language is required")
    if len(set(targets)) != len(targets):
        raise ValueError("duplicate target language")
    positives = [(i, r) for i, r in eligible if r.label == 1]
    negatives = [(i, r) for i, r in eligible if r.label == 0]
    sample_size = min(quota, len(eligible))
    pools = [pool for pool in (positives, negatives) if pool]
    takes = _allocate_proportional(sample_size, [len(pool) for pool in pools])
    entries: dict[str, tuple[PlannedEntry, ...]] = {}
    for target in sorted(targets):
        rng = random.Random(mix_seed(seed, "augment", task, target))
        chosen: list[tuple[int, Record]] = []
        for pool, take in zip(pools, takes):
            chosen.extend(rng.sample(pool, take))
        chosen.sort(key=lambda pair: pair[0])
        entries[target] = tuple(PlannedEntry(i, r) for i, r in chosen)
    return TranslationPlan(task, seed, quota, entries)


def plan_qc_augmentation(
    train: Sequence[QCRecord],
    dev_paths: set[CategoryPath],
    targets: Sequence[str] = QC_DEFAULT_TARGETS,
    quota: int = QC_DEFAULT_QUOTA,
    seed: int = DEFAULT_SEED,
) -> TranslationPlan:
    """Sources: train records whose category path occurs in the dev set."""
    check_seed(seed)
    if quota < 1:
        raise ValueError("quota must be positive")
    eligible = [(i, r) for i, r in enumerate(train) if r.path in dev_paths]
    if not eligible:
        raise EmptyEligiblePoolError("no train record's path occurs in the dev set")
    return _plan("qc", eligible, targets, quota, seed)


def plan_qi_augmentation(
    train: Sequence[QIRecord],
    targets: Sequence[str] = QI_DEFAULT_TARGETS,
    quota: int = QI_DEFAULT_QUOTA,
    seed: int = DEFAULT_SEED,
) -> TranslationPlan:
    """Sources: English train records only."""
    check_seed(seed)
    if quota < 1:
        raise ValueError("quota must be positive")
    eligible = [(i, r) for i, r in enumerate(train) if r.language == "en"]
    if not eligible:
        raise EmptyEligiblePoolError("train contains no English records")
    return _plan("qi", eligible, targets, quota, seed)


@dataclass(frozen=True)
class TranslationDiagnostic:
    target_language: str
    source_index: int
    reason: str


def dev_paths(records: Iterable[QCRecord]) -> set[CategoryPath]:
    return {record.path for record in records}


def execute_plan(
    plan: TranslationPlan,
    translator: Translator,
    *,
    batch_size: int = 64,
    retries: int = 3,
) -> tuple[list[Record], list[TranslationDiagnostic]]:
    """Translate planned queries; target field and label stay untouched.

    Batches share (source language, target language). A failed batch is
    retried up to `retries` more times, then every entry in it becomes a
    diagnostic. If no batch at all succeeds, the translator is considered
    unreachable and TranslatorUnavailableError is raised instead.
    """
    if batch_size < 1:
        raise ValueError("batch_size must be positive")
    if retries < 0:
        raise ValueError("retries must be non-negative")
    batches: list[tuple[str, str, list[PlannedEntry]]] = []
    for target in plan.targets():
        by_source_lang: dict[str, list[PlannedEntry]] = {}
        for entry in plan.entries[target]:
            by_source_lang.setdefault(entry.record.language, []).append(entry)
        for source_lang in sorted(by_source_lang):
            group = by_source_lang[source_lang]
            for start in range(0, len(group), batch_size):
                batches.append((source_lang, target, group[start:start + batch_size]))

    augmented: list[Record] = []
    diagnostics: list[TranslationDiagnostic] = []
    succeeded = 0
    for source_lang, target, batch in batches:
        texts = [entry.record.query for entry in batch]
        translated: Optional[list[str]] = None
        failure = "translator failed"
        for _ in range(retries + 1):
            try:
                result = translator.translate(texts, source_lang, target)
            except TranslatorError as exc:
                failure = str(exc)
                continue
            if len(result) != len(texts):
                failure = "translator returned a different number of texts"
                continue
            translated = result
            break
        if translated is None:
            diagnostics.extend(
                TranslationDiagnostic(target, entry.source_index, failure)
                for entry in batch
            )
            continue
        succeeded += 1
        for entry, text in zip(batch, translated):
            try:
                augmented.append(replace(
                    entry.record,
                    query=text,
                    language=target,
                    origin=ORIGIN_TRANSLATED,
                ))
            except ValueError as exc:
                diagnostics.append(TranslationDiagnostic(
                    target, entry.source_index,
                    f"translated text rejected: {exc}",
                ))
    if batches and succeeded == 0:
        raise TranslatorUnavailableError(
            f"all {len(batches)} translation batches failed; last reason: "
            + diagnostics[-1].reason
        )
    return augmented, diagnostics
