"""Record types, canonical normalization, and TSV parsing/serialization
for query-category (QC) and query-item (QI) corpora.

On-disk format (bit-exact): UTF-8, LF line endings, tab-separated, one
header row. QC columns are ``query  language  category_path  label`` and
QI columns ``query  language  item_id  item_title  label``, each with an
optional trailing ``origin`` column (missing origin defaults to
"original"). A QI file may also omit the item_id column entirely; ingest
then assigns one sequential id per distinct item title, in order of first
appearance.

All types are immutable after construction and safe to share across
concurrent workers.
"""

from __future__ import annotations

import unicodedata
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Union

from .errors import InputError

LANGUAGES: frozenset[str] = frozenset({
    "en", "fr", "ko", "es", "pt", "ja", "th", "de", "it", "pl", "ar", "vi", "id",
})

ORIGIN_ORIGINAL = "original"
ORIGIN_TRANSLATED = "translated"
ORIGIN_GENERATED = "generated-negative"
ORIGINS = (ORIGIN_ORIGINAL, ORIGIN_TRANSLATED, ORIGIN_GENERATED)

TASKS = ("qc", "qi")

# Canonical on-disk path separator. Comma renderings collide with commas
# inside category names; parse() accepts an alternative separator for
# comma-style inputs.
PATH_SEPARATOR = " > "

_QC_COLUMNS = ("query", "language", "category_path", "label")
_QI_COLUMNS = ("query", "language", "item_id", "item_title", "label")
_QI_COLUMNS_NO_ID = ("query", "language", "item_title", "label")


class RecordFileError(InputError):
    """File-level parse failure (unreadable file or unrecognized header)."""


def normalize_text(text: str) -> str:
    """Canonical text normalization: NFC, trim, collapse internal
    whitespace runs to a single space, casefold. Idempotent."""
    collapsed = " ".join(unicodedata.normalize("NFC", text).split())
    return unicodedata.normalize("NFC", collapsed.casefold())


def _check_field(name: str, value: str) -> None:
    if "\t" in value or "\n" in value or "\r" in value:
        raise ValueError(f"{name} must not contain tab or newline characters")


@dataclass(frozen=True)
class CategoryPath:
    """Hierarchical category path; level index 0 is the root (L0)."""

    levels: tuple[str, ...]

    def __post_init__(self) -> None:
        trimmed = tuple(level.strip() for level in self.levels)
        if not trimmed:
            raise ValueError("category path must have at least one level")
        for level in trimmed:
            if not level:
                raise ValueError("category path level is empty")
            if PATH_SEPARATOR in level:
                raise ValueError(
                    f"category path level must not contain {PATH_SEPARATOR!r}"
                )
            _check_field("category path level", level)
        object.__setattr__(self, "levels", trimmed)

    @property
    def depth(self) -> int:
        return len(self.levels)

    def render(self) -> str:
        return PATH_SEPARATOR.join(self.levels)

    @classmethod
    def parse(cls, text: str, separator: str = PATH_SEPARATOR) -> "CategoryPath":
        return cls(tuple(text.split(separator)))

    def __str__(self) -> str:
        return self.render()


def _check_common(query: str, language: str, label: int, origin: str) -> None:
    if not isinstance(query, str) or not query.strip():
        raise ValueError("query is empty")
    _check_field("query", query)
    if language not in LANGUAGES:
        raise ValueError(f"unknown language code {language!r}")
    if isinstance(label, bool) or label not in (0, 1):
        raise ValueError("label must be 0 or 1")
    if origin not in ORIGINS:
        raise ValueError(f"unknown origin {origin!r}")


@dataclass(frozen=True)
class QCRecord:
    """One labeled query-category training example."""

    query: str
    language: str
    path: CategoryPath
    label: int
    origin: str = ORIGIN_ORIGINAL

    def __post_init__(self) -> None:
        _check_common(self.query, self.language, self.label, self.origin)
        if not isinstance(self.path, CategoryPath):
            raise ValueError("path must be a CategoryPath")


@dataclass(frozen=True)
class QIRecord:
    """One labeled query-item training example (item titles are English)."""

    query: str
    language: str
    item_id: str
    item_title: str
    label: int
    origin: str = ORIGIN_ORIGINAL

    def __post_init__(self) -> None:
        _check_common(self.query, self.language, self.label, self.origin)
        if not self.item_id:
            raise ValueError("item_id is empty")
        _check_field("item_id", self.item_id)
        if not self.item_title.strip():
            raise ValueError("item_title is empty")
        _check_field("item_title", self.item_title)


Record = Union[QCRecord, QIRecord]


@dataclass(frozen=True)
class CanonicalKey:
    """Identity used for conflict detection and deduplication.

    norm_query is the normalized query; norm_target is the normalized
    category-path rendering for QC or the verbatim item_id for QI
    (opaque identifiers are never case-folded).
    """

    norm_query: str
    norm_target: str


def canonical_key(record: Record) -> CanonicalKey:
    if isinstance(record, QCRecord):
        target = normalize_text(record.path.render())
    else:
        target = record.item_id
    return CanonicalKey(normalize_text(record.query), target)


@dataclass(frozen=True)
class ParseDiagnostic:
    """One excluded input line: 1-based line number plus the reason."""

    line_number: int
    reason: str


def _check_task(task: str) -> str:
    normalized = task.lower()
    if normalized not in TASKS:
        raise ValueError(f"task must be one of {TASKS}, got {task!r}")
    return normalized


def parse_record_file(
    path: Union[str, Path],
    task: str,
    *,
    path_separator: str = PATH_SEPARATOR,
) -> tuple[list[Record], list[ParseDiagnostic]]:
    """Parse a record TSV file.

    Every well-formed data line yields one record with its original field
    text preserved byte-for-byte; every malformed line yields exactly one
    diagnostic and is excluded, so record count + diagnostic count equals
    the data-line count. File-level problems (unreadable file, unknown
    header) raise RecordFileError instead.
    """
    task = _check_task(task)
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise RecordFileError(f"cannot read record file {path}: {exc}") from exc
    except UnicodeDecodeError as exc:
        raise RecordFileError(f"record file {path} is not valid UTF-8: {exc}") from exc

    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise RecordFileError(f"record file {path} is empty (missing header)")

    header = tuple(lines[0].split("\t"))
    columns, has_origin, has_item_id = _match_header(header, task, path)

    records: list[Record] = []
    diagnostics: list[ParseDiagnostic] = []
    assigned_ids: dict[str, str] = {}
    id_titles: dict[str, str] = {}

    for line_number, line in enumerate(lines[1:], start=2):
        fields = line.split("\t")
        if len(fields) != len(columns):
            diagnostics.append(ParseDiagnostic(
                line_number,
                f"expected {len(columns)} fields, got {len(fields)}",
            ))
            continue
        try:
            record = _build_record(
                task, columns, fields, has_origin, has_item_id,
                path_separator, assigned_ids, id_titles,
            )
        except ValueError as exc:
            diagnostics.append(ParseDiagnostic(line_number, str(exc)))
            continue
        records.append(record)
    return records, diagnostics


def _match_header(
    header: tuple[str, ...], task: str, path: Union[str, Path]
) -> tuple[tuple[str, ...], bool, bool]:
    if task == "qc":
        bases = [(_QC_COLUMNS, True)]
    else:
        bases = [(_QI_COLUMNS, True), (_QI_COLUMNS_NO_ID, False)]
    for base, has_item_id in bases:
        if header == base:
            return base, False, has_item_id
        if header == base + ("origin",):
            return base + ("origin",), True, has_item_id
    raise RecordFileError(
        f"unrecognized {task.upper()} header in {path}: {list(header)}"
    )


def _parse_label(text: str) -> int:
    if text == "0":
        return 0
    if text == "1":
        return 1
    raise ValueError(f"label must be 0 or 1, got {text!r}")


def _build_record(
    task: str,
    columns: tuple[str, ...],
    fields: list[str],
    has_origin: bool,
    has_item_id: bool,
    path_separator: str,
    assigned_ids: dict[str, str],
    id_titles: dict[str, str],
) -> Record:
    row = dict(zip(columns, fields))
    origin = row["origin"] if has_origin else ORIGIN_ORIGINAL
    label = _parse_label(row["label"])
    if task == "qc":
        path = CategoryPath.parse(row["category_path"], path_separator)
        return QCRecord(row["query"], row["language"], path, label, origin)

    title = row["item_title"]
    if has_item_id:
        item_id = row["item_id"]
        if item_id in id_titles and id_titles[item_id] != title:
            raise ValueError(
                f"item_id {item_id!r} already bound to a different item_title"
            )
    else:
        item_id = assigned_ids.get(title, f"item-{len(assigned_ids) + 1}")
    record = QIRecord(row["query"], row["language"], item_id, title, label, origin)
    # Commit id bookkeeping only for lines that produced a record.
    if not has_item_id:
        assigned_ids.setdefault(title, item_id)
    id_titles.setdefault(item_id, title)
    return record


def serialize_records(records: Iterable[Record], task: str) -> str:
    """Render records to the canonical TSV text (always with the origin
    column, LF line endings, " > " path separator)."""
    task = _check_task(task)
    if task == "qc":
        lines = ["\t".join(_QC_COLUMNS + ("origin",))]
        for record in records:
            if not isinstance(record, QCRecord):
                raise ValueError("qc serialization requires QCRecord values")
            lines.append("\t".join((
                record.query, record.language, record.path.render(),
                str(record.label), record.origin,
            )))
    else:
        lines = ["\t".join(_QI_COLUMNS + ("origin",))]
        for record in records:
            if not isinstance(record, QIRecord):
                raise ValueError("qi serialization requires QIRecord values")
            lines.append("\t".join((
                record.query, record.language, record.item_id,
                record.item_title, str(record.label), record.origin,
            )))
    return "\n".join(lines) + "\n"


def write_record_file(path: Union[str, Path], records: Iterable[Record], task: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(serialize_records(records, task))
