"""Item-embedding storage and cosine-similarity negative mining.

Embeddings arrive precomputed in the EMBV1 binary format (little-endian):
magic ``EMBV1\\n``, u32 record count, u32 dimension, then per record a
u8-length language code, a u16-length item id, and d float32 components.
The raw reader/writer round-trip files byte-exactly; the normalizing
loader builds an EmbeddingStore with unit-L2 rows, skipping zero-norm
vectors with a diagnostic and rejecting duplicate ids per language.

Mining rules over a positive query-item record:

* easy — candidate in the same language (excluding the positive item)
  with the MINIMUM cosine similarity to the positive item
* hard — among candidates strictly below the threshold (default 0.7),
  the one with MAXIMUM similarity; equality with the threshold excludes

Ties break toward the lexicographically smallest item_id. The kernel is
blocked brute force: rows of the candidate matrix are widened to float64
per block and hit with one GEMM per (positive block, candidate block),
so every dot product is computed over the full dimension in one call and
results do not depend on block order or worker count.
"""

from __future__ import annotations

import random
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import BinaryIO, Iterable, Mapping, Optional, Sequence

import numpy as np

from .errors import InputError, RelmineError
from .records import (
    ORIGIN_GENERATED,
    CanonicalKey,
    QIRecord,
    canonical_key,
    normalize_text,
)
from .seeding import DEFAULT_SEED, check_seed, mix_seed

EMBV1_MAGIC = b"EMBV1\n"
DEFAULT_HARD_THRESHOLD = 0.7

# Candidate rows widened and multiplied per block of this many rows.
_CAND_BLOCK = 16384
# Positive items processed per work unit; also the GEMM row count.
_POS_BLOCK = 1024


class EmbeddingFormatError(InputError):
    """EMBV1 payload is malformed or internally inconsistent."""


class UnknownItemError(RelmineError):
    """Requested item_id (or language partition) is not in the store."""


class NoCandidatesError(RelmineError):
    """The language partition holds no item besides the positive one."""


class NoCandidatesBelowThresholdError(RelmineError):
    """Candidates exist but none has similarity strictly below the threshold."""


# ---------------------------------------------------------------------------
# Raw EMBV1 I/O (byte-exact, no normalization)

def write_embv1(
    path: str,
    dimension: int,
    entries: Sequence[tuple[str, str, np.ndarray]],
) -> None:
    """Write (language, item_id, vector) entries; vectors cast to float32."""
    if dimension < 1 or dimension > 0xFFFFFFFF:
        raise ValueError(f"dimension must be a positive u32, got {dimension}")
    if len(entries) > 0xFFFFFFFF:
        raise ValueError("too many entries for a u32 record count")
    with open(path, "wb") as fh:
        fh.write(EMBV1_MAGIC)
        fh.write(struct.pack("<II", len(entries), dimension))
        for language, item_id, vector in entries:
            lang_bytes = language.encode("utf-8")
            id_bytes = item_id.encode("utf-8")
            if not 1 <= len(lang_bytes) <= 0xFF:
                raise ValueError(f"language code {language!r} does not fit u8 length")
            if not 1 <= len(id_bytes) <= 0xFFFF:
                raise ValueError(f"item_id {item_id!r} does not fit u16 length")
            array = np.asarray(vector, dtype="<f4")
            if array.shape != (dimension,):
                raise ValueError(
                    f"vector for {item_id!r} has shape {array.shape}, "
                    f"expected ({dimension},)"
                )
            fh.write(struct.pack("<B", len(lang_bytes)))
            fh.write(lang_bytes)
            fh.write(struct.pack("<H", len(id_bytes)))
            fh.write(id_bytes)
            fh.write(array.tobytes())


def _read_exact(fh: BinaryIO, size: int, what: str) -> bytes:
    data = fh.read(size)
    if len(data) != size:
        raise EmbeddingFormatError(f"truncated payload while reading {what}")
    return data


def read_embv1(path: str) -> tuple[int, list[tuple[str, str, np.ndarray]]]:
    """Read an EMBV1 file verbatim: order, duplicates, and zero vectors kept."""
    try:
        fh = open(path, "rb")
    except OSError as exc:
        raise EmbeddingFormatError(f"cannot read {path}: {exc}") from exc
    with fh:
        magic = fh.read(len(EMBV1_MAGIC))
        if magic != EMBV1_MAGIC:
            raise EmbeddingFormatError(f"bad magic {magic!r} in {path}")
        count, dimension = struct.unpack("<II", _read_exact(fh, 8, "header"))
        if dimension < 1:
            raise EmbeddingFormatError("dimension must be positive")
        entries: list[tuple[str, str, np.ndarray]] = []
        for _ in range(count):
            (lang_len,) = struct.unpack("<B", _read_exact(fh, 1, "language length"))
            language = _read_exact(fh, lang_len, "language code").decode("utf-8")
            (id_len,) = struct.unpack("<H", _read_exact(fh, 2, "item_id length"))
            item_id = _read_exact(fh, id_len, "item_id").decode("utf-8")
            payload = _read_exact(fh, 4 * dimension, "vector components")
            entries.append((language, item_id, np.frombuffer(payload, dtype="<f4")))
        if fh.read(1):
            raise EmbeddingFormatError(f"trailing bytes after {count} records in {path}")
    return dimension, entries


# ---------------------------------------------------------------------------
# Normalizing store

@dataclass(frozen=True)
class LoadDiagnostic:
    language: str
    item_id: str
    reason: str


@dataclass(frozen=True)
class _Partition:
    ids: tuple[str, ...]  # sorted, so smaller row index == smaller item_id
    index: Mapping[str, int]
    matrix: np.ndarray  # float32, shape (len(ids), d), unit rows


class EmbeddingStore:
    """Per-language partitions of unit-normalized item vectors."""

    def __init__(
        self,
        dimension: int,
        partitions: Mapping[str, _Partition],
        diagnostics: tuple[LoadDiagnostic, ...] = (),
    ):
        self._dimension = dimension
        self._partitions = dict(partitions)
        self.diagnostics = diagnostics

    @classmethod
    def from_entries(
        cls,
        dimension: int,
        entries: Iterable[tuple[str, str, np.ndarray]],
    ) -> "EmbeddingStore":
        if dimension < 1:
            raise ValueError("dimension must be positive")
        seen: set[tuple[str, str]] = set()
        kept: dict[str, list[tuple[str, np.ndarray]]] = {}
        diagnostics: list[LoadDiagnostic] = []
        for language, item_id, vector in entries:
            if not language:
                raise EmbeddingFormatError("empty language code")
            if not item_id:
                raise EmbeddingFormatError("empty item_id")
            key = (language, item_id)
            if key in seen:
                raise EmbeddingFormatError(
                    f"duplicate item_id {item_id!r} in language {language!r}"
                )
            seen.add(key)
            array = np.asarray(vector, dtype=np.float64)
            if array.shape != (dimension,):
                raise EmbeddingFormatError(
                    f"vector for {item_id!r} has shape {array.shape}, "
                    f"expected ({dimension},)"
                )
            if not np.all(np.isfinite(array)):
                diagnostics.append(LoadDiagnostic(language, item_id, "non-finite vector"))
                continue
            norm = float(np.linalg.norm(array))
            if norm == 0.0:
                diagnostics.append(LoadDiagnostic(language, item_id, "zero-norm vector"))
                continue
            kept.setdefault(language, []).append(
                (item_id, (array / norm).astype(np.float32))
            )
        partitions: dict[str, _Partition] = {}
        for language, rows in kept.items():
            rows.sort(key=lambda pair: pair[0])
            ids = tuple(item_id for item_id, _ in rows)
            matrix = np.stack([vec for _, vec in rows])
            partitions[language] = _Partition(
                ids, {item_id: i for i, item_id in enumerate(ids)}, matrix
            )
        return cls(dimension, partitions, tuple(diagnostics))

    @property
    def dimension(self) -> int:
        return self._dimension

    def languages(self) -> tuple[str, ...]:
        return tuple(sorted(self._partitions))

    def partition_size(self, language: str) -> int:
        return len(self._partition(language).ids)

    def item_ids(self, language: str) -> tuple[str, ...]:
        return self._partition(language).ids

    def vector(self, language: str, item_id: str) -> np.ndarray:
        partition = self._partition(language)
        row = partition.index.get(item_id)
        if row is None:
            raise UnknownItemError(f"item {item_id!r} not in language {language!r}")
        return partition.matrix[row].copy()

    def _partition(self, language: str) -> _Partition:
        partition = self._partitions.get(language)
        if partition is None:
            raise UnknownItemError(f"no embeddings for language {language!r}")
        return partition


def load_embeddings(path: str) -> EmbeddingStore:
    """Load EMBV1, renormalize rows to unit length, report skips."""
    dimension, entries = read_embv1(path)
    return EmbeddingStore.from_entries(dimension, entries)


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    """Dot product of two unit vectors; callers guarantee normalization."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise ValueError(f"dimension mismatch: {u.shape} vs {v.shape}")
    return float(np.dot(u, v))


# ---------------------------------------------------------------------------
# Mining

@dataclass(frozen=True)
class MiningConfig:
    mode: str
    hard_threshold: float = DEFAULT_HARD_THRESHOLD
    seed: int = DEFAULT_SEED
    hard_uniform: bool = False

    def __post_init__(self) -> None:
        if self.mode not in ("easy", "hard"):
            raise ValueError(f"mode must be 'easy' or 'hard', got {self.mode!r}")
        if not 0.0 < self.hard_threshold <= 1.0:
            raise ValueError("hard_threshold must be in (0, 1]")
        check_seed(self.seed)


def _mine_unit(
    partition: _Partition,
    rows: Sequence[int],
    mode: str,
    tau: float,
) -> list[Optional[tuple[int, float]]]:
    """Mine each positive row against the whole partition minus itself.

    Returns (column, similarity) per row, or None when no candidate
    qualifies (hard mode with everything at or above tau).
    """
    matrix = partition.matrix
    n = matrix.shape[0]
    m = len(rows)
    positives = matrix[np.asarray(rows, dtype=np.intp)].astype(np.float64)
    row_array = np.asarray(rows)
    sign = 1.0 if mode == "easy" else -1.0
    # Track sign*value so both modes minimize; exclusions become +inf.
    best_val = np.full(m, np.inf)
    best_col = np.full(m, -1, dtype=np.int64)
    for start in range(0, n, _CAND_BLOCK):
        stop = min(start + _CAND_BLOCK, n)
        sims = positives @ matrix[start:stop].astype(np.float64).T
        if mode == "hard":
            sims[sims >= tau] = -np.inf
        local = row_array - start
        own = (local >= 0) & (local < stop - start)
        sims[np.nonzero(own)[0], local[own]] = sign * np.inf
        keyed = sign * sims
        cols = np.argmin(keyed, axis=1)  # first occurrence == smallest id
        vals = keyed[np.arange(m), cols]
        global_cols = cols + start
        finite = np.isfinite(vals)
        better = finite & (
            (vals < best_val) | ((vals == best_val) & (global_cols < best_col))
        )
        best_val[better] = vals[better]
        best_col[better] = global_cols[better]
    results: list[Optional[tuple[int, float]]] = []
    for i in range(m):
        if best_col[i] < 0:
            results.append(None)
        else:
            results.append((int(best_col[i]), float(sign * best_val[i])))
    return results


def mine_easy(
    positive_item_id: str,
    language: str,
    store: EmbeddingStore,
) -> tuple[str, float]:
    """Least-similar same-language candidate, excluding the positive item."""
    partition = store._partition(language)
    row = partition.index.get(positive_item_id)
    if row is None:
        raise UnknownItemError(f"item {positive_item_id!r} not in language {language!r}")
    if len(partition.ids) < 2:
        raise NoCandidatesError(f"language {language!r} has no other items")
    result = _mine_unit(partition, [row], "easy", 0.0)[0]
    assert result is not None  # easy mode always finds a finite candidate
    col, similarity = result
    return partition.ids[col], similarity


def mine_hard(
    positive_item_id: str,
    language: str,
    store: EmbeddingStore,
    tau: float = DEFAULT_HARD_THRESHOLD,
) -> tuple[str, float]:
    """Most-similar candidate strictly below tau; equality is excluded."""
    if not 0.0 < tau <= 1.0:
        raise ValueError("tau must be in (0, 1]")
    partition = store._partition(language)
    row = partition.index.get(positive_item_id)
    if row is None:
        raise UnknownItemError(f"item {positive_item_id!r} not in language {language!r}")
    if len(partition.ids) < 2:
        raise NoCandidatesError(f"language {language!r} has no other items")
    result = _mine_unit(partition, [row], "hard", tau)[0]
    if result is None:
        raise NoCandidatesBelowThresholdError(
            f"no candidate for {positive_item_id!r} has similarity < {tau}"
        )
    col, similarity = result
    return partition.ids[col], similarity


@dataclass(frozen=True)
class MineDiagnostic:
    record_index: int
    reason: str


@dataclass(frozen=True)
class BatchMineResult:
    negatives: tuple[QIRecord, ...]
    diagnostics: tuple[MineDiagnostic, ...]
    similarities: tuple[float, ...]  # parallel to negatives


def _uniform_hard_choice(
    partition: _Partition,
    row: int,
    tau: float,
    block_counts: np.ndarray,
    ordinal: int,
) -> tuple[int, float]:
    """Locate the ordinal-th below-threshold candidate by rescanning one block."""
    matrix = partition.matrix
    cumulative = 0
    positive = matrix[row].astype(np.float64)
    for block, count in enumerate(block_counts):
        if ordinal < cumulative + count:
            start = block * _CAND_BLOCK
            stop = min(start + _CAND_BLOCK, matrix.shape[0])
            sims = positive @ matrix[start:stop].astype(np.float64).T
            eligible = sims < tau
            if start <= row < stop:
                eligible[row - start] = False
            columns = np.nonzero(eligible)[0]
            col = int(columns[ordinal - cumulative])
            return start + col, float(sims[col])
        cumulative += int(count)
    raise AssertionError("ordinal out of range for eligible-count table")


def _count_below_threshold(
    partition: _Partition,
    rows: Sequence[int],
    tau: float,
) -> np.ndarray:
    """Per (positive row, candidate block) counts of strictly-below-tau candidates."""
    matrix = partition.matrix
    n = matrix.shape[0]
    positives = matrix[np.asarray(rows, dtype=np.intp)].astype(np.float64)
    row_array = np.asarray(rows)
    blocks = (n + _CAND_BLOCK - 1) // _CAND_BLOCK
    counts = np.zeros((len(rows), blocks), dtype=np.int64)
    for block in range(blocks):
        start = block * _CAND_BLOCK
        stop = min(start + _CAND_BLOCK, n)
        sims = positives @ matrix[start:stop].astype(np.float64).T
        eligible = sims < tau
        local = row_array - start
        own = (local >= 0) & (local < stop - start)
        eligible[np.nonzero(own)[0], local[own]] = False
        counts[:, block] = eligible.sum(axis=1)
    return counts


def batch_mine(
    records: Sequence[QIRecord],
    store: EmbeddingStore,
    config: MiningConfig,
    *,
    positives: Optional[set[CanonicalKey]] = None,
    titles: Optional[Mapping[tuple[str, str], str]] = None,
    workers: int = 1,
) -> BatchMineResult:
    """Mine one negative per positive record.

    Per-record failures (unknown item, no candidates, collision with an
    existing positive pair) become diagnostics, never exceptions. Output
    is ordered by source-record index whatever the worker count. The
    collision guard checks `positives` (defaulting to the batch's own
    keys); mined items take their title from `titles`, falling back to
    titles seen in the input records, then to the item_id itself.
    """
    if workers < 1:
        raise ValueError("workers must be positive")
    for record in records:
        if record.label != 1:
            raise ValueError("batch_mine requires positive (label 1) records")

    positive_keys = (
        positives if positives is not None
        else {canonical_key(record) for record in records}
    )
    known_titles: dict[tuple[str, str], str] = {}
    for record in records:
        known_titles.setdefault((record.language, record.item_id), record.item_title)
    if titles:
        known_titles.update(titles)

    # One mining result per unique (language, item); records share them.
    unique_items: dict[str, list[str]] = {}
    for record in records:
        items = unique_items.setdefault(record.language, [])
        if record.item_id not in items:
            items.append(record.item_id)

    item_results: dict[tuple[str, str], tuple[Optional[tuple[str, float]], str]] = {}
    units: list[tuple[str, list[str], list[int]]] = []
    for language, items in unique_items.items():
        try:
            partition = store._partition(language)
        except UnknownItemError as exc:
            for item_id in items:
                item_results[(language, item_id)] = (None, str(exc))
            continue
        minable: list[tuple[str, int]] = []
        for item_id in items:
            row = partition.index.get(item_id)
            if row is None:
                item_results[(language, item_id)] = (
                    None, f"item {item_id!r} not in language {language!r}",
                )
            elif len(partition.ids) < 2:
                item_results[(language, item_id)] = (
                    None, f"language {language!r} has no other items",
                )
            else:
                minable.append((item_id, row))
        for start in range(0, len(minable), _POS_BLOCK):
            chunk = minable[start:start + _POS_BLOCK]
            units.append((
                language,
                [item_id for item_id, _ in chunk],
                [row for _, row in chunk],
            ))

    def run_unit(unit: tuple[str, list[str], list[int]]) -> list[tuple[tuple[str, str], tuple]]:
        language, item_ids, rows = unit
        partition = store._partition(language)
        out: list[tuple[tuple[str, str], tuple]] = []
        if config.mode == "hard" and config.hard_uniform:
            counts = _count_below_threshold(partition, rows, config.hard_threshold)
            for i, item_id in enumerate(item_ids):
                total = int(counts[i].sum())
                out.append(((language, item_id), ("uniform", rows[i], counts[i], total)))
            return out
        mined = _mine_unit(partition, rows, config.mode, config.hard_threshold)
        for item_id, result in zip(item_ids, mined):
            if result is None:
                out.append(((language, item_id), ("fail",
                    f"no candidate for {item_id!r} has similarity < {config.hard_threshold}")))
            else:
                col, similarity = result
                out.append(((language, item_id), ("ok", partition.ids[col], similarity)))
        return out

    if workers == 1 or len(units) <= 1:
        unit_outputs = [run_unit(unit) for unit in units]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            unit_outputs = list(pool.map(run_unit, units))
    mined_results: dict[tuple[str, str], tuple] = {}
    for output in unit_outputs:
        mined_results.update(output)

    negatives: list[QIRecord] = []
    diagnostics: list[MineDiagnostic] = []
    similarities: list[float] = []
    for index, record in enumerate(records):
        key = (record.language, record.item_id)
        if key in item_results:
            diagnostics.append(MineDiagnostic(index, item_results[key][1]))
            continue
        outcome = mined_results[key]
        if outcome[0] == "fail":
            diagnostics.append(MineDiagnostic(index, outcome[1]))
            continue
        if outcome[0] == "uniform":
            _, row, block_counts, total = outcome
            if total == 0:
                diagnostics.append(MineDiagnostic(
                    index,
                    f"no candidate for {record.item_id!r} has similarity "
                    f"< {config.hard_threshold}",
                ))
                continue
            rng = random.Random(mix_seed(config.seed, "mine-hard-uniform", index))
            partition = store._partition(record.language)
            col, similarity = _uniform_hard_choice(
                partition, row, config.hard_threshold, block_counts,
                rng.randrange(total),
            )
            mined_id = partition.ids[col]
        else:
            _, mined_id, similarity = outcome
        if CanonicalKey(normalize_text(record.query), mined_id) in positive_keys:
            diagnostics.append(MineDiagnostic(
                index,
                f"mined item {mined_id!r} forms a positive pair with this query",
            ))
            continue
        title = known_titles.get((record.language, mined_id), mined_id)
        negatives.append(replace(
            record,
            item_id=mined_id,
            item_title=title,
            label=0,
            origin=ORIGIN_GENERATED,
        ))
        similarities.append(similarity)
    return BatchMineResult(tuple(negatives), tuple(diagnostics), tuple(similarities))
