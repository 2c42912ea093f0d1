"""Category taxonomy construction and QC negative generation.

The tree is built from observed category paths only: a node is an
"observed leaf" iff some record's full path terminates there. Negative
generation rewrites a positive record's path (or query) and guards the
result against exact collisions with the known positive set:

* same-l1       — any other observed leaf under the record's level-1 node
* sibling-leaf  — an observed leaf sharing all but the final level
* cross-root    — an observed leaf under a different root (L0)
* synthetic-query — keep the path, replace the query via a QueryGenerator

Generation is a pure function of (record, tree, positives, seed); batch
runs mix the seed with each record's index, never with worker identity.
"""

from __future__ import annotations

import json
import random
import subprocess
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional, Protocol, Sequence

from .errors import RelmineError
from .records import (
    ORIGIN_GENERATED,
    CanonicalKey,
    CategoryPath,
    QCRecord,
    canonical_key,
    normalize_text,
)
from .seeding import DEFAULT_SEED, check_seed, mix_seed

STRATEGIES = ("same-l1", "sibling-leaf", "cross-root", "synthetic-query")


class NoAlternativeError(RelmineError):
    """The strategy's sampling set for this record is empty."""


class CollisionExhaustedError(RelmineError):
    """Every resample collided with the positive set (or original query)."""


class GeneratorUnavailableError(RelmineError):
    """The synthetic-query generator cannot be reached."""


@dataclass(frozen=True)
class NegativeGenConfig:
    strategy: str
    seed: int = DEFAULT_SEED
    max_resamples: int = 16

    def __post_init__(self) -> None:
        if self.strategy not in STRATEGIES:
            raise ValueError(f"strategy must be one of {STRATEGIES}, got {self.strategy!r}")
        check_seed(self.seed)
        if self.max_resamples < 1:
            raise ValueError("max_resamples must be positive")


@dataclass
class TaxonomyNode:
    name: str
    path: CategoryPath
    children: dict[str, "TaxonomyNode"] = field(default_factory=dict)
    observed_leaf: bool = False


class TaxonomyTree:
    """Immutable-after-build forest of category nodes."""

    def __init__(self) -> None:
        self.roots: dict[str, TaxonomyNode] = {}
        self._observed: set[tuple[str, ...]] = set()
        self._sorted_leaves: tuple[CategoryPath, ...] = ()

    def _insert(self, path: CategoryPath) -> None:
        level_name = path.levels[0]
        node = self.roots.get(level_name)
        if node is None:
            node = self.roots[level_name] = TaxonomyNode(level_name, CategoryPath((level_name,)))
        for depth in range(1, path.depth):
            level_name = path.levels[depth]
            child = node.children.get(level_name)
            if child is None:
                child = TaxonomyNode(level_name, CategoryPath(path.levels[: depth + 1]))
                node.children[level_name] = child
            node = child
        node.observed_leaf = True
        self._observed.add(path.levels)

    def _finalize(self) -> None:
        self._sorted_leaves = tuple(
            CategoryPath(levels) for levels in sorted(self._observed)
        )

    @property
    def root_count(self) -> int:
        return len(self.roots)

    def contains(self, path: CategoryPath) -> bool:
        """True iff `path` is an observed full path."""
        return path.levels in self._observed

    def observed_leaves(self) -> tuple[CategoryPath, ...]:
        return self._sorted_leaves

    def leaves_with_prefix(self, prefix: tuple[str, ...]) -> list[CategoryPath]:
        return [p for p in self._sorted_leaves if p.levels[: len(prefix)] == prefix]

    def to_json(self) -> str:
        def render(node: TaxonomyNode) -> dict:
            return {
                "name": node.name,
                "observed_leaf": node.observed_leaf,
                "children": [render(node.children[k]) for k in sorted(node.children)],
            }

        forest = [render(self.roots[k]) for k in sorted(self.roots)]
        return json.dumps({"roots": forest}, sort_keys=True, indent=2) + "\n"


def build_taxonomy(paths: Iterable[CategoryPath]) -> TaxonomyTree:
    """Build the observed-path forest; duplicate paths collapse."""
    tree = TaxonomyTree()
    count = 0
    for path in paths:
        tree._insert(path)
        count += 1
    if count == 0:
        raise ValueError("cannot build a taxonomy from zero paths")
    tree._finalize()
    return tree


def _record_rng(config: NegativeGenConfig, record_index: int) -> random.Random:
    return random.Random(mix_seed(config.seed, "neg-gen", record_index))


def _check_source(record: QCRecord, tree: TaxonomyTree) -> None:
    if record.label != 1:
        raise ValueError("negative generation requires a positive (label 1) record")
    if record.path.depth < 2:
        raise ValueError("negative generation requires path depth >= 2")
    if not tree.contains(record.path):
        raise ValueError(f"record path {record.path.render()!r} is not in the taxonomy")


def _sample_guarded(
    record: QCRecord,
    candidates: Sequence[CategoryPath],
    positives: set[CanonicalKey],
    rng: random.Random,
    max_resamples: int,
) -> QCRecord:
    if not candidates:
        raise NoAlternativeError(
            f"no alternative path for {record.path.render()!r}"
        )
    norm_query = normalize_text(record.query)
    for _ in range(max_resamples):
        candidate = candidates[rng.randrange(len(candidates))]
        key = CanonicalKey(norm_query, normalize_text(candidate.render()))
        if key in positives:
            continue
        return replace(record, path=candidate, label=0, origin=ORIGIN_GENERATED)
    raise CollisionExhaustedError(
        f"all {max_resamples} resamples for {record.query!r} hit the positive set"
    )


def gen_neg_same_l1(
    record: QCRecord,
    tree: TaxonomyTree,
    positives: set[CanonicalKey],
    config: NegativeGenConfig,
    *,
    record_index: int = 0,
) -> QCRecord:
    """Replace the path with another observed leaf under the same L1 node."""
    _check_source(record, tree)
    candidates = [
        p for p in tree.leaves_with_prefix(record.path.levels[:2])
        if p.levels != record.path.levels
    ]
    return _sample_guarded(
        record, candidates, positives, _record_rng(config, record_index),
        config.max_resamples,
    )


def gen_neg_sibling_leaf(
    record: QCRecord,
    tree: TaxonomyTree,
    positives: set[CanonicalKey],
    config: NegativeGenConfig,
    *,
    record_index: int = 0,
) -> QCRecord:
    """Replace only the final level: same parent, different observed-leaf child."""
    _check_source(record, tree)
    prefix = record.path.levels[:-1]
    candidates = [
        p for p in tree.leaves_with_prefix(prefix)
        if p.depth == record.path.depth and p.levels[-1] != record.path.levels[-1]
    ]
    return _sample_guarded(
        record, candidates, positives, _record_rng(config, record_index),
        config.max_resamples,
    )


def gen_neg_cross_root(
    record: QCRecord,
    tree: TaxonomyTree,
    positives: set[CanonicalKey],
    config: NegativeGenConfig,
    *,
    record_index: int = 0,
) -> QCRecord:
    """Replace the path with an observed leaf under a different root."""
    _check_source(record, tree)
    if tree.root_count < 2:
        raise NoAlternativeError("taxonomy has a single root")
    candidates = [
        p for p in tree.observed_leaves() if p.levels[0] != record.path.levels[0]
    ]
    return _sample_guarded(
        record, candidates, positives, _record_rng(config, record_index),
        config.max_resamples,
    )


class QueryGenerator(Protocol):
    """Produces a replacement query for (query, language, path)."""

    def generate(self, query: str, language: str, path: CategoryPath) -> str:
        ...


@dataclass(frozen=True)
class StubQueryGenerator:
    """Deterministic token-perturbation stub used in tests and offline runs."""

    suffix: str = "unrelated-token"

    def generate(self, query: str, language: str, path: CategoryPath) -> str:
        return f"{query} {self.suffix}"


class SubprocessQueryGenerator:
    """Client for out-of-process generators speaking newline-delimited JSON
    over stdin/stdout: request {"query","language","path"}, response {"query"}.
    The path travels as its canonical rendering."""

    def __init__(self, argv: Sequence[str]):
        try:
            self._proc = subprocess.Popen(
                list(argv),
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                encoding="utf-8",
            )
        except OSError as exc:
            raise GeneratorUnavailableError(f"cannot start generator {argv!r}: {exc}") from exc

    def generate(self, query: str, language: str, path: CategoryPath) -> str:
        request = json.dumps(
            {"query": query, "language": language, "path": path.render()},
            ensure_ascii=False,
        )
        try:
            assert self._proc.stdin is not None and self._proc.stdout is not None
            self._proc.stdin.write(request + "\n")
            self._proc.stdin.flush()
            line = self._proc.stdout.readline()
        except (OSError, ValueError) as exc:
            raise GeneratorUnavailableError(f"generator pipe failed: {exc}") from exc
        if not line:
            raise GeneratorUnavailableError("generator closed its output stream")
        try:
            return json.loads(line)["query"]
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise GeneratorUnavailableError(f"bad generator response {line!r}") from exc

    def close(self) -> None:
        if self._proc.stdin:
            self._proc.stdin.close()
        self._proc.wait(timeout=10)

    def __enter__(self) -> "SubprocessQueryGenerator":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()


def gen_neg_synthetic_query(
    record: QCRecord,
    generator: QueryGenerator,
    positives: set[CanonicalKey],
    *,
    max_resamples: int = 16,
) -> QCRecord:
    """Keep the path, replace the query with generator output.

    Candidates equal to the original query (normalized) or colliding with
    the positive set are rejected and re-requested.
    """
    if record.label != 1:
        raise ValueError("negative generation requires a positive (label 1) record")
    norm_original = normalize_text(record.query)
    norm_path = normalize_text(record.path.render())
    for _ in range(max_resamples):
        candidate = generator.generate(record.query, record.language, record.path)
        if not candidate or not candidate.strip():
            continue
        norm_candidate = normalize_text(candidate)
        if norm_candidate == norm_original:
            continue
        if CanonicalKey(norm_candidate, norm_path) in positives:
            continue
        return replace(record, query=candidate, label=0, origin=ORIGIN_GENERATED)
    raise CollisionExhaustedError(
        f"generator produced no usable negative query for {record.query!r} "
        f"in {max_resamples} attempts"
    )


@dataclass(frozen=True)
class GenDiagnostic:
    record_index: int
    reason: str


_STRATEGY_FUNCS = {
    "same-l1": gen_neg_same_l1,
    "sibling-leaf": gen_neg_sibling_leaf,
    "cross-root": gen_neg_cross_root,
}


def batch_generate(
    records: Sequence[QCRecord],
    tree: Optional[TaxonomyTree],
    positives: set[CanonicalKey],
    config: NegativeGenConfig,
    generator: Optional[QueryGenerator] = None,
) -> tuple[list[QCRecord], list[GenDiagnostic]]:
    """Generate one negative per eligible positive record.

    Records that are not eligible (label 0, shallow path) or for which the
    strategy fails (NoAlternative, CollisionExhausted) become diagnostics.
    Output order follows input order.
    """
    if config.strategy != "synthetic-query" and tree is None:
        raise ValueError(f"strategy {config.strategy!r} requires a taxonomy tree")
    negatives: list[QCRecord] = []
    diagnostics: list[GenDiagnostic] = []
    for index, record in enumerate(records):
        if record.label != 1:
            diagnostics.append(GenDiagnostic(index, "not a positive record"))
            continue
        try:
            if config.strategy == "synthetic-query":
                if generator is None:
                    raise GeneratorUnavailableError("no query generator configured")
                negative = gen_neg_synthetic_query(
                    record, generator, positives,
                    max_resamples=config.max_resamples,
                )
            else:
                negative = _STRATEGY_FUNCS[config.strategy](
                    record, tree, positives, config, record_index=index,
                )
        except GeneratorUnavailableError:
            raise
        except (RelmineError, ValueError) as exc:
            diagnostics.append(GenDiagnostic(index, str(exc)))
            continue
        negatives.append(negative)
    return negatives, diagnostics
