from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from relmine import (
    LANGUAGES,
    ORIGIN_GENERATED,
    ORIGIN_ORIGINAL,
    ORIGIN_TRANSLATED,
    CanonicalKey,
    CategoryPath,
    QCRecord,
    QIRecord,
    RecordFileError,
    canonical_key,
    normalize_text,
    parse_record_file,
    serialize_records,
    write_record_file,
)


def make_qc(query="wireless headphones", language="en",
            levels=("Electronics", "Audio", "Headphones"),
            label=1, origin=ORIGIN_ORIGINAL) -> QCRecord:
    return QCRecord(query, language, CategoryPath(levels), label, origin)


def make_qi(query="usb c cable", language="en", item_id="B0001",
            item_title="USB-C Cable 2m", label=1,
            origin=ORIGIN_ORIGINAL) -> QIRecord:
    return QIRecord(query, language, item_id, item_title, label, origin)


# ---------------------------------------------------------------------------
# normalize_text

def test_normalize_collapses_case_and_whitespace():
    assert normalize_text("  Wireless\t HEADPHONES \n") == "wireless headphones"


def test_normalize_applies_nfc():
    # e + combining acute composes to the single code point.
    assert normalize_text("café") == "café"


def test_normalize_handles_nonlatin():
    assert normalize_text("STRASSE") == "strasse"  # casefold, not lower
    assert normalize_text("İstanbul") != "istanbul"  # dotted capital I


@settings(max_examples=100)
@given(st.text(max_size=40))
def test_normalize_is_idempotent(text):
    once = normalize_text(text)
    assert normalize_text(once) == once


# ---------------------------------------------------------------------------
# CategoryPath

def test_path_trims_and_renders():
    path = CategoryPath((" Electronics ", "Audio"))
    assert path.levels == ("Electronics", "Audio")
    assert path.render() == "Electronics > Audio"
    assert path.depth == 2
    assert str(path) == path.render()


def test_path_parse_roundtrip():
    path = CategoryPath.parse("Home > Kitchen > Cookware")
    assert path.levels == ("Home", "Kitchen", "Cookware")
    assert CategoryPath.parse(path.render()) == path


def test_path_parse_alternate_separator():
    path = CategoryPath.parse("Home, Kitchen, Cookware", ", ")
    assert path.levels == ("Home", "Kitchen", "Cookware")


def test_path_rejects_empty_and_separator_levels():
    with pytest.raises(ValueError):
        CategoryPath(())
    with pytest.raises(ValueError):
        CategoryPath(("Electronics", " "))
    with pytest.raises(ValueError):
        CategoryPath(("Audio > Video",))


def test_path_levels_may_contain_commas():
    path = CategoryPath(("Home", "Pots, Pans & More"))
    assert CategoryPath.parse(path.render()) == path


# ---------------------------------------------------------------------------
# Record validation

def test_qc_record_fields():
    record = make_qc()
    assert record.label == 1
    assert record.path.depth == 3


@pytest.mark.parametrize("kwargs", [
    {"query": ""},
    {"query": "   "},
    {"query": "a\tb"},
    {"language": "xx"},
    {"language": "EN"},
    {"label": 2},
    {"label": True},
    {"origin": "copied"},
])
def test_qc_record_rejects_bad_fields(kwargs):
    with pytest.raises(ValueError):
        make_qc(**kwargs)


@pytest.mark.parametrize("kwargs", [
    {"item_id": ""},
    {"item_id": "a\tb"},
    {"item_title": ""},
    {"label": -1},
])
def test_qi_record_rejects_bad_fields(kwargs):
    with pytest.raises(ValueError):
        make_qi(**kwargs)


def test_known_languages_are_closed_set():
    assert LANGUAGES == frozenset({
        "en", "fr", "ko", "es", "pt", "ja", "th",
        "de", "it", "pl", "ar", "vi", "id",
    })


# ---------------------------------------------------------------------------
# Canonical keys

def test_canonical_key_qc_normalizes_query_and_path():
    a = canonical_key(make_qc(query="TV  Stand", levels=("Furniture", "TV Stands")))
    b = canonical_key(make_qc(query="tv stand", levels=("furniture", "tv stands")))
    assert a == b == CanonicalKey("tv stand", "furniture > tv stands")


def test_canonical_key_qi_keeps_item_id_verbatim():
    a = canonical_key(make_qi(query="USB Cable", item_id="B01-X"))
    assert a == CanonicalKey("usb cable", "B01-X")
    # Item ids are opaque: case differences mean different items.
    b = canonical_key(make_qi(query="usb cable", item_id="b01-x"))
    assert a != b


def test_canonical_key_ignores_label_and_origin():
    a = canonical_key(make_qc(label=1, origin=ORIGIN_ORIGINAL))
    b = canonical_key(make_qc(label=0, origin=ORIGIN_GENERATED))
    assert a == b


# ---------------------------------------------------------------------------
# Parsing

def test_parse_qc_file(tmp_path):
    path = tmp_path / "qc.tsv"
    path.write_text(
        "query\tlanguage\tcategory_path\tlabel\n"
        "tv stand\ten\tFurniture > Living Room > TV Stands\t1\n"
        "smartphone\tfr\tElectronics > Phones\t0\n",
        encoding="utf-8",
    )
    records, diagnostics = parse_record_file(path, "qc")
    assert diagnostics == []
    assert len(records) == 2
    assert records[0].path.levels == ("Furniture", "Living Room", "TV Stands")
    assert records[0].origin == ORIGIN_ORIGINAL
    assert records[1].label == 0


def test_parse_accepts_origin_column(tmp_path):
    path = tmp_path / "qc.tsv"
    path.write_text(
        "query\tlanguage\tcategory_path\tlabel\torigin\n"
        "tv stand\ten\tFurniture\t1\ttranslated\n",
        encoding="utf-8",
    )
    records, _ = parse_record_file(path, "qc")
    assert records[0].origin == ORIGIN_TRANSLATED


def test_parse_alternate_path_separator(tmp_path):
    path = tmp_path / "qc.tsv"
    path.write_text(
        "query\tlanguage\tcategory_path\tlabel\n"
        "pan\ten\tHome, Kitchen, Cookware\t1\n",
        encoding="utf-8",
    )
    records, _ = parse_record_file(path, "qc", path_separator=", ")
    assert records[0].path.levels == ("Home", "Kitchen", "Cookware")


def test_parse_diagnostics_account_for_every_line(tmp_path):
    path = tmp_path / "qc.tsv"
    path.write_text(
        "query\tlanguage\tcategory_path\tlabel\n"
        "good\ten\tA > B\t1\n"
        "bad label\ten\tA > B\t2\n"
        "bad\tcolumns\n"
        "\ten\tA > B\t0\n"
        "good again\tja\tA\t0\n",
        encoding="utf-8",
    )
    records, diagnostics = parse_record_file(path, "qc")
    assert len(records) == 2
    assert len(diagnostics) == 3
    assert len(records) + len(diagnostics) == 5
    assert [d.line_number for d in diagnostics] == [3, 4, 5]


def test_parse_qi_assigns_sequential_ids_per_title(tmp_path):
    path = tmp_path / "qi.tsv"
    path.write_text(
        "query\tlanguage\titem_title\tlabel\n"
        "cable\ten\tUSB-C Cable\t1\n"
        "charging cable\ten\tUSB-C Cable\t1\n"
        "mouse\ten\tWireless Mouse\t1\n",
        encoding="utf-8",
    )
    records, diagnostics = parse_record_file(path, "qi")
    assert diagnostics == []
    assert records[0].item_id == records[1].item_id == "item-1"
    assert records[2].item_id == "item-2"


def test_parse_qi_rejects_conflicting_id_title_binding(tmp_path):
    path = tmp_path / "qi.tsv"
    path.write_text(
        "query\tlanguage\titem_id\titem_title\tlabel\n"
        "cable\ten\tB01\tUSB-C Cable\t1\n"
        "cable\ten\tB01\tDifferent Title\t1\n",
        encoding="utf-8",
    )
    records, diagnostics = parse_record_file(path, "qi")
    assert len(records) == 1
    assert len(diagnostics) == 1
    assert "already bound" in diagnostics[0].reason


@pytest.mark.parametrize("header", [
    "",
    "query\tlanguage\tlabel",
    "query\tlanguage\tcategory_path\tlabel\textra",
    "Query\tLanguage\tCategory_Path\tLabel",
])
def test_parse_rejects_bad_headers(tmp_path, header):
    path = tmp_path / "qc.tsv"
    path.write_text(header + "\n" if header else "", encoding="utf-8")
    with pytest.raises(RecordFileError):
        parse_record_file(path, "qc")


def test_parse_rejects_missing_and_binary_files(tmp_path):
    with pytest.raises(RecordFileError):
        parse_record_file(tmp_path / "absent.tsv", "qc")
    bad = tmp_path / "bad.tsv"
    bad.write_bytes(b"query\tlanguage\tcategory_path\tlabel\n\xff\xfe\x00\n")
    with pytest.raises(RecordFileError):
        parse_record_file(bad, "qc")


def test_parse_rejects_unknown_task(tmp_path):
    with pytest.raises(ValueError):
        parse_record_file(tmp_path / "x.tsv", "querycat")


# ---------------------------------------------------------------------------
# Serialization round trips

def test_serialize_parse_identity_qc(tmp_path):
    records = [
        make_qc(),
        make_qc(query="café table", language="fr",
                levels=("Furniture", "Tables"), label=0,
                origin=ORIGIN_GENERATED),
    ]
    path = tmp_path / "out.tsv"
    write_record_file(path, records, "qc")
    reparsed, diagnostics = parse_record_file(path, "qc")
    assert diagnostics == []
    assert reparsed == records


def test_serialize_parse_identity_qi(tmp_path):
    records = [
        make_qi(),
        make_qi(query="mäuse", language="de", item_id="item 2",
                item_title="Kabellose Maus", label=0,
                origin=ORIGIN_TRANSLATED),
    ]
    path = tmp_path / "out.tsv"
    write_record_file(path, records, "qi")
    reparsed, diagnostics = parse_record_file(path, "qi")
    assert diagnostics == []
    assert reparsed == records


def test_serialize_rejects_mismatched_record_type():
    with pytest.raises(ValueError):
        serialize_records([make_qi()], "qc")


_FIELD_TEXT = st.text(
    st.characters(blacklist_characters="\t\n\r", blacklist_categories=("Cs",)),
    min_size=1, max_size=12,
).filter(lambda s: s.strip())


@settings(max_examples=60)
@given(
    query=_FIELD_TEXT,
    language=st.sampled_from(sorted(LANGUAGES)),
    levels=st.lists(
        _FIELD_TEXT.filter(lambda s: " > " not in s),
        min_size=1, max_size=4,
    ),
    label=st.integers(0, 1),
)
def test_serialize_parse_identity_property(tmp_path_factory, query, language, levels, label):
    record = QCRecord(query, language, CategoryPath(tuple(levels)), label,
                      ORIGIN_ORIGINAL)
    path = tmp_path_factory.mktemp("rt") / "one.tsv"
    write_record_file(path, [record], "qc")
    reparsed, diagnostics = parse_record_file(path, "qc")
    assert diagnostics == []
    assert reparsed == [record]
