"""Document parsing, validation and writing."""

import json
import random
from pathlib import Path

import pytest

from builders import library_complex, rand_finite_complex

from towerkit import document
from towerkit.errors import InputError
from towerkit.modules import BaseRing

FIXTURES = Path(__file__).parent / "fixtures"


def doc_text(**parts):
    return json.dumps(parts)


@pytest.mark.parametrize("text,expected", [
    ("Z", BaseRing.integers()),
    ("Z/6", BaseRing.mod(6)),
    ("Z[1/2,3]", BaseRing.localized([2, 3])),
    ("Z[1/3,2]", BaseRing.localized([2, 3])),
])
def test_parse_base(text, expected):
    assert document.parse_base(text) == expected


@pytest.mark.parametrize("text", ["Q", "Z/1", "Z[1/4]", 3, "Z[1/]"])
def test_parse_base_rejects(text):
    with pytest.raises(Exception):
        document.parse_base(text)


@pytest.mark.parametrize("value", [3, 3.0, True, "3.5", "", "0x3"])
def test_integers_are_decimal_strings(value):
    with pytest.raises(InputError):
        document.parse_int(value, "here")


def test_parse_int_accepts_signed_strings():
    assert document.parse_int("-12", "here") == -12
    assert document.parse_int("123456789012345678901234567890", "here") == 123456789012345678901234567890


def test_unknown_top_level_key():
    with pytest.raises(InputError, match="unknown top-level"):
        document.loads(doc_text(base="Z", extra={}))


def test_not_json():
    with pytest.raises(InputError, match="not a JSON"):
        document.loads("{base: Z")


def test_order_not_in_normal_form():
    with pytest.raises(InputError, match="normal form"):
        document.loads(doc_text(base="Z/4", modules={"M": {"orders": ["8"]}}))


def test_matrix_shape_checked():
    text = doc_text(base="Z", complexes={"C": {"modules": {"0": {"orders": ["0"]}, "1": {"orders": ["0"]}},
                                               "differentials": {"1": [["1", "2"]]}}})
    with pytest.raises(InputError, match="differentials"):
        document.loads(text)


def test_inline_and_named_complexes():
    doc = document.loads(doc_text(base="Z", modules={"M": {"orders": ["4", "0"]}}))
    C = doc.complex("M")
    assert C.homology(0).invariant_factors() == [4, 0]
    with pytest.raises(InputError):
        doc.complex("missing")


def test_validate_reports_d_squared():
    doc = document.load(FIXTURES / "bad_d2.json")
    assert document.validate(doc) == ["complexes.C: d^2 is not zero in degree 2"]


def test_validate_reports_tail_level():
    doc = document.load(FIXTURES / "bad_tail.json")
    problems = document.validate(doc)
    assert len(problems) == 1 and "tail map at level 2" in problems[0]


@pytest.mark.parametrize("name", ["adams_z3.json", "finite_tower.json", "lattice_a1.json", "moore_z3.json"])
def test_good_fixtures_validate(name):
    assert document.validate(document.load(FIXTURES / name)) == []


def test_tower_transition_count():
    text = doc_text(base="Z", towers={"T": {"kind": "module", "prefix": [{"orders": ["2"]}, {"orders": ["4"]}],
                                             "transitions": []}})
    with pytest.raises(InputError, match="transitions"):
        document.loads(text)


def test_tail_period_bounds():
    text = doc_text(base="Z", towers={"T": {"kind": "module", "prefix": [{"orders": ["2"]}],
                                             "transitions": [], "tail_period": "3", "tail_map": [["1"]]}})
    with pytest.raises(InputError, match="tail period"):
        document.loads(text)


@pytest.mark.parametrize("seed", range(15))
def test_complex_round_trip(seed):
    rng = random.Random(seed)
    orders, diffs = rand_finite_complex(rng)
    C = library_complex(orders, diffs)
    text = document.dumps({"base": "Z", "complexes": {"C": document.complex_dict(C)}})
    D = document.loads(text).complex("C")
    for k in C.degrees():
        assert D.homology(k).invariant_factors() == C.homology(k).invariant_factors()
    assert document.dumps({"base": "Z", "complexes": {"C": document.complex_dict(D)}}) == text


def test_dumps_is_deterministic():
    a = document.dumps({"b": ["1"], "a": {"z": "2", "y": "3"}})
    b = document.dumps({"a": {"y": "3", "z": "2"}, "b": ["1"]})
    assert a == b and a.endswith("\n")
