import logging

import pytest

from mtpref.errors import ConfigError, ConflictError
from mtpref.pairs import (
    DEFAULT_THRESHOLDS,
    build_pairs,
    load_pairs,
    normalize_rating,
    parse_thresholds,
    write_pairs,
)

from conftest import inst, rating


def two(diff, scale="DA", base=None, orientation="higher_better"):
    base = 50.0 if base is None else base
    instances = [inst("1", "a", "cand a"), inst("1", "b", "cand b")]
    ratings = [rating("1", "a", base + diff, scale, orientation), rating("1", "b", base, scale, orientation)]
    return instances, ratings


@pytest.mark.parametrize(
    "scale,diff,base,expected",
    [("DA", 30, 50, 1), ("DA", 20, 50, 0), ("MQM", 0.15, 5, 1), ("MQM", 0.05, 5, 0), ("DA", 25, 50, 1)],
)
def test_threshold_fixtures(scale, diff, base, expected):
    assert len(build_pairs(*two(diff, scale, base))) == expected


def test_threshold_equal_after_rounding():
    instances = [inst("1", "a", "x"), inst("1", "b", "y")]
    ratings = [rating("1", "a", 24.9, "MQM"), rating("1", "b", 24.8, "MQM")]
    assert len(build_pairs(instances, ratings)) == 1


def test_chosen_is_higher_rated():
    instances, ratings = two(-40)
    (p,) = build_pairs(instances, ratings)
    assert p.chosen == "cand b" and p.rejected == "cand a"
    assert p.h_plus == 50 and p.h_minus == 10
    assert p.margin == 40


def test_penalty_orientation():
    instances = [inst("1", "a", "x"), inst("1", "b", "y")]
    ratings = [rating("1", "a", 1.0, "MQM", "penalty"), rating("1", "b", 10.0, "MQM", "penalty")]
    (p,) = build_pairs(instances, ratings)
    assert p.chosen == "x" and p.h_plus == 24.0 and p.h_minus == 15.0
    assert normalize_rating(rating("1", "a", 30.0, "DA", "penalty")) == 70.0


def test_margin_scale():
    (p,) = build_pairs(*two(30), margin_scale={"DA": 0.01})
    assert p.margin == pytest.approx(0.3)


def test_no_pairs_across_scales_or_identical_text():
    instances = [inst("1", "a", "x"), inst("1", "b", "y"), inst("1", "c", "x")]
    ratings = [rating("1", "a", 90, "DA"), rating("1", "b", 10, "SQM"), rating("1", "c", 10, "DA")]
    assert build_pairs(instances, ratings) == []


def test_equal_ratings_never_pair():
    assert build_pairs(*two(0), thresholds={"DA": 0}) == []


def test_conflicting_source_raises():
    instances = [inst("1", "a", "x", source="s1"), inst("1", "b", "y", source="s2")]
    with pytest.raises(ConflictError):
        build_pairs(instances, [rating("1", "a", 90), rating("1", "b", 10)])


def test_unrated_skipped_with_warning(caplog):
    instances, ratings = two(40)
    instances.append(inst("1", "c", "cand c"))
    with caplog.at_level(logging.WARNING):
        pairs = build_pairs(instances, ratings)
    assert len(pairs) == 1
    assert "1 instance" in caplog.text


def test_all_pairs_and_antisymmetry():
    values = {"a": 90, "b": 60, "c": 30, "d": 20}
    instances = [inst("1", k, f"cand {k}") for k in values]
    ratings = [rating("1", k, v) for k, v in values.items()]
    pairs = build_pairs(instances, ratings)
    got = {(p.chosen_system, p.rejected_system) for p in pairs}
    assert got == {("a", "b"), ("a", "c"), ("a", "d"), ("b", "c"), ("b", "d")}
    for x, y in got:
        assert (y, x) not in got
    assert all(p.h_plus > p.h_minus for p in pairs)


def test_threshold_monotone():
    values = {k: v for k, v in zip("abcdef", [95, 80, 64, 51, 33, 2])}
    instances = [inst("1", k, f"cand {k}") for k in values]
    ratings = [rating("1", k, v) for k, v in values.items()]
    counts = [len(build_pairs(instances, ratings, {"DA": t})) for t in (0, 10, 25, 50, 100)]
    assert counts == sorted(counts, reverse=True)
    assert counts[0] == 15 and counts[-1] == 0


def test_input_order_invariant():
    values = {"a": 90, "b": 60, "c": 30}
    instances = [inst(s, k, f"cand {s}{k}") for s in "12" for k in values]
    ratings = [rating(s, k, v) for s in "12" for k, v in values.items()]
    assert build_pairs(instances, ratings) == build_pairs(instances[::-1], ratings[::-1])


def test_parse_thresholds():
    assert parse_thresholds("") == DEFAULT_THRESHOLDS
    t = parse_thresholds("DA=30, MQM=0.5")
    assert t["DA"] == 30 and t["MQM"] == 0.5 and t["SQM"] == 25
    for bad in ("XX=1", "DA", "DA=abc", "DA=-1"):
        with pytest.raises(ConfigError):
            parse_thresholds(bad)


def test_pairs_roundtrip(tmp_path):
    instances, ratings = two(40)
    instances.append(inst("2", "a", "q", reference=None))
    instances.append(inst("2", "b", "w", reference=None))
    ratings += [rating("2", "a", 0), rating("2", "b", 100)]
    pairs = build_pairs(instances, ratings)
    write_pairs(pairs, tmp_path / "p.jsonl")
    assert load_pairs(tmp_path / "p.jsonl") == pairs
