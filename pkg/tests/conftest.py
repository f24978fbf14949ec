import json
from pathlib import Path

import numpy as np
import pytest

from mtpref.ingest import HumanRating, TranslationInstance

DATA = Path(__file__).parent / "data"


@pytest.fixture
def golden():
    return json.loads((DATA / "golden.json").read_text())


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def make_record(seg, sys_id, rating, scale="DA", candidate=None, reference="the reference", orientation="higher_better"):
    rec = {
        "segment_id": seg,
        "system_id": sys_id,
        "lang_pair": "en-de",
        "source": f"source {seg}",
        "candidate": candidate if candidate is not None else f"candidate {seg} {sys_id}",
        "rating": rating,
        "scale": scale,
        "orientation": orientation,
    }
    if reference is not None:
        rec["reference"] = reference
    return rec


def write_jsonl(path, records):
    path.write_text("".join(json.dumps(r) + "\n" for r in records), encoding="utf-8")
    return path


def inst(seg, sys_id, candidate, source="src text", reference="ref text"):
    return TranslationInstance(seg, sys_id, "en-de", source, candidate, reference)


def rating(seg, sys_id, value, scale="DA", orientation="higher_better"):
    return HumanRating(seg, sys_id, value, scale, orientation)


ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[n])
