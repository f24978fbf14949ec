"""Reading and writing instance, rating, score and report files.

JSONL is the canonical on-disk format. TSV is accepted on import only and
uses a fixed header (``TSV_COLUMNS``); an empty ``reference`` column means
the instance has no reference.
"""

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import AlignmentError, ConflictError, RangeError, SchemaError

SCALES = ("DA", "MQM", "SQM", "ESA")
ORIENTATIONS = ("higher_better", "penalty")
SCALE_RANGES = {"DA": (0.0, 100.0), "SQM": (0.0, 100.0), "ESA": (0.0, 100.0), "MQM": (0.0, 25.0)}

TSV_COLUMNS = (
    "segment_id",
    "system_id",
    "lang_pair",
    "source",
    "candidate",
    "reference",
    "rating",
    "scale",
    "orientation",
)


@dataclass(frozen=True)
class TranslationInstance:
    segment_id: str
    system_id: str
    lang_pair: str
    source: str
    candidate: str
    reference: Optional[str] = None

    @property
    def key(self):
        return (self.segment_id, self.system_id)

    @property
    def is_qe(self):
        """True when scored without a reference."""
        return self.reference is None


@dataclass(frozen=True)
class HumanRating:
    segment_id: str
    system_id: str
    value: float
    scale: str
    orientation: str = "higher_better"

    @property
    def key(self):
        return (self.segment_id, self.system_id)


@dataclass
class ScoreMatrix:
    """Systems x segments table of metric and human scores.

    Missing cells are NaN. A cell is comparable only when both the metric
    and the human entry are present.
    """

    lang_pair: str
    systems: list
    segments: list
    metric: np.ndarray
    human: np.ndarray

    def __post_init__(self):
        self.metric = np.asarray(self.metric, dtype=float)
        self.human = np.asarray(self.human, dtype=float)
        shape = (len(self.systems), len(self.segments))
        if self.metric.shape != shape or self.human.shape != shape:
            raise AlignmentError(
                f"metric {self.metric.shape} and human {self.human.shape} must both be {shape}"
            )

    @property
    def comparable(self):
        return ~np.isnan(self.metric) & ~np.isnan(self.human)

    @classmethod
    def from_records(cls, lang_pair, metric, human):
        """Build from two ``{(segment_id, system_id): value}`` maps.

        Systems and segments are the sorted union of keys present in both.
        """
        keys = set(metric) & set(human)
        systems = sorted({sys_id for _, sys_id in keys})
        segments = sorted({seg for seg, _ in keys})
        si = {s: i for i, s in enumerate(systems)}
        gi = {g: j for j, g in enumerate(segments)}
        m = np.full((len(systems), len(segments)), np.nan)
        h = np.full_like(m, np.nan)
        for seg, sys_id in keys:
            m[si[sys_id], gi[seg]] = metric[(seg, sys_id)]
            h[si[sys_id], gi[seg]] = human[(seg, sys_id)]
        return cls(lang_pair, systems, segments, m, h)


def _require(rec, name, kind, line):
    if name not in rec:
        raise SchemaError(f"missing field {name!r}", line)
    value = rec[name]
    if kind is str and not isinstance(value, str):
        raise SchemaError(f"field {name!r} must be a string", line)
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise SchemaError(f"field {name!r} must be a number", line)
        value = float(value)
        if not math.isfinite(value):
            raise SchemaError(f"field {name!r} must be finite", line)
    return value


def _parse_instance(rec, line):
    if not isinstance(rec, dict):
        raise SchemaError("record is not an object", line)
    segment_id = _require(rec, "segment_id", str, line)
    system_id = _require(rec, "system_id", str, line)
    lang_pair = _require(rec, "lang_pair", str, line)
    source = _require(rec, "source", str, line)
    candidate = _require(rec, "candidate", str, line)
    reference = rec.get("reference")
    if reference is not None and not isinstance(reference, str):
        raise SchemaError("field 'reference' must be a string", line)
    if not source:
        raise SchemaError("source must be non-empty", line)
    return TranslationInstance(segment_id, system_id, lang_pair, source, candidate, reference)


def _parse_record(rec, line):
    inst = _parse_instance(rec, line)
    value = _require(rec, "rating", float, line)
    scale = _require(rec, "scale", str, line)
    if scale not in SCALES:
        raise SchemaError(f"unknown scale {scale!r}", line)
    orientation = rec.get("orientation", "higher_better")
    if orientation not in ORIENTATIONS:
        raise SchemaError(f"unknown orientation {orientation!r}", line)
    lo, hi = SCALE_RANGES[scale]
    if not lo <= value <= hi:
        raise RangeError(f"{scale} rating {value:g} outside [{lo:g}, {hi:g}]", line)
    return inst, HumanRating(inst.segment_id, inst.system_id, value, scale, orientation)


def _read_jsonl(path):
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            try:
                yield lineno, json.loads(raw)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"invalid JSON ({exc.msg})", lineno) from None


def _read_tsv(path):
    with open(path, encoding="utf-8", newline="") as fh:
        header = fh.readline().rstrip("\r\n").split("\t")
        if tuple(header) != TSV_COLUMNS:
            raise SchemaError(f"TSV header must be {', '.join(TSV_COLUMNS)}", 1)
        for lineno, raw in enumerate(fh, start=2):
            raw = raw.rstrip("\r\n")
            if not raw:
                continue
            cells = raw.split("\t")
            if len(cells) != len(TSV_COLUMNS):
                raise SchemaError(f"expected {len(TSV_COLUMNS)} columns, got {len(cells)}", lineno)
            rec = dict(zip(TSV_COLUMNS, cells))
            if rec["reference"] == "":
                del rec["reference"]
            try:
                rec["rating"] = float(rec["rating"])
            except ValueError:
                raise SchemaError("field 'rating' must be a number", lineno) from None
            yield lineno, rec


def load_ratings(path, format="jsonl"):
    """Load instances and their human ratings from one file.

    Exact duplicate records collapse into one. A repeated
    ``(segment_id, system_id)`` whose text or rating differs raises
    :class:`ConflictError`.

    Returns:
        ``(instances, ratings)``, both sorted by ``(lang_pair, segment_id, system_id)``.
    """
    if format not in ("jsonl", "tsv"):
        raise SchemaError(f"unknown format {format!r}")
    reader = _read_jsonl if format == "jsonl" else _read_tsv
    seen = {}
    for lineno, rec in reader(path):
        inst, rating = _parse_record(rec, lineno)
        prev = seen.get(inst.key)
        if prev is not None:
            if prev != (inst, rating):
                raise ConflictError(
                    f"duplicate key {inst.key} with conflicting content", lineno
                )
            continue
        seen[inst.key] = (inst, rating)
    ordered = sorted(seen.values(), key=lambda ir: (ir[0].lang_pair, ir[0].segment_id, ir[0].system_id))
    return [i for i, _ in ordered], [r for _, r in ordered]


def load_instances(path, format="jsonl"):
    """Load instances only; rating fields are ignored when present."""
    if format not in ("jsonl", "tsv"):
        raise SchemaError(f"unknown format {format!r}")
    reader = _read_jsonl if format == "jsonl" else _read_tsv
    seen = {}
    for lineno, rec in reader(path):
        inst = _parse_instance(rec, lineno)
        prev = seen.get(inst.key)
        if prev is not None and prev != inst:
            raise ConflictError(f"duplicate key {inst.key} with conflicting content", lineno)
        seen[inst.key] = inst
    return sorted(seen.values(), key=lambda i: (i.lang_pair, i.segment_id, i.system_id))


def instance_record(inst, rating=None):
    rec = {
        "segment_id": inst.segment_id,
        "system_id": inst.system_id,
        "lang_pair": inst.lang_pair,
        "source": inst.source,
        "candidate": inst.candidate,
    }
    if inst.reference is not None:
        rec["reference"] = inst.reference
    if rating is not None:
        rec["rating"] = rating.value
        rec["scale"] = rating.scale
        rec["orientation"] = rating.orientation
    return rec


def write_jsonl(records, path):
    path = Path(path)
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, ensure_ascii=False))
            fh.write("\n")


def write_ratings(instances, ratings, path):
    """Write instances with their ratings in the instance/rating JSONL schema."""
    by_key = {r.key: r for r in ratings}
    write_jsonl((instance_record(i, by_key.get(i.key)) for i in instances), path)


def write_scores(instances, rewards, path, calibrated=None):
    """Write one score record per instance, ordered by (lang_pair, segment_id, system_id)."""
    if len(rewards) != len(instances):
        raise AlignmentError(f"{len(rewards)} rewards for {len(instances)} instances")
    if calibrated is not None and len(calibrated) != len(instances):
        raise AlignmentError(f"{len(calibrated)} calibrated scores for {len(instances)} instances")
    rows = []
    for k, inst in enumerate(instances):
        rec = {
            "segment_id": inst.segment_id,
            "system_id": inst.system_id,
            "lang_pair": inst.lang_pair,
            "reward": float(rewards[k]),
        }
        if calibrated is not None:
            rec["calibrated"] = float(calibrated[k])
        rows.append(rec)
    rows.sort(key=lambda r: (r["lang_pair"], r["segment_id"], r["system_id"]))
    write_jsonl(rows, path)


def load_scores(path):
    """Read a score JSONL file back into a list of dicts (sorted by key)."""
    out = []
    for lineno, rec in _read_jsonl(path):
        for name in ("segment_id", "system_id", "lang_pair"):
            _require(rec, name, str, lineno)
        _require(rec, "reward", float, lineno)
        if "calibrated" in rec:
            _require(rec, "calibrated", float, lineno)
        out.append(rec)
    out.sort(key=lambda r: (r["lang_pair"], r["segment_id"], r["system_id"]))
    return out


def load_human(path):
    """Read human scores keyed by lang_pair then (segment_id, system_id).

    Accepts full instance/rating records (the rating is normalized to
    higher-is-better) or lighter records carrying a ``human`` field.
    """
    from .pairs import normalize_rating

    out = {}
    for lineno, rec in _read_jsonl(path):
        seg = _require(rec, "segment_id", str, lineno)
        sys_id = _require(rec, "system_id", str, lineno)
        lp = _require(rec, "lang_pair", str, lineno)
        if "human" in rec:
            value = _require(rec, "human", float, lineno)
        else:
            value = _require(rec, "rating", float, lineno)
            scale = rec.get("scale", "DA")
            if scale not in SCALES:
                raise SchemaError(f"unknown scale {scale!r}", lineno)
            lo, hi = SCALE_RANGES[scale]
            if not lo <= value <= hi:
                raise RangeError(f"{scale} rating {value:g} outside [{lo:g}, {hi:g}]", lineno)
            rating = HumanRating(seg, sys_id, value, scale, rec.get("orientation", "higher_better"))
            value = normalize_rating(rating)
        out.setdefault(lp, {})[(seg, sys_id)] = value
    return out


def write_report(rows, path):
    """Write meta-evaluation rows ``(lang_pair, statistic, value, p_value)`` as CSV."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["lang_pair", "statistic", "value", "p_value"])
        for lang_pair, stat, value, p_value in rows:
            writer.writerow([lang_pair, stat, repr(float(value)), "" if p_value is None else repr(float(p_value))])
