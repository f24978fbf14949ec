"""Preference pair construction from human ratings."""

import json
import logging
from dataclasses import asdict, dataclass
from itertools import combinations
from typing import Optional

from .errors import ConfigError, ConflictError, SchemaError
from .ingest import SCALE_RANGES, write_jsonl

log = logging.getLogger(__name__)

DEFAULT_THRESHOLDS = {"DA": 25.0, "SQM": 25.0, "ESA": 25.0, "MQM": 0.1}

# Absolute slack on the threshold comparison so that a rating difference
# equal to the threshold in decimal still forms a pair after float rounding
# (24.9 - 24.8 evaluates to 0.09999999999999787).
_THRESHOLD_SLACK = 1e-9


@dataclass(frozen=True)
class PreferencePair:
    segment_id: str
    lang_pair: str
    source: str
    reference: Optional[str]
    chosen: str
    rejected: str
    h_plus: float
    h_minus: float
    margin: float
    scale: str = "DA"
    chosen_system: Optional[str] = None
    rejected_system: Optional[str] = None

    def to_record(self):
        rec = {k: v for k, v in asdict(self).items() if v is not None}
        return rec


def normalize_rating(r):
    """Map a rating onto a higher-is-better scale.

    Penalty-oriented ratings are reflected about the top of their scale
    (``25 - value`` for MQM, ``100 - value`` for the 0-100 scales).
    """
    if r.scale not in SCALE_RANGES:
        raise ConfigError(f"unknown scale {r.scale!r}")
    if r.orientation == "higher_better":
        return float(r.value)
    if r.orientation == "penalty":
        return SCALE_RANGES[r.scale][1] - float(r.value)
    raise ConfigError(f"unknown orientation {r.orientation!r}")


def parse_thresholds(text):
    """Parse ``"DA=25,MQM=0.1"`` into a dict, starting from the defaults."""
    out = dict(DEFAULT_THRESHOLDS)
    if not text:
        return out
    for item in text.split(","):
        name, sep, value = item.partition("=")
        name = name.strip()
        if not sep or name not in SCALE_RANGES:
            raise ConfigError(f"bad threshold entry {item!r}")
        try:
            out[name] = float(value)
        except ValueError:
            raise ConfigError(f"bad threshold value {value!r}") from None
        if out[name] < 0:
            raise ConfigError(f"threshold for {name} must be >= 0")
    return out


def count_unrated(instances, ratings):
    rated = {r.key for r in ratings}
    return sum(1 for i in instances if i.key not in rated)


def build_pairs(instances, ratings, thresholds=None, margin_scale=None):
    """Emit one preference pair per candidate pair whose rating gap clears the threshold.

    Candidates are grouped by ``(segment_id, lang_pair)`` and never paired
    across annotation scales. Within a group every unordered pair with a
    normalized rating difference ``>= thresholds[scale]`` yields a pair with
    the higher-rated candidate as ``chosen``. Equal ratings and identical
    candidate strings never pair. Instances without a rating are skipped.
    """
    thresholds = {**DEFAULT_THRESHOLDS, **(thresholds or {})}
    margin_scale = margin_scale or {}
    by_key = {r.key: r for r in ratings}

    groups = {}
    skipped = 0
    for inst in instances:
        rating = by_key.get(inst.key)
        if rating is None:
            skipped += 1
            continue
        groups.setdefault((inst.lang_pair, inst.segment_id), []).append((inst, rating))
    if skipped:
        log.warning("skipped %d instance(s) without a rating", skipped)

    out = []
    for (lang_pair, segment_id), members in sorted(groups.items()):
        first = members[0][0]
        for inst, _ in members[1:]:
            if inst.source != first.source or inst.reference != first.reference:
                raise ConflictError(
                    f"segment {segment_id!r} ({lang_pair}) has differing source/reference "
                    f"for systems {first.system_id!r} and {inst.system_id!r}"
                )
        members.sort(key=lambda ir: ir[0].system_id)
        for (a, ra), (b, rb) in combinations(members, 2):
            if ra.scale != rb.scale or a.candidate == b.candidate:
                continue
            scale = ra.scale
            if scale not in thresholds:
                raise ConfigError(f"no threshold for scale {scale!r}")
            ha, hb = normalize_rating(ra), normalize_rating(rb)
            if ha == hb:
                continue
            if ha < hb:
                a, b, ha, hb = b, a, hb, ha
            diff = ha - hb
            if diff < thresholds[scale] - _THRESHOLD_SLACK:
                continue
            out.append(
                PreferencePair(
                    segment_id=segment_id,
                    lang_pair=lang_pair,
                    source=a.source,
                    reference=a.reference,
                    chosen=a.candidate,
                    rejected=b.candidate,
                    h_plus=ha,
                    h_minus=hb,
                    margin=float(margin_scale.get(scale, 1.0)) * diff,
                    scale=scale,
                    chosen_system=a.system_id,
                    rejected_system=b.system_id,
                )
            )
    out.sort(key=lambda p: (p.lang_pair, p.segment_id, p.chosen_system or "", p.rejected_system or ""))
    return out


def write_pairs(pairs, path):
    write_jsonl((p.to_record() for p in pairs), path)


def load_pairs(path):
    fields = ("segment_id", "lang_pair", "source", "chosen", "rejected", "h_plus", "h_minus", "margin")
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            try:
                rec = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"invalid JSON ({exc.msg})", lineno) from None
            missing = [f for f in fields if f not in rec]
            if missing:
                raise SchemaError(f"missing field {missing[0]!r}", lineno)
            if rec["margin"] < 0:
                raise SchemaError("margin must be >= 0", lineno)
            out.append(
                PreferencePair(
                    segment_id=rec["segment_id"],
                    lang_pair=rec["lang_pair"],
                    source=rec["source"],
                    reference=rec.get("reference"),
                    chosen=rec["chosen"],
                    rejected=rec["rejected"],
                    h_plus=float(rec["h_plus"]),
                    h_minus=float(rec["h_minus"]),
                    margin=float(rec["margin"]),
                    scale=rec.get("scale", "DA"),
                    chosen_system=rec.get("chosen_system"),
                    rejected_system=rec.get("rejected_system"),
                )
            )
    return out
