"""Instrument definitions, record validation, scoring and feature encoding.

Five standardized instruments are scored by summation (WHO-5 additionally
scaled by 4 to a 0..100 percentage). A participant is encoded into a fixed
17-column feature vector: six named ACE items, the cumulative ACE score,
four instrument totals and six behavioral yes/no items.
"""

from dataclasses import dataclass, field
from enum import Enum
from types import MappingProxyType
from typing import Mapping, Optional, Sequence

from .errors import InvalidInputError


class Aggregation(str, Enum):
    SUM = "SUM"
    SUM_TIMES_4 = "SUM_TIMES_4"


@dataclass(frozen=True)
class InstrumentSpec:
    id: str
    item_count: int
    item_min: int
    item_max: int
    aggregation: Aggregation = Aggregation.SUM

    @property
    def factor(self) -> int:
        return 4 if self.aggregation is Aggregation.SUM_TIMES_4 else 1

    @property
    def score_range(self):
        return (
            self.factor * self.item_count * self.item_min,
            self.factor * self.item_count * self.item_max,
        )


ACE16 = InstrumentSpec("ACE16", 16, 0, 1)
WHO5 = InstrumentSpec("WHO5", 5, 0, 5, Aggregation.SUM_TIMES_4)
MDI = InstrumentSpec("MDI", 12, 0, 5)
GAD7 = InstrumentSpec("GAD7", 7, 0, 3)
ISI = InstrumentSpec("ISI", 7, 0, 4)

INSTRUMENTS = MappingProxyType(
    {spec.id: spec for spec in (ACE16, WHO5, MDI, GAD7, ISI)}
)

CANONICAL_ACE_ITEMS = (
    "emotional_abuse",
    "emotional_neglect",
    "domestic_violence_witness",
    "parent_mental_illness",
    "peer_rejection",
    "parents_fighting",
)
DEFAULT_EXTRA_ACE_ITEMS = tuple(f"extra_{i:02d}" for i in range(1, 11))

BEHAVIORAL_ITEMS = (
    "self_harm",
    "irrational_decisions",
    "focus_difficulty",
    "relationship_issues",
    "physical_violence",
    "violent_family",
)

INSTRUMENT_TOTALS = ("who5_total", "gad7_total", "mdi_total", "isi_total")

FEATURE_NAMES = (
    CANONICAL_ACE_ITEMS
    + ("ace_cumulative",)
    + INSTRUMENT_TOTALS
    + BEHAVIORAL_ITEMS
)
N_FEATURES = len(FEATURE_NAMES)

BINARY_FEATURES = frozenset(CANONICAL_ACE_ITEMS + BEHAVIORAL_ITEMS)
BINARY_MASK = tuple(name in BINARY_FEATURES for name in FEATURE_NAMES)

FEATURE_RANGES = MappingProxyType(
    {
        **{name: (0, 1) for name in BINARY_FEATURES},
        "ace_cumulative": ACE16.score_range,
        "who5_total": WHO5.score_range,
        "gad7_total": GAD7.score_range,
        "mdi_total": MDI.score_range,
        "isi_total": ISI.score_range,
    }
)


@dataclass(frozen=True)
class Violation:
    field: str
    value: object
    allowed: Optional[tuple]
    message: str = ""

    def __str__(self):
        lo_hi = f" (allowed {self.allowed[0]}..{self.allowed[1]})" if self.allowed else ""
        return f"{self.field}={self.value!r}: {self.message or 'out of range'}{lo_hi}"


@dataclass(frozen=True)
class ParticipantRecord:
    """Raw answers for one participant.

    ``ace_items`` maps item name to 0/1 and must hold 16 entries, six of which
    carry the canonical names. ``behavioral`` maps the six behavioral item
    names to 0/1. Any value may be ``None`` to denote a missing answer, which
    :func:`validate_record` reports.
    """

    id: str
    ace_items: Mapping[str, Optional[int]]
    who5_items: Sequence[Optional[int]]
    mdi_items: Sequence[Optional[int]]
    gad7_items: Sequence[Optional[int]]
    isi_items: Sequence[Optional[int]]
    behavioral: Mapping[str, Optional[int]]
    label: Optional[int]


@dataclass(frozen=True)
class FeatureVector:
    values: tuple
    label: int
    names: tuple = field(default=FEATURE_NAMES, repr=False)

    def as_dict(self):
        return dict(zip(self.names, self.values))


def _is_int(value):
    return isinstance(value, int) and not isinstance(value, bool)


def _check_item(field_name, value, lo, hi, out):
    if value is None:
        out.append(Violation(field_name, None, (lo, hi), "missing"))
    elif not _is_int(value):
        out.append(Violation(field_name, value, (lo, hi), "not an integer"))
    elif not lo <= value <= hi:
        out.append(Violation(field_name, value, (lo, hi), f"{field_name.split('[')[0]} item out of range"))


def validate_record(raw: ParticipantRecord) -> list:
    """Return every violation in ``raw``; an empty list means the record is valid."""
    out = []
    if raw.id is None or raw.id == "":
        out.append(Violation("id", raw.id, None, "missing"))

    ace = dict(raw.ace_items or {})
    for name in CANONICAL_ACE_ITEMS:
        if name not in ace:
            out.append(Violation(f"ace.{name}", None, (0, 1), "missing"))
    if len(ace) != ACE16.item_count:
        out.append(
            Violation("ace_items", len(ace), (ACE16.item_count, ACE16.item_count),
                      "wrong number of ACE items")
        )
    for name, value in ace.items():
        _check_item(f"ace.{name}", value, ACE16.item_min, ACE16.item_max, out)

    for attr, spec in (("who5_items", WHO5), ("mdi_items", MDI),
                       ("gad7_items", GAD7), ("isi_items", ISI)):
        items = getattr(raw, attr)
        prefix = spec.id.lower()
        if items is None or len(items) != spec.item_count:
            got = None if items is None else len(items)
            out.append(Violation(attr, got, (spec.item_count, spec.item_count),
                                 f"{prefix} expects {spec.item_count} items"))
            continue
        for i, value in enumerate(items):
            _check_item(f"{prefix}[{i}]", value, spec.item_min, spec.item_max, out)

    behavioral = dict(raw.behavioral or {})
    for name in BEHAVIORAL_ITEMS:
        _check_item(name, behavioral.get(name), 0, 1, out)
    for name in behavioral:
        if name not in BEHAVIORAL_ITEMS:
            out.append(Violation(name, behavioral[name], None, "unknown behavioral item"))

    _check_item("label", raw.label, 0, 1, out)
    return out


def score_instrument(spec: InstrumentSpec, answers) -> int:
    """Aggregate ``answers`` for one instrument.

    Raises:
        InvalidInputError: wrong answer count or an answer outside the item scale.
    """
    answers = list(answers)
    if len(answers) != spec.item_count:
        raise InvalidInputError(
            f"{spec.id}: expected {spec.item_count} answers, got {len(answers)}"
        )
    violations = []
    for i, value in enumerate(answers):
        _check_item(f"{spec.id.lower()}[{i}]", value, spec.item_min, spec.item_max, violations)
    if violations:
        raise InvalidInputError(f"{spec.id}: invalid answers", violations)
    return spec.factor * sum(answers)


def encode_record(record: ParticipantRecord) -> FeatureVector:
    violations = validate_record(record)
    if violations:
        raise InvalidInputError(
            f"record {record.id!r} has {len(violations)} violation(s): "
            + "; ".join(str(v) for v in violations[:5]),
            violations,
        )
    ace = record.ace_items
    values = [int(ace[name]) for name in CANONICAL_ACE_ITEMS]
    values.append(score_instrument(ACE16, ace.values()))
    values.append(score_instrument(WHO5, record.who5_items))
    values.append(score_instrument(GAD7, record.gad7_items))
    values.append(score_instrument(MDI, record.mdi_items))
    values.append(score_instrument(ISI, record.isi_items))
    values.extend(int(record.behavioral[name]) for name in BEHAVIORAL_ITEMS)
    return FeatureVector(tuple(float(v) for v in values), int(record.label))
