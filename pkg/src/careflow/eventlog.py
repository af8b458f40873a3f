"""Patient event logs: types, CSV parsing, validation, cohort filtering, splits.

File formats:
  events CSV:        case_id,event,timestamp      (ISO-8601 UTC, ms precision)
  demographics CSV:  case_id,age,insurance,admit_timestamp,prior_admissions,outcome

Timestamps are integer milliseconds since epoch internally. Two events of the
same case may never share a timestamp; ties are a hard parse error rather than
being silently perturbed.
"""

import csv
import math
import random
from dataclasses import dataclass, field
from datetime import datetime, timezone

from .vocabulary import EXIT_EVENTS, INSURANCE_TYPES


class LogFormatError(ValueError):
    """Malformed input data; carries a line number when one is known."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


@dataclass(frozen=True)
class EventInstance:
    event_name: str
    timestamp: int  # ms since epoch


@dataclass(frozen=True)
class DemographicRecord:
    age: int
    insurance: str

    def __post_init__(self):
        if self.insurance not in INSURANCE_TYPES:
            raise LogFormatError(f"unknown insurance category {self.insurance!r}")


@dataclass
class Trace:
    case_id: str
    instances: list  # of EventInstance, strictly increasing timestamps
    demographics: DemographicRecord
    outcome: int  # 1 = death, 0 = discharge
    admit_timestamp: int
    prior_admissions: int

    def validate(self):
        if not self.instances:
            raise LogFormatError(f"case {self.case_id}: no events")
        for a, b in zip(self.instances, self.instances[1:]):
            if b.timestamp <= a.timestamp:
                raise LogFormatError(
                    f"case {self.case_id}: duplicate timestamp {b.timestamp}"
                    if b.timestamp == a.timestamp
                    else f"case {self.case_id}: timestamps out of order"
                )
        exits = [e for e in self.instances if e.event_name in EXIT_EVENTS]
        if len(exits) != 1 or self.instances[-1].event_name not in EXIT_EVENTS:
            raise LogFormatError(
                f"case {self.case_id}: expected exactly one exit event, last"
            )
        expected = 1 if self.instances[-1].event_name == "DEATH" else 0
        if self.outcome != expected:
            raise LogFormatError(
                f"case {self.case_id}: outcome {self.outcome} inconsistent with "
                f"exit event {self.instances[-1].event_name}"
            )

    @property
    def exit_event(self):
        return self.instances[-1]


@dataclass
class EventLog:
    traces: list  # of Trace
    vocabulary: tuple = ()

    def __post_init__(self):
        if not self.vocabulary:
            seen = []
            for t in self.traces:
                for e in t.instances:
                    if e.event_name not in seen:
                        seen.append(e.event_name)
            self.vocabulary = tuple(seen)

    def validate(self):
        ids = set()
        vocab = set(self.vocabulary)
        for t in self.traces:
            if t.case_id in ids:
                raise LogFormatError(f"duplicate case_id {t.case_id}")
            ids.add(t.case_id)
            t.validate()
            for e in t.instances:
                if e.event_name not in vocab:
                    raise LogFormatError(
                        f"case {t.case_id}: event {e.event_name!r} not in vocabulary"
                    )

    def __len__(self):
        return len(self.traces)


@dataclass
class CohortSplit:
    train: EventLog
    validation: EventLog
    test: EventLog
    seed: int


def parse_timestamp(text, line=None):
    """ISO-8601 UTC string -> integer milliseconds since epoch."""
    try:
        dt = datetime.fromisoformat(text.replace("Z", "+00:00"))
    except ValueError:
        raise LogFormatError(f"bad timestamp {text!r}", line) from None
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return round(dt.timestamp() * 1000.0)


def format_timestamp(ms):
    dt = datetime.fromtimestamp(ms / 1000.0, tz=timezone.utc)
    return dt.strftime("%Y-%m-%dT%H:%M:%S.") + f"{ms % 1000:03d}Z"


def _read_rows(stream, expected_header, what):
    reader = csv.reader(stream)
    try:
        header = next(reader)
    except StopIteration:
        raise LogFormatError(f"empty {what} file") from None
    if [h.strip() for h in header] != expected_header:
        raise LogFormatError(
            f"bad {what} header {header!r}, expected {expected_header}", line=1
        )
    for lineno, row in enumerate(reader, start=2):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) != len(expected_header):
            raise LogFormatError(f"expected {len(expected_header)} fields", lineno)
        yield lineno, row


def parse_event_log(events_file, demographics_file):
    """Parse the two CSV streams into a validated EventLog."""
    demo = {}
    for lineno, row in _read_rows(
        demographics_file,
        ["case_id", "age", "insurance", "admit_timestamp", "prior_admissions", "outcome"],
        "demographics",
    ):
        case_id, age, insurance, admit_ts, prior, outcome = [f.strip() for f in row]
        if case_id in demo:
            raise LogFormatError(f"duplicate demographics for case {case_id}", lineno)
        try:
            rec = DemographicRecord(age=int(age), insurance=insurance)
            demo[case_id] = (rec, parse_timestamp(admit_ts, lineno), int(prior), int(outcome))
        except LogFormatError as exc:
            raise LogFormatError(str(exc), lineno if exc.line is None else None) from None
        except ValueError:
            raise LogFormatError(f"malformed demographics row for case {case_id}", lineno) from None

    by_case = {}
    for lineno, row in _read_rows(events_file, ["case_id", "event", "timestamp"], "events"):
        case_id, event, ts = [f.strip() for f in row]
        if not event:
            raise LogFormatError("empty event name", lineno)
        by_case.setdefault(case_id, []).append((parse_timestamp(ts, lineno), event, lineno))

    traces = []
    for case_id, rows in by_case.items():
        if case_id not in demo:
            raise LogFormatError(f"missing demographics for case {case_id}")
        rows.sort(key=lambda r: (r[0], r[2]))
        for (ta, _, _), (tb, _, lb) in zip(rows, rows[1:]):
            if ta == tb:
                raise LogFormatError(f"duplicate timestamp in case {case_id}", lb)
        rec, admit_ts, prior, outcome = demo[case_id]
        traces.append(
            Trace(
                case_id=case_id,
                instances=[EventInstance(name, ts) for ts, name, _ in rows],
                demographics=rec,
                outcome=outcome,
                admit_timestamp=admit_ts,
                prior_admissions=prior,
            )
        )
    log = EventLog(traces=traces)
    log.validate()
    return log


def write_event_log(log, events_file, demographics_file):
    """Inverse of parse_event_log for the same two CSV formats."""
    ew = csv.writer(events_file, lineterminator="\n")
    ew.writerow(["case_id", "event", "timestamp"])
    dw = csv.writer(demographics_file, lineterminator="\n")
    dw.writerow(["case_id", "age", "insurance", "admit_timestamp", "prior_admissions", "outcome"])
    for t in log.traces:
        for e in t.instances:
            ew.writerow([t.case_id, e.event_name, format_timestamp(e.timestamp)])
        dw.writerow(
            [
                t.case_id,
                t.demographics.age,
                t.demographics.insurance,
                format_timestamp(t.admit_timestamp),
                t.prior_admissions,
                t.outcome,
            ]
        )


def filter_cohort(log, cutoff_hours=24):
    """Keep adults with prior admissions who did not die within the cutoff window."""
    cutoff_ms = int(cutoff_hours * 3_600_000)
    kept = []
    for t in log.traces:
        if t.demographics.age < 18:
            continue
        if t.prior_admissions == 0:
            continue
        if (
            t.exit_event.event_name == "DEATH"
            and t.exit_event.timestamp < t.admit_timestamp + cutoff_ms
        ):
            continue
        kept.append(t)
    return EventLog(traces=kept, vocabulary=log.vocabulary)


def _round_half_up(x):
    return math.floor(x + 0.5)


def split_cohort(log, seed):
    """Deterministic 67/33 train-pool/test split, then 80/20 train/validation.

    The smaller part of each split is sized by rounding (1,017 -> 336 test,
    681 -> 136 validation); shuffling is a Fisher-Yates permutation from
    Python's Mersenne Twister seeded with `seed`, so membership is
    reproducible across runs and platforms.
    """
    n = len(log.traces)
    if n < 5:
        raise ValueError(f"need at least 5 traces to split, got {n}")
    order = list(range(n))
    random.Random(seed).shuffle(order)
    n_test = _round_half_up(n * 0.33)
    pool = order[: n - n_test]
    test_idx = order[n - n_test:]
    n_val = _round_half_up(len(pool) * 0.20)
    train_idx = pool[: len(pool) - n_val]
    val_idx = pool[len(pool) - n_val:]

    def sub(indices):
        return EventLog(
            traces=[log.traces[i] for i in sorted(indices)], vocabulary=log.vocabulary
        )

    return CohortSplit(
        train=sub(train_idx), validation=sub(val_idx), test=sub(test_idx), seed=seed
    )
