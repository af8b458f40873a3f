"""Synthetic ICU cohort generator with a plantable mortality signal.

Each patient gets an admission event, one to three careunit in/out pairs,
a stream of normal/abnormal lab events (mostly inside the first 24 hours),
and a DEATH or DISCH exit. The death probability is
    sigmoid(logit(death_rate) + signal_strength * risk)
with the documented linear risk rule
    risk = 0.3 * (abnormal labs in first 24h - 5) + 0.01 * (age - 60)
so the planted signal flows through abnormal lab events and is recoverable
from timed state samples. Deaths are placed at least 25 hours after
admission so cohort filtering keeps them; planted violations (under-age,
no prior admission, or death before 24h) are opt-in for filter tests.
"""

import math
import random
from dataclasses import dataclass

from .eventlog import DemographicRecord, EventInstance, EventLog, Trace
from .vocabulary import (
    ADMISSION_EVENTS,
    CARE_UNITS,
    INSURANCE_TYPES,
    LAB_ITEMS,
)

HOUR_MS = 3_600_000
MINUTE_MS = 60_000

# 2024-01-01T00:00:00Z, an arbitrary fixed origin for generated timestamps.
EPOCH_BASE_MS = 1_704_067_200_000


@dataclass
class CohortConfig:
    n_patients: int = 1017
    seed: int = 7
    death_rate: float = 0.17
    signal_strength: float = 2.0
    mean_events_per_patient: int = 20
    horizon_hours: float = 168.0
    violations: int = 0  # extra patients that cohort filtering must drop

    def validate(self):
        if not 0 < self.death_rate < 1:
            raise ValueError("death_rate must lie strictly between 0 and 1")
        if self.n_patients < 10:
            raise ValueError("need at least 10 patients")
        if self.signal_strength < 0:
            raise ValueError("signal_strength must be non-negative")


def risk_score(abnormal_labs_24h, age):
    """The generator's linear mortality risk rule."""
    return 0.3 * (abnormal_labs_24h - 5) + 0.01 * (age - 60)


def _sigmoid(x):
    return 1.0 / (1.0 + math.exp(-x)) if x >= 0 else math.exp(x) / (1.0 + math.exp(x))


def _strictly_increasing(offsets):
    """Bump duplicate ms offsets so the sequence is strictly increasing."""
    out = []
    last = None
    for off in offsets:
        off = int(off)
        if last is not None and off <= last:
            off = last + 1
        out.append(off)
        last = off
    return out


def _generate_patient(rng, cfg, case_id, admit_ts, violation=None):
    age = rng.randint(18, 95)
    prior = rng.randint(1, 5)
    if violation == "age":
        age = rng.randint(8, 17)
    elif violation == "prior":
        prior = 0

    severity = rng.random()
    n_labs_24h = 12
    p_abn = 0.1 + 0.8 * severity
    flags = [rng.random() < p_abn for _ in range(n_labs_24h)]
    abn_24h = sum(flags)

    base = math.log(cfg.death_rate / (1.0 - cfg.death_rate))
    p_death = _sigmoid(base + cfg.signal_strength * risk_score(abn_24h, age))
    dies = rng.random() < p_death
    if violation == "early_death":
        dies = True
        exit_offset = rng.uniform(1, 20) * HOUR_MS
    elif dies:
        exit_offset = rng.uniform(25, max(26.0, cfg.horizon_hours)) * HOUR_MS
    else:
        exit_offset = rng.uniform(26, max(27.0, cfg.horizon_hours)) * HOUR_MS

    timed = []  # (offset_ms, name), admission/exit handled separately
    n_pairs = rng.randint(1, 3)
    seg = (exit_offset - 40 * MINUTE_MS) / n_pairs
    for k in range(n_pairs):
        unit = rng.choice(CARE_UNITS)
        start = 10 * MINUTE_MS + k * seg
        timed.append((start + rng.uniform(0, MINUTE_MS), f"ICU_in_{unit}"))
        timed.append((start + seg - rng.uniform(0, 10 * MINUTE_MS), f"ICU_out_{unit}"))

    lab_window = min(24 * HOUR_MS, exit_offset - 30 * MINUTE_MS)
    for abnormal in flags:
        item = rng.choice(LAB_ITEMS)
        name = f"{item}_abn" if abnormal else item
        timed.append((rng.uniform(5 * MINUTE_MS, lab_window), name))
    n_late = max(0, cfg.mean_events_per_patient - n_labs_24h)
    for _ in range(rng.randint(0, max(n_late, 1))):
        if exit_offset - 20 * MINUTE_MS <= 24 * HOUR_MS:
            break
        item = rng.choice(LAB_ITEMS)
        name = f"{item}_abn" if rng.random() < p_abn else item
        timed.append((rng.uniform(24 * HOUR_MS, exit_offset - 20 * MINUTE_MS), name))

    timed.sort(key=lambda x: x[0])
    names = [rng.choice(ADMISSION_EVENTS)] + [n for _, n in timed] + [
        "DEATH" if dies else "DISCH"
    ]
    offsets = _strictly_increasing([0] + [o for o, _ in timed] + [exit_offset])
    instances = [
        EventInstance(name, admit_ts + off) for name, off in zip(names, offsets)
    ]
    return Trace(
        case_id=case_id,
        instances=instances,
        demographics=DemographicRecord(age=age, insurance=rng.choice(INSURANCE_TYPES)),
        outcome=1 if dies else 0,
        admit_timestamp=admit_ts,
        prior_admissions=prior,
    )


def generate_log(cfg):
    """Deterministic synthetic EventLog; includes cfg.violations bad traces."""
    cfg.validate()
    master = random.Random(cfg.seed)
    total = cfg.n_patients + cfg.violations
    violation_kinds = ["age", "prior", "early_death"]
    traces = []
    for i in range(total):
        rng = random.Random((cfg.seed << 20) ^ (i * 2654435761 % (1 << 31)))
        violation = None
        if i >= cfg.n_patients:
            violation = violation_kinds[i % len(violation_kinds)]
        admit_ts = EPOCH_BASE_MS + i * 14 * 24 * HOUR_MS + master.randint(0, HOUR_MS)
        traces.append(_generate_patient(rng, cfg, f"p{i:05d}", admit_ts, violation))
    log = EventLog(traces=traces)
    log.validate()
    return log


def generate(cfg, events_file, demographics_file):
    """Write the synthetic cohort as the standard two-CSV event log format."""
    from .eventlog import write_event_log

    log = generate_log(cfg)
    write_event_log(log, events_file, demographics_file)
    return log
