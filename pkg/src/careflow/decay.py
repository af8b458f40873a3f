"""Time-decay place enhancement and timed state samples.

Each place p of the net carries a linear decay function
f_p(t) = max(beta_p - delta_p * (t - last_entry_p), 0), with beta_p = 1 and
delta_p the reciprocal of the mean interval between consecutive token
entries of p observed on training replays. A timed state sample at time t is
the concatenation of the decay values F, scaled entry counts C, and the
marking M, in the net's canonical place order (length 3 * |places|).
"""

import json
from dataclasses import dataclass

import numpy as np

from .petrinet import replay_trace


@dataclass
class DecayParams:
    places: tuple          # canonical place order
    beta: dict             # place -> initial decay value (> 0)
    delta: dict            # place -> decay rate per millisecond (>= 0)
    count_scale: dict      # place -> positive count normalizer (>= 1)

    def validate(self):
        for p in self.places:
            if self.beta.get(p, 0) <= 0:
                raise ValueError(f"beta must be positive for place {p}")
            if self.delta.get(p, -1) < 0:
                raise ValueError(f"delta must be non-negative for place {p}")
            if self.count_scale.get(p, 0) < 1:
                raise ValueError(f"count_scale must be >= 1 for place {p}")

    def to_json(self):
        return {
            "places": list(self.places),
            "beta": self.beta,
            "delta": self.delta,
            "count_scale": self.count_scale,
        }

    @classmethod
    def from_json(cls, data):
        params = cls(
            places=tuple(data["places"]),
            beta=dict(data["beta"]),
            delta=dict(data["delta"]),
            count_scale=dict(data["count_scale"]),
        )
        params.validate()
        return params


@dataclass
class TimedStateSample:
    f: np.ndarray
    c: np.ndarray
    m: np.ndarray
    at: int

    @property
    def dimension(self):
        return 3 * len(self.f)

    def vector(self):
        return np.concatenate([self.f, self.c, self.m])


def estimate_decay_params(net, train_log):
    """Fit per-place decay rates and count normalizers from training replays.

    delta_p = 1 / mean gap between consecutive entries of p within a trace,
    pooled over all training traces; places with no observed re-entry fall
    back to 1 / mean trace duration. count_scale_p is the largest number of
    tokens that entered p during any single replay (at least 1).
    """
    if not train_log.traces:
        raise ValueError("cannot estimate decay parameters from an empty log")
    gaps = {p: [] for p in net.places}
    max_entries = {p: 0 for p in net.places}
    durations = []
    for trace in train_log.traces:
        result = replay_trace(net, trace, cutoff=None)
        durations.append(
            trace.instances[-1].timestamp - trace.instances[0].timestamp
        )
        for p, history in result.place_entry_history.items():
            gaps[p].extend(b - a for a, b in zip(history, history[1:]))
        for p, count in result.place_entry_counts.items():
            max_entries[p] = max(max_entries[p], count)
    mean_duration = sum(durations) / len(durations)
    if mean_duration <= 0:
        mean_duration = 1.0

    beta, delta, count_scale = {}, {}, {}
    for p in net.places:
        beta[p] = 1.0
        mean_gap = sum(gaps[p]) / len(gaps[p]) if gaps[p] else 0.0
        delta[p] = 1.0 / mean_gap if mean_gap > 0 else 1.0 / mean_duration
        count_scale[p] = float(max(max_entries[p], 1))
    params = DecayParams(tuple(net.places), beta, delta, count_scale)
    params.validate()
    return params


def timed_state_sample(net, params, trace, at):
    """Replay the trace prefix up to `at` and read off the F/C/M vectors."""
    if at < trace.instances[0].timestamp:
        raise ValueError(
            f"sample time {at} precedes trace start {trace.instances[0].timestamp}"
        )
    result = replay_trace(net, trace, cutoff=at)
    n = len(params.places)
    f = np.zeros(n)
    c = np.zeros(n)
    m = np.zeros(n)
    for i, p in enumerate(params.places):
        last = result.place_entry_times.get(p)
        if last is not None:
            f[i] = max(params.beta[p] - params.delta[p] * (at - last), 0.0)
        c[i] = result.place_entry_counts.get(p, 0) / params.count_scale[p]
        m[i] = result.final_marking.count(p)
    return TimedStateSample(f=f, c=c, m=m, at=at)


def build_dataset(net, params, log, cutoff_hours=24):
    """One (timed state sample, demographics, label) row per trace."""
    from .model import PredictionDataset, encode_demographics

    cutoff_ms = int(cutoff_hours * 3_600_000)
    samples, demos, labels, case_ids = [], [], [], []
    for trace in log.traces:
        at = trace.admit_timestamp + cutoff_ms
        samples.append(timed_state_sample(net, params, trace, at).vector())
        demos.append(encode_demographics(trace.demographics))
        labels.append(trace.outcome)
        case_ids.append(trace.case_id)
    return PredictionDataset(
        samples=np.array(samples, dtype=float),
        demographics=np.array(demos, dtype=float),
        labels=np.array(labels, dtype=int),
        case_ids=case_ids,
    )


# ---------------------------------------------------------------------------
# Dataset CSV + sidecar metadata.

def write_dataset(dataset, params, csv_file, meta_file=None, cutoff_hours=None):
    n_places = len(params.places)
    header = (
        ["case_id"]
        + [f"f_{i}" for i in range(n_places)]
        + [f"c_{i}" for i in range(n_places)]
        + [f"m_{i}" for i in range(n_places)]
        + ["age"]
        + [f"ins_{i}" for i in range(5)]
        + ["label"]
    )
    csv_file.write(",".join(header) + "\n")
    for i in range(len(dataset.labels)):
        row = (
            [dataset.case_ids[i]]
            + [repr(float(v)) for v in dataset.samples[i]]
            + [repr(float(v)) for v in dataset.demographics[i]]
            + [str(int(dataset.labels[i]))]
        )
        csv_file.write(",".join(row) + "\n")
    if meta_file is not None:
        meta = {"decay_params": params.to_json()}
        if cutoff_hours is not None:
            meta["cutoff_hours"] = cutoff_hours
        json.dump(meta, meta_file, indent=2)
        meta_file.write("\n")


def read_dataset(csv_file):
    from .model import PredictionDataset

    header = csv_file.readline().strip().split(",")
    n_places = sum(1 for h in header if h.startswith("f_"))
    samples, demos, labels, case_ids = [], [], [], []
    for line in csv_file:
        if not line.strip():
            continue
        fields = line.strip().split(",")
        case_ids.append(fields[0])
        values = [float(v) for v in fields[1:-1]]
        samples.append(values[: 3 * n_places])
        demos.append(values[3 * n_places:])
        labels.append(int(fields[-1]))
    return PredictionDataset(
        samples=np.array(samples, dtype=float),
        demographics=np.array(demos, dtype=float),
        labels=np.array(labels, dtype=int),
        case_ids=case_ids,
    )
