"""Exact Shapley attribution over clinical feature groups.

Model input columns are partitioned into Demographics, LabMeasurementTypes,
AdmissionTypes, and CareUnitTypes (plus an ungrouped remainder for source/
sink and exit-event places). The value of a coalition is the mean predicted
death probability with all columns of absent groups replaced by their
training-set means; Shapley values are computed exactly by enumerating all
2^k coalitions, which is cheap for the four clinical groups.
"""

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .model import _forward_full
from .vocabulary import event_category

GROUP_NAMES = (
    "Demographics",
    "LabMeasurementTypes",
    "AdmissionTypes",
    "CareUnitTypes",
)

_CATEGORY_TO_GROUP = {
    "lab": "LabMeasurementTypes",
    "admission": "AdmissionTypes",
    "careunit": "CareUnitTypes",
}

MAX_GROUPS = 12  # 2^k coalition enumeration guard


@dataclass
class GroupAttribution:
    phi: dict            # group name -> Shapley value
    baseline_value: float  # v(no groups present)
    full_value: float      # v(all groups present)

    def to_json(self):
        return {
            "phi": self.phi,
            "baseline_value": self.baseline_value,
            "full_value": self.full_value,
            "ranking": rank_groups(self),
        }


def assign_groups(places, place_provenance, demo_width=6):
    """Partition the 3|P| + demo_width input columns into feature groups.

    place_provenance maps each place id to the event label feeding it (None
    for plumbing places like source and sink). The f/c/m columns of a place
    follow its event's category; exit-event and unattributed places land in
    "ungrouped". All demographic columns form the Demographics group.
    """
    n = len(places)
    groups = {name: [] for name in GROUP_NAMES}
    groups["ungrouped"] = []
    for i, p in enumerate(places):
        if p not in place_provenance:
            raise KeyError(f"missing provenance for place {p!r}")
        event = place_provenance[p]
        category = event_category(event) if event is not None else None
        target = _CATEGORY_TO_GROUP.get(category, "ungrouped")
        groups[target] += [i, n + i, 2 * n + i]
    groups["Demographics"] = list(range(3 * n, 3 * n + demo_width))
    return {k: sorted(v) for k, v in groups.items()}


def _coalition_value_fn(weights, dataset, groups, baseline=None):
    """Return v(S): mean prediction with absent groups' columns mean-imputed."""
    n_tss = dataset.samples.shape[1]
    X = np.concatenate([dataset.samples, dataset.demographics], axis=1)
    if baseline is None:
        baseline = X.mean(axis=0)
    baseline = np.asarray(baseline, dtype=float)
    group_names = [g for g in groups if g != "ungrouped"]

    def value(coalition):
        masked = np.tile(baseline, (X.shape[0], 1))
        if "ungrouped" in groups and groups["ungrouped"]:
            masked[:, groups["ungrouped"]] = X[:, groups["ungrouped"]]
        for g in coalition:
            masked[:, groups[g]] = X[:, groups[g]]
        probs, _ = _forward_full(
            weights, masked[:, :n_tss], masked[:, n_tss:], training=False
        )
        return float(np.mean(probs))

    return group_names, value


def shapley_groups(weights, dataset, groups, baseline=None):
    """Exact Shapley value of each feature group by coalition enumeration."""
    if len(dataset) == 0:
        raise ValueError("cannot attribute over an empty dataset")
    group_names, value = _coalition_value_fn(weights, dataset, groups, baseline)
    k = len(group_names)
    if k > MAX_GROUPS:
        raise ValueError(f"{k} groups exceed the exact enumeration limit {MAX_GROUPS}")

    values = {}
    for size in range(k + 1):
        for coalition in combinations(group_names, size):
            values[frozenset(coalition)] = value(coalition)

    fact = math.factorial
    phi = {}
    for g in group_names:
        others = [x for x in group_names if x != g]
        total = 0.0
        for size in range(len(others) + 1):
            weight = fact(size) * fact(k - size - 1) / fact(k)
            for coalition in combinations(others, size):
                s = frozenset(coalition)
                total += weight * (values[s | {g}] - values[s])
        phi[g] = total
    return GroupAttribution(
        phi=phi,
        baseline_value=values[frozenset()],
        full_value=values[frozenset(group_names)],
    )


def rank_groups(attribution):
    """Group names ordered by |Shapley value| descending, ties by name."""
    return sorted(attribution.phi, key=lambda g: (-abs(attribution.phi[g]), g))
