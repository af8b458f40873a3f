"""Independent reference implementations used as test oracles.

These deliberately avoid the library's replay/search/ranking machinery:
the replay simulator rebuilds arc maps from the raw arc list and finds
hidden sequences by exhaustive iterative-deepening enumeration, AUC is the
explicit O(n^2) pairwise sum, Shapley values come from averaging marginal
contributions over all permutations, and gradients come from central
finite differences.
"""

import math
from itertools import permutations

import numpy as np

HORIZON = 5


def _arc_maps(net):
    place_set = set(net.places)
    inputs = {t: [] for t in net.transitions}
    outputs = {t: [] for t in net.transitions}
    for src, tgt, w in net.arcs:
        if src in place_set:
            inputs[tgt].append((src, w))
        else:
            outputs[src].append((tgt, w))
    return inputs, outputs


class SimpleReplaySimulator:
    """Step-by-step replay simulator; no BFS, no pruning, no caching."""

    def __init__(self, net):
        self.net = net
        self.inputs, self.outputs = _arc_maps(net)
        self.hidden = sorted(t for t, lab in net.transitions.items() if lab is None)
        self.by_label = {
            lab: t for t, lab in net.transitions.items() if lab is not None
        }

    def enabled(self, marking, t):
        return all(marking.get(p, 0) >= w for p, w in self.inputs[t])

    def fire(self, marking, t):
        m = dict(marking)
        for p, w in self.inputs[t]:
            m[p] = m.get(p, 0) - w
        for p, w in self.outputs[t]:
            m[p] = m.get(p, 0) + w
        return m

    def _hidden_sequence(self, marking, done):
        """First fireable hidden sequence (by length, then lexicographic)
        after which done(marking) holds, exploring every sequence up to
        HORIZON firings."""
        for depth in range(1, HORIZON + 1):
            found = self._bounded(marking, done, depth)
            if found is not None:
                return found
        return None

    def _bounded(self, marking, done, depth):
        """Sequences of exactly `depth` hidden firings, lexicographic order."""
        if depth == 0:
            return [] if done(marking) else None
        for h in self.hidden:
            if not self.enabled(marking, h):
                continue
            m2 = self.fire(marking, h)
            if depth == 1 and done(m2):
                return [h]
            if depth > 1:
                rest = self._bounded(m2, done, depth - 1)
                if rest is not None:
                    return [h] + rest
        return None

    def replay(self, events, cutoff=None):
        marking = {
            p: c for p, c in self.net.initial_marking.as_dict().items()
        }
        timeline = []
        entry_times = {}
        entry_counts = {}
        entry_history = {}
        missing = 0

        def do_fire(t, ts):
            nonlocal marking
            marking = self.fire(marking, t)
            timeline.append((t, ts))
            for p, w in self.outputs[t]:
                entry_counts[p] = entry_counts.get(p, 0) + w
                entry_times[p] = ts
                entry_history.setdefault(p, []).append(ts)

        evs = [e for e in events if cutoff is None or e.timestamp <= cutoff]
        for ev in evs:
            t = self.by_label.get(ev.event_name)
            if t is None:
                missing += 1
                continue
            if not self.enabled(marking, t):
                seq = self._hidden_sequence(
                    marking, lambda m: all(
                        m.get(p, 0) >= w for p, w in self.inputs[t]
                    )
                )
                if seq is not None:
                    for h in seq:
                        do_fire(h, ev.timestamp)
                else:
                    for p, w in self.inputs[t]:
                        deficit = w - marking.get(p, 0)
                        if deficit > 0:
                            marking[p] = marking.get(p, 0) + deficit
                            missing += deficit
            do_fire(t, ev.timestamp)

        remaining = 0
        if cutoff is None:
            sink = self.net.sink_place
            if evs and sink is not None:
                before = marking.get(sink, 0)
                seq = self._hidden_sequence(
                    marking, lambda m: m.get(sink, 0) > before
                )
                if seq is not None:
                    for h in seq:
                        do_fire(h, evs[-1].timestamp)
            remaining = sum(
                c for p, c in marking.items() if c > 0 and p != sink
            )
        return {
            "final_marking": {p: c for p, c in marking.items() if c > 0},
            "firing_timeline": timeline,
            "place_entry_times": entry_times,
            "place_entry_counts": entry_counts,
            "place_entry_history": entry_history,
            "missing_tokens": missing,
            "remaining_tokens": remaining,
        }


def pairwise_auc(scores, labels):
    """Explicit double loop over positive-negative pairs, ties worth 1/2."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=int)
    pos = scores[labels == 1]
    neg = scores[labels == 0]
    total = 0.0
    for sp in pos:
        for sn in neg:
            if sp > sn:
                total += 1.0
            elif sp == sn:
                total += 0.5
    return total / (len(pos) * len(neg))


def bootstrap_auc_ci(scores, labels, level=0.95, n_resamples=10_000, seed=0):
    """Stratified bootstrap percentile interval for the midrank AUC."""
    from scipy.stats import rankdata

    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=int)
    pos = scores[labels == 1]
    neg = scores[labels == 0]
    m, n = len(pos), len(neg)
    rng = np.random.RandomState(seed)
    pos_samples = pos[rng.randint(0, m, size=(n_resamples, m))]
    neg_samples = neg[rng.randint(0, n, size=(n_resamples, n))]
    combined = np.concatenate([pos_samples, neg_samples], axis=1)
    ranks = rankdata(combined, method="average", axis=1)
    aucs = (ranks[:, :m].sum(axis=1) - m * (m + 1) / 2.0) / (m * n)
    alpha = (1 - level) / 2.0
    return (
        float(np.quantile(aucs, alpha)),
        float(np.quantile(aucs, 1 - alpha)),
    )


def permutation_shapley(group_names, value):
    """Average marginal contribution over all |G|! orderings."""
    phi = {g: 0.0 for g in group_names}
    count = 0
    for order in permutations(group_names):
        coalition = []
        prev = value(tuple(coalition))
        for g in order:
            coalition.append(g)
            cur = value(tuple(coalition))
            phi[g] += cur - prev
            prev = cur
        count += 1
    return {g: total / count for g, total in phi.items()}


def finite_difference_gradients(loss_fn, weights, h=1e-5):
    """Central finite differences of loss_fn() w.r.t. every parameter."""
    grads = {}
    for name, (W, b) in weights.layers.items():
        gW = np.zeros_like(W)
        gb = np.zeros_like(b)
        for arr, garr in ((W, gW), (b, gb)):
            flat = arr.ravel()
            gflat = garr.ravel()
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + h
                hi = loss_fn()
                flat[i] = orig - h
                lo = loss_fn()
                flat[i] = orig
                gflat[i] = (hi - lo) / (2 * h)
        grads[name] = (gW, gb)
    return grads
